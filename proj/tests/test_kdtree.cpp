#include "cosm/kdtree.hpp"

#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace cosm;

namespace {

Nearest brute_force(const PointCloud& cloud, const Point3& q) {
    Nearest best{0, (cloud[0] - q).squaredNorm()};
    for (std::size_t i = 1; i < cloud.size(); ++i) {
        const double d = (cloud[i] - q).squaredNorm();
        if (d < best.dist_sq) best = {i, d};
    }
    return best;
}

// Points on a coarse integer lattice, with duplicates, so that ties are common.
PointCloud lattice_cloud(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Point3> pts;
    for (std::size_t i = 0; i < n; ++i) {
        pts.emplace_back(static_cast<double>(rng.below(6)), static_cast<double>(rng.below(6)),
                         static_cast<double>(rng.below(6)));
    }
    return PointCloud(std::move(pts));
}

}  // namespace

TEST_SUITE("kdtree") {

TEST_CASE("single point tree") {
    const PointCloud c({Point3(1, 2, 3)});
    const KdTree t(c);
    CHECK(t.leaf_count() == 1);
    CHECK(t.depth() == 1);
    CHECK(t.nearest(Point3(9, 9, 9)).index == 0);
}

TEST_CASE("identical points resolve to index 0") {
    const PointCloud c(std::vector<Point3>(100, Point3(0.5, 0.5, 0.5)));
    const KdTree t(c, 4);
    CHECK(t.nearest(Point3(0, 0, 0)).index == 0);
    CHECK(t.nearest(Point3(0.5, 0.5, 0.5)) == Nearest{0, 0.0});
}

TEST_CASE("hand examples") {
    const PointCloud c({Point3(1, 0, 0), Point3(0, 2, 0)});
    const KdTree t(c);
    CHECK(t.nearest(Point3(0, 0, 0)) == Nearest{0, 1.0});
    CHECK(t.nearest(Point3(0, 2, 0)) == Nearest{1, 0.0});
}

TEST_CASE("every index is in exactly one leaf") {
    const auto cloud = testing::random_cloud(1000, 2);
    const KdTree t(cloud);
    std::vector<int> seen(cloud.size(), 0);
    for (const auto& leaf : t.leaves()) {
        CHECK(leaf.size() <= t.bucket_size());
        for (auto i : leaf) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
}

TEST_CASE("depth bound") {
    for (std::size_t n : {1u, 10u, 16u, 17u, 100u, 1000u, 4097u}) {
        const KdTree t(testing::random_cloud(n, n), 16);
        const double ratio = std::max(1.0, static_cast<double>(n) / 16.0);
        CHECK(t.depth() <= static_cast<std::size_t>(std::ceil(std::log2(ratio))) + 1);
    }
}

TEST_CASE("brute force oracle on uniform data") {
    const auto targets = testing::random_cloud(500, 31);
    const auto queries = testing::random_cloud(1000, 32, -1.2, 1.2);
    const KdTree t(targets);
    std::size_t mismatches = 0;
    for (const auto& q : queries) mismatches += !(t.nearest(q) == brute_force(targets, q));
    CHECK(mismatches == 0);
}

TEST_CASE("brute force oracle with ties") {
    const auto targets = lattice_cloud(500, 41);
    const auto queries = lattice_cloud(1000, 42);
    for (std::size_t bucket : {1u, 3u, 16u}) {
        const KdTree t(targets, bucket);
        std::size_t mismatches = 0;
        for (const auto& q : queries) {
            mismatches += !(t.nearest(q) == brute_force(targets, q));
            const Point3 half = q + Point3(0.5, 0.0, 0.5);
            mismatches += !(t.nearest(half) == brute_force(targets, half));
        }
        CHECK(mismatches == 0);
    }
}

TEST_CASE("query cost is sublinear") {
    const std::size_t n = 10000;
    const KdTree t(testing::random_cloud(n, 7));
    const auto queries = testing::random_cloud(1000, 8);
    std::size_t visits = 0;
    for (const auto& q : queries) t.nearest(q, visits);
    CHECK(static_cast<double>(visits) / 1000.0 < n / 4.0);
}

}
