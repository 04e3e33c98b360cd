#include "cosm/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cosm {

VoxelGrid voxelize(const PointCloud& cloud, double leaf) {
    if (!(leaf > 0.0) || !std::isfinite(leaf)) {
        throw NonPositiveLeaf("voxel leaf size must be positive");
    }
    if (cloud.empty()) throw std::invalid_argument("cannot voxelize an empty cloud");

    const auto box = bounding_box(cloud);
    // Keep lattice indices well inside int64.
    if (((box.max - box.min) / leaf).maxCoeff() > 9.0e15) {
        throw std::invalid_argument("voxel leaf size too small for the cloud extent");
    }

    std::vector<std::pair<VoxelKey, std::size_t>> keyed;
    keyed.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Point3 rel = (cloud[i] - box.min) / leaf;
        keyed.push_back({VoxelKey{static_cast<std::int64_t>(std::floor(rel.x())),
                                  static_cast<std::int64_t>(std::floor(rel.y())),
                                  static_cast<std::int64_t>(std::floor(rel.z()))},
                         i});
    }
    // Ties in key keep input order, so each centroid sums its members in a fixed order.
    std::sort(keyed.begin(), keyed.end());

    VoxelGrid grid;
    std::vector<Point3> centroids;
    for (std::size_t begin = 0; begin < keyed.size();) {
        std::size_t end = begin;
        Point3 sum = Point3::Zero();
        while (end < keyed.size() && keyed[end].first == keyed[begin].first) {
            sum += cloud[keyed[end].second];
            ++end;
        }
        const auto count = end - begin;
        centroids.push_back(sum / static_cast<double>(count));
        grid.keys.push_back(keyed[begin].first);
        grid.members.push_back(count);
        begin = end;
    }
    grid.cloud = PointCloud(std::move(centroids));
    return grid;
}

PointCloud voxel_grid_filter(const PointCloud& cloud, double leaf) { return voxelize(cloud, leaf).cloud; }

void TransformSampler::validate() const {
    for (double v : {angle_bound, trans_bound, angle_std, trans_std}) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw std::invalid_argument("sampler bounds and standard deviations must be finite and nonnegative");
        }
    }
}

PoseSampler::PoseSampler(const TransformSampler& sampler) : params_(sampler), rng_(sampler.seed) {
    params_.validate();
}

EulerPose PoseSampler::next() {
    EulerPose p;
    if (params_.mode == SamplerMode::Uniform) {
        const double a = params_.angle_bound, t = params_.trans_bound;
        p.roll = rng_.uniform(-a, a);
        p.pitch = rng_.uniform(-a, a);
        p.yaw = rng_.uniform(-a, a);
        p.tx = rng_.uniform(-t, t);
        p.ty = rng_.uniform(-t, t);
        p.tz = rng_.uniform(-t, t);
    } else {
        const double a = params_.angle_std, t = params_.trans_std;
        p.roll = rng_.normal(0.0, a);
        p.pitch = rng_.normal(0.0, a);
        p.yaw = rng_.normal(0.0, a);
        p.tx = rng_.normal(0.0, t);
        p.ty = rng_.normal(0.0, t);
        p.tz = rng_.normal(0.0, t);
    }
    return p;
}

EulerPose sample_pose_at(const TransformSampler& sampler, std::size_t index) {
    PoseSampler s(sampler);
    EulerPose p = s.next();
    for (std::size_t i = 0; i < index; ++i) p = s.next();
    return p;
}

void OutlierSpec::validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0)) throw std::invalid_argument("outlier fraction must be in [0, 1]");
    if (offset_std && (!(*offset_std >= 0.0) || !std::isfinite(*offset_std))) {
        throw std::invalid_argument("outlier offset_std must be finite and nonnegative");
    }
}

std::size_t outlier_count(std::size_t n, double fraction) {
    return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

OutlierResult inject_outliers(const PointCloud& cloud, const OutlierSpec& spec) {
    spec.validate();
    if (cloud.empty()) throw std::invalid_argument("cannot inject outliers into an empty cloud");

    const std::size_t n = cloud.size();
    const std::size_t k = std::min(n, outlier_count(n, spec.fraction));
    const double stddev = spec.offset_std.value_or(0.5 * bounding_box(cloud).diagonal());

    Rng rng(spec.seed);
    // Partial Fisher-Yates: the first k slots become a uniform k-subset.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        const auto j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(order[i], order[j]);
    }
    std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(picked.begin(), picked.end());

    std::vector<Point3> pts(cloud.begin(), cloud.end());
    for (auto idx : picked) {
        const double dx = rng.normal(0.0, stddev);
        const double dy = rng.normal(0.0, stddev);
        const double dz = rng.normal(0.0, stddev);
        pts[idx] += Point3(dx, dy, dz);
    }
    return {PointCloud(std::move(pts)), std::move(picked)};
}

}  // namespace cosm
