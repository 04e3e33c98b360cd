#pragma once

#include "cosm/core.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace cosm {

struct Nearest {
    std::size_t index = 0;
    double dist_sq = 0.0;

    friend bool operator==(const Nearest&, const Nearest&) = default;
};

/// Exact nearest-neighbour index over a fixed cloud.
///
/// Nodes split at the median position along the axis of largest extent;
/// ordering within an axis is by (coordinate, original index), so the
/// layout is fully deterministic. Ties between equidistant points are
/// resolved towards the lowest original index. The tree holds a copy of the
/// points and is immutable after construction, so concurrent queries are safe.
class KdTree {
public:
    static constexpr std::size_t kDefaultBucket = 16;

    explicit KdTree(const PointCloud& cloud, std::size_t bucket_size = kDefaultBucket);

    Nearest nearest(const Point3& query) const;
    /// Same as nearest(), adding the number of visited nodes to `visits`.
    Nearest nearest(const Point3& query, std::size_t& visits) const;

    std::size_t size() const { return points_.size(); }
    std::size_t bucket_size() const { return bucket_; }
    /// Number of node levels on the longest root-to-leaf path (a lone leaf has depth 1).
    std::size_t depth() const { return depth_; }
    std::size_t leaf_count() const;
    /// Original indices stored in each leaf, in tree order.
    std::vector<std::vector<std::size_t>> leaves() const;

private:
    struct Node {
        // Leaf: [begin, end) into order_. Inner: split axis/value and children.
        std::uint32_t begin = 0;
        std::uint32_t end = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
        int axis = -1;
        double split = 0.0;

        bool is_leaf() const { return left < 0; }
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end, std::size_t level);
    void search(std::int32_t node, const Point3& q, Nearest& best, std::size_t& visits) const;

    std::vector<Point3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::size_t bucket_;
    std::size_t depth_ = 0;
};

}  // namespace cosm
