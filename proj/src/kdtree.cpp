#include "cosm/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cosm {

KdTree::KdTree(const PointCloud& cloud, std::size_t bucket_size)
    : points_(cloud.begin(), cloud.end()), bucket_(std::max<std::size_t>(1, bucket_size)) {
    if (points_.empty()) throw std::invalid_argument("k-d tree needs at least one point");
    if (points_.size() > std::numeric_limits<std::uint32_t>::max()) {
        throw std::invalid_argument("k-d tree supports at most 2^32-1 points");
    }
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), 0u);
    nodes_.reserve(2 * (points_.size() / bucket_ + 1));
    build(0, static_cast<std::uint32_t>(points_.size()), 1);
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end, std::size_t level) {
    depth_ = std::max(depth_, level);
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back(Node{begin, end});
    if (end - begin <= bucket_) return id;

    Point3 lo = points_[order_[begin]], hi = lo;
    for (auto i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    const auto mid = begin + (end - begin) / 2;
    auto less = [&](std::uint32_t a, std::uint32_t b) {
        const double ca = points_[a][axis], cb = points_[b][axis];
        return ca < cb || (ca == cb && a < b);
    };
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, less);

    // Everything in [begin, mid) has coordinate <= split, everything in [mid, end) >= split.
    const double split = points_[order_[mid]][axis];
    const auto left = build(begin, mid, level + 1);
    const auto right = build(mid, end, level + 1);
    auto& node = nodes_[static_cast<std::size_t>(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
}

Nearest KdTree::nearest(const Point3& query) const {
    std::size_t visits = 0;
    return nearest(query, visits);
}

Nearest KdTree::nearest(const Point3& query, std::size_t& visits) const {
    Nearest best{std::numeric_limits<std::size_t>::max(), std::numeric_limits<double>::infinity()};
    search(0, query, best, visits);
    return best;
}

void KdTree::search(std::int32_t id, const Point3& q, Nearest& best, std::size_t& visits) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    ++visits;
    if (node.is_leaf()) {
        for (auto i = node.begin; i < node.end; ++i) {
            const auto idx = order_[i];
            const double d = (points_[idx] - q).squaredNorm();
            if (d < best.dist_sq || (d == best.dist_sq && idx < best.index)) {
                best = {idx, d};
            }
        }
        return;
    }
    const double diff = q[node.axis] - node.split;
    const auto near = diff <= 0.0 ? node.left : node.right;
    const auto far = diff <= 0.0 ? node.right : node.left;
    search(near, q, best, visits);
    // Equality still descends: an equidistant point with a lower index may live there.
    if (diff * diff <= best.dist_sq) search(far, q, best, visits);
}

std::size_t KdTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

std::vector<std::vector<std::size_t>> KdTree::leaves() const {
    std::vector<std::vector<std::size_t>> out;
    for (const auto& n : nodes_) {
        if (!n.is_leaf()) continue;
        out.emplace_back(order_.begin() + n.begin, order_.begin() + n.end);
    }
    return out;
}

}  // namespace cosm
