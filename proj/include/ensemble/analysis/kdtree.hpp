#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "ensemble/analysis/point_set.hpp"

namespace ensemble::analysis {

/// Static kd-tree over a PointSet for exact nearest-neighbour queries.
/// The tree keeps a reference to the point set, which must outlive it.
class KdTree {
public:
    explicit KdTree(const PointSet& points) : points_(points) {
        order_.resize(points.size());
        std::iota(order_.begin(), order_.end(), std::uint32_t{0});
        nodes_.reserve(points.size());
        if (!order_.empty())
            root_ = build(0, order_.size(), 0);
    }

    /// Squared distance from q to the closest indexed point.
    double nearest_squared(std::span<const double> q) const {
        double best = std::numeric_limits<double>::infinity();
        if (root_ >= 0)
            search(root_, q, best);
        return best;
    }

private:
    struct Node {
        std::uint32_t point;
        std::uint32_t axis;
        std::int32_t left = -1;
        std::int32_t right = -1;
    };

    std::int32_t build(std::size_t lo, std::size_t hi, std::uint32_t depth) {
        if (lo >= hi)
            return -1;
        const std::uint32_t axis = depth % points_.dim();
        const std::size_t mid = lo + (hi - lo) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::uint32_t a, std::uint32_t b) {
                             return points_[a][axis] < points_[b][axis];
                         });
        const auto id = static_cast<std::int32_t>(nodes_.size());
        nodes_.push_back({order_[mid], axis});
        const std::int32_t l = build(lo, mid, depth + 1);
        const std::int32_t r = build(mid + 1, hi, depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    void search(std::int32_t id, std::span<const double> q, double& best) const {
        const Node& n = nodes_[id];
        const auto p = points_[n.point];
        best = std::min(best, squared_distance(q, p));
        const double diff = q[n.axis] - p[n.axis];
        const std::int32_t near = diff < 0 ? n.left : n.right;
        const std::int32_t far = diff < 0 ? n.right : n.left;
        if (near >= 0)
            search(near, q, best);
        if (far >= 0 && diff * diff <= best)
            search(far, q, best);
    }

    const PointSet& points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
    std::int32_t root_ = -1;
};

} // namespace ensemble::analysis
