#pragma once

#include "ensemble/analysis/kdtree.hpp"
#include "ensemble/analysis/point_set.hpp"
#include "ensemble/error.hpp"

namespace ensemble::analysis {

namespace detail {

inline double mean_nearest_squared(const PointSet& from, const KdTree& to) {
    double sum = 0.0;
    for (std::size_t i = 0; i < from.size(); ++i)
        sum += to.nearest_squared(from[i]);
    return sum / static_cast<double>(from.size());
}

} // namespace detail

/// Chamfer distance with squared Euclidean distances, averaged (not summed)
/// in each direction:
///   mean_{a} min_{b} |a-b|^2 + mean_{b} min_{a} |a-b|^2
inline double chamfer(const PointSet& a, const PointSet& b) {
    if (a.empty() || b.empty())
        throw InputError("chamfer distance needs two non-empty point sets");
    if (a.dim() != b.dim())
        throw InputError("chamfer distance: dimension mismatch (" + std::to_string(a.dim()) +
                         " vs " + std::to_string(b.dim()) + ")");
    const KdTree ta(a);
    const KdTree tb(b);
    return detail::mean_nearest_squared(a, tb) + detail::mean_nearest_squared(b, ta);
}

} // namespace ensemble::analysis
