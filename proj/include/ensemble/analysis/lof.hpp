#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "ensemble/analysis/point_set.hpp"
#include "ensemble/error.hpp"

namespace ensemble::analysis {

// Local outlier factor.
//
// Duplicates: the k-distance of a point is its k-th smallest *distinct*
// distance to the other points (the largest distinct distance when fewer
// than k exist). A point whose k-distance is 0 has infinite local
// reachability density; a ratio of two infinite densities is taken as 1.
inline std::vector<double> lof(const PointSet& points, std::size_t k_neighbors) {
    const std::size_t n = points.size();
    if (k_neighbors < 1 || k_neighbors >= n)
        throw ValidationError("lof: need 1 <= k_neighbors < n (k=" + std::to_string(k_neighbors) +
                              ", n=" + std::to_string(n) + ")");

    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist[i * n + j] = dist[j * n + i] = std::sqrt(squared_distance(points[i], points[j]));

    std::vector<double> kdist(n, 0.0);
    std::vector<std::vector<std::size_t>> hood(n);
    std::vector<double> sorted;
    sorted.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        sorted.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                sorted.push_back(dist[i * n + j]);
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        kdist[i] = sorted[std::min(k_neighbors, sorted.size()) - 1];
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && dist[i * n + j] <= kdist[i])
                hood[i].push_back(j);
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> lrd(n);
    for (std::size_t i = 0; i < n; ++i) {
        double reach = 0.0;
        for (std::size_t j : hood[i])
            reach += std::max(kdist[j], dist[i * n + j]);
        lrd[i] = reach > 0.0 ? static_cast<double>(hood[i].size()) / reach : inf;
    }

    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (std::size_t j : hood[i]) {
            if (std::isinf(lrd[i]))
                sum += std::isinf(lrd[j]) ? 1.0 : 0.0;
            else
                sum += lrd[j] / lrd[i];
        }
        score[i] = sum / static_cast<double>(hood[i].size());
    }
    return score;
}

/// Indices of the m largest scores, largest first; equal scores keep
/// ascending index order.
inline std::vector<std::size_t> select_outliers(const std::vector<double>& scores, std::size_t m) {
    if (m > scores.size())
        throw ValidationError("select_outliers: m exceeds the number of scores");
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(m);
    return idx;
}

} // namespace ensemble::analysis
