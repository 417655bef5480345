#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "ensemble/error.hpp"

namespace ensemble::analysis {

struct ScoredEntry {
    std::string id;
    double true_score = 0.0;
    double predicted_score = 0.0;
};

/// Library of scored compounds. Lower scores are better for both columns.
class ScoredSet {
public:
    ScoredSet() = default;

    explicit ScoredSet(std::vector<ScoredEntry> items) : items_(std::move(items)) {
        std::unordered_set<std::string> seen;
        seen.reserve(items_.size());
        for (const auto& e : items_) {
            if (!std::isfinite(e.true_score) || !std::isfinite(e.predicted_score))
                throw ValidationError("scored set: non-finite score for '" + e.id + "'");
            if (!seen.insert(e.id).second)
                throw ValidationError("scored set: duplicate id '" + e.id + "'");
        }
    }

    std::size_t u() const noexcept { return items_.size(); }
    const std::vector<ScoredEntry>& items() const noexcept { return items_; }

private:
    std::vector<ScoredEntry> items_;
};

/// Number of items a fraction of n selects: ceil(f*n), clamped to [1, n].
/// A relative slack of 1e-12 absorbs representation error in f (0.01*1000
/// must select 10, not 11).
inline std::size_t count_for_fraction(double fraction, std::size_t n) {
    if (n == 0)
        return 0;
    double raw = fraction * static_cast<double>(n);
    auto c = static_cast<std::size_t>(std::ceil(raw - raw * 1e-12));
    return std::clamp<std::size_t>(c, 1, n);
}

/// Indices ordered best-first by `key` (ascending), ties broken by id.
template <typename Key>
std::vector<std::size_t> rank_order(const std::vector<ScoredEntry>& items, Key key) {
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double ka = key(items[a]), kb = key(items[b]);
        if (ka != kb)
            return ka < kb;
        return items[a].id < items[b].id;
    });
    return order;
}

namespace detail {

/// rank_by_true[i] = position of item i in the true-score ordering, listed
/// in predicted order.
inline std::vector<std::size_t> true_ranks_in_predicted_order(const ScoredSet& s) {
    const auto& items = s.items();
    auto by_true = rank_order(items, [](const ScoredEntry& e) { return e.true_score; });
    auto by_pred = rank_order(items, [](const ScoredEntry& e) { return e.predicted_score; });
    std::vector<std::size_t> true_rank(items.size());
    for (std::size_t r = 0; r < by_true.size(); ++r)
        true_rank[by_true[r]] = r;
    std::vector<std::size_t> out(items.size());
    for (std::size_t p = 0; p < by_pred.size(); ++p)
        out[p] = true_rank[by_pred[p]];
    return out;
}

} // namespace detail

/// |top-delta by predicted  ∩  top-k by true| / k
inline double top_k_recall(const ScoredSet& scored, std::size_t k, std::size_t delta) {
    const std::size_t u = scored.u();
    if (k < 1 || k > u || delta < 1 || delta > u)
        throw ValidationError("top_k_recall: need 1 <= k, delta <= u");
    auto ranks = detail::true_ranks_in_predicted_order(scored);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < delta; ++i)
        hits += ranks[i] < k;
    return static_cast<double>(hits) / static_cast<double>(k);
}

/// Regression enrichment surface. cells[b][f] is the recall of the top
/// ceil(top_fractions[f]*u) true compounds within a predicted budget of
/// ceil(budget_fractions[b]*u).
struct RESGrid {
    std::vector<double> budget_fractions;
    std::vector<double> top_fractions;
    std::vector<std::vector<double>> cells;
};

/// Log-spaced fractions from 10^lo_exp to 1, `per_decade` points per decade.
inline std::vector<double> log_axis(int lo_exp = -4, int per_decade = 10) {
    std::vector<double> axis;
    const int steps = -lo_exp * per_decade;
    for (int i = 0; i <= steps; ++i)
        axis.push_back(std::pow(10.0, lo_exp + static_cast<double>(i) / per_decade));
    axis.back() = 1.0;
    return axis;
}

inline RESGrid compute_res(const ScoredSet& scored, std::vector<double> budget_fractions,
                           std::vector<double> top_fractions) {
    auto check_axis = [](const std::vector<double>& axis, const char* name) {
        for (double f : axis)
            if (!(f > 0.0 && f <= 1.0))
                throw ValidationError(std::string("compute_res: ") + name + " outside (0,1]");
        if (!std::is_sorted(axis.begin(), axis.end()))
            throw ValidationError(std::string("compute_res: ") + name + " not sorted");
    };
    check_axis(budget_fractions, "budget axis");
    check_axis(top_fractions, "top axis");
    const std::size_t u = scored.u();
    if (u == 0)
        throw ValidationError("compute_res: empty scored set");

    std::vector<std::size_t> ks, deltas;
    for (double f : top_fractions)
        ks.push_back(count_for_fraction(f, u));
    for (double b : budget_fractions)
        deltas.push_back(count_for_fraction(b, u));

    // first_k[j] counts items whose true rank is below ks[j] but not ks[j-1];
    // a prefix sum over j then gives the hit count for every k at once.
    auto ranks = detail::true_ranks_in_predicted_order(scored);
    std::vector<std::size_t> bucket(ks.size(), 0);
    RESGrid grid{budget_fractions, top_fractions, {}};
    grid.cells.assign(deltas.size(), std::vector<double>(ks.size(), 0.0));
    std::size_t next_row = 0;
    for (std::size_t i = 0; i < u && next_row < deltas.size(); ++i) {
        auto it = std::upper_bound(ks.begin(), ks.end(), ranks[i]);
        if (it != ks.end())
            ++bucket[static_cast<std::size_t>(it - ks.begin())];
        while (next_row < deltas.size() && deltas[next_row] == i + 1) {
            std::size_t hits = 0;
            for (std::size_t j = 0; j < ks.size(); ++j) {
                hits += bucket[j];
                grid.cells[next_row][j] = static_cast<double>(hits) / static_cast<double>(ks[j]);
            }
            ++next_row;
        }
    }
    return grid;
}

inline RESGrid compute_res(const ScoredSet& scored) {
    return compute_res(scored, log_axis(), log_axis());
}

} // namespace ensemble::analysis
