#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "ensemble/analysis/enrichment.hpp"
#include "ensemble/error.hpp"

namespace ensemble {

/// The k best (lowest) items by `score(item)`, best first; equal scores are
/// ordered by id. k >= size returns every item, ordered.
template <typename T, typename Score>
std::vector<T> select_top_k(std::vector<T> items, std::size_t k, Score score) {
    std::sort(items.begin(), items.end(), [&](const T& a, const T& b) {
        double sa = score(a), sb = score(b);
        if (sa != sb)
            return sa < sb;
        return a.id < b.id;
    });
    if (k < items.size())
        items.resize(k);
    return items;
}

/// ceil(fraction * n) best items.
template <typename T, typename Score>
std::vector<T> select_top_fraction(std::vector<T> items, double fraction, Score score) {
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ValidationError("select_top_fraction: fraction must be in (0, 1]");
    const std::size_t k = analysis::count_for_fraction(fraction, items.size());
    return select_top_k(std::move(items), k, score);
}

template <typename T>
std::vector<T> select_top_k(std::vector<T> items, std::size_t k) {
    return select_top_k(std::move(items), k, [](const T& t) { return t.score; });
}

template <typename T>
std::vector<T> select_top_fraction(std::vector<T> items, double fraction) {
    return select_top_fraction(std::move(items), fraction, [](const T& t) { return t.score; });
}

} // namespace ensemble
