#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "ensemble/analysis/enrichment.hpp"
#include "ensemble/analysis/point_set.hpp"
#include "ensemble/campaign/records.hpp"
#include "ensemble/error.hpp"
#include "ensemble/metrics.hpp"

namespace ensemble {

namespace detail {

inline bool looks_numeric(std::string_view s) {
    while (!s.empty() && s.front() == ' ')
        s.remove_prefix(1);
    if (s.empty())
        return false;
    const char c = s.front();
    return (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
}

inline std::string csv_number(double v) {
    std::string s;
    append_number(s, v);
    return s;
}

} // namespace detail

/// One point per row, comma-separated coordinates. A first row that does
/// not start with a number is taken as a header. Every row must have the
/// same number of columns.
inline analysis::PointSet read_point_set_csv(std::istream& is) {
    std::vector<double> coords;
    std::size_t dim = 0, line_no = 0;
    bool first = true;
    std::string line;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        const auto cells = split(line, ',');
        if (first) {
            first = false;
            if (!detail::looks_numeric(cells.front()))
                continue;
        }
        if (dim == 0)
            dim = cells.size();
        else if (cells.size() != dim)
            throw InputError("expected " + std::to_string(dim) + " columns, found " + std::to_string(cells.size()),
                             line_no);
        for (auto c : cells) {
            const double v = parse_double(c, line_no);
            if (!std::isfinite(v))
                throw InputError("non-finite coordinate", line_no);
            coords.push_back(v);
        }
    }
    if (dim == 0)
        throw InputError("point set file has no rows");
    return analysis::PointSet(dim, std::move(coords));
}

inline void write_point_set_csv(std::ostream& os, const analysis::PointSet& ps) {
    for (std::size_t d = 0; d < ps.dim(); ++d)
        os << (d ? ",x" : "x") << d;
    os << '\n';
    for (std::size_t i = 0; i < ps.size(); ++i) {
        auto p = ps[i];
        for (std::size_t d = 0; d < p.size(); ++d)
            os << (d ? "," : "") << detail::csv_number(p[d]);
        os << '\n';
    }
}

/// Matrix with budget fractions down the rows and top fractions across.
inline void write_res_csv(std::ostream& os, const analysis::RESGrid& g) {
    os << "budget_fraction";
    for (double f : g.top_fractions)
        os << ",top_" << detail::csv_number(f);
    os << '\n';
    for (std::size_t b = 0; b < g.budget_fractions.size(); ++b) {
        os << detail::csv_number(g.budget_fractions[b]);
        for (double c : g.cells[b])
            os << ',' << detail::csv_number(c);
        os << '\n';
    }
}

inline void write_lof_csv(std::ostream& os, const std::vector<double>& scores) {
    os << "index,lof\n";
    for (std::size_t i = 0; i < scores.size(); ++i)
        os << i << ',' << detail::csv_number(scores[i]) << '\n';
}

inline void write_utilization_csv(std::ostream& os, const metrics::UtilizationSeries& s) {
    os << "t0,busy_node_fraction,busy_cpu_fraction,busy_gpu_fraction\n";
    for (const auto& b : s.buckets)
        os << detail::csv_number(b.t0) << ',' << detail::csv_number(b.busy_node_fraction) << ','
           << detail::csv_number(b.busy_cpu_fraction) << ',' << detail::csv_number(b.busy_gpu_fraction) << '\n';
}

/// Rows of (stage, window start, completions per second).
inline void write_throughput_csv(std::ostream& os,
                                 const std::vector<std::pair<std::string, metrics::Throughput>>& stages) {
    os << "stage,window_start,rate\n";
    for (const auto& [stage, th] : stages)
        for (const auto& [t, rate] : th.windows)
            os << stage << ',' << detail::csv_number(t) << ',' << detail::csv_number(rate) << '\n';
}

} // namespace ensemble
