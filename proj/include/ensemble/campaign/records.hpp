#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "ensemble/error.hpp"

namespace ensemble {

/// A scored entity carried between stages inside task outputs and
/// payloads. Text form, one per line:
///   id,score[,group[,x1,x2,...]]
struct ScoredItem {
    std::string id;
    double score = 0.0;
    std::string group;
    std::vector<double> coords;
};

inline void append_number(std::string& out, double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

inline std::string encode_item(const ScoredItem& item) {
    std::string out = item.id;
    out += ',';
    append_number(out, item.score);
    if (!item.group.empty() || !item.coords.empty()) {
        out += ',';
        out += item.group;
        for (double c : item.coords) {
            out += ',';
            append_number(out, c);
        }
    }
    return out;
}

inline std::string encode_items(const std::vector<ScoredItem>& items) {
    std::string out;
    for (const auto& it : items) {
        out += encode_item(it);
        out += '\n';
    }
    return out;
}

inline double parse_double(std::string_view s, std::size_t line) {
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw InputError("bad number '" + std::string(s) + "'", line);
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

/// Parses every non-empty line of `text`; throws InputError on the first
/// malformed line.
inline std::vector<ScoredItem> decode_items(std::string_view text) {
    std::vector<ScoredItem> items;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.remove_suffix(1);
        if (line.empty())
            continue;
        auto fields = split(line, ',');
        if (fields.size() < 2 || fields[0].empty())
            throw InputError("record needs at least 'id,score'", line_no);
        ScoredItem item;
        item.id = std::string(fields[0]);
        item.score = parse_double(fields[1], line_no);
        if (fields.size() > 2)
            item.group = std::string(fields[2]);
        for (std::size_t i = 3; i < fields.size(); ++i)
            item.coords.push_back(parse_double(fields[i], line_no));
        items.push_back(std::move(item));
    }
    return items;
}

} // namespace ensemble
