#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ensemble/error.hpp"
#include "ensemble/trace/event.hpp"
#include "ensemble/trace/sink.hpp"

namespace ensemble {

// One event per line, keys in this fixed order:
//   {"t":float,"entity":str,"id":str,"transition":str,"nodes":int,"cpus":int,"gpus":int}
// Numbers use the shortest round-trip representation, so equal traces
// serialize to equal bytes.
inline std::string to_jsonl_line(const TraceEvent& ev) {
    std::string out = "{\"t\":";
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, ev.t);
    std::string_view num(buf, static_cast<std::size_t>(r.ptr - buf));
    out += num;
    if (num.find_first_of(".eEn") == std::string_view::npos)
        out += ".0";
    out += ",\"entity\":\"";
    out += to_string(ev.entity);
    out += "\",\"id\":";
    out += nlohmann::json(ev.id).dump();
    out += ",\"transition\":";
    out += nlohmann::json(ev.transition).dump();
    out += ",\"nodes\":" + std::to_string(ev.res.nodes);
    out += ",\"cpus\":" + std::to_string(ev.res.cpus);
    out += ",\"gpus\":" + std::to_string(ev.res.gpus);
    out += '}';
    return out;
}

inline void write_jsonl(std::ostream& os, const std::vector<TraceEvent>& events) {
    for (const auto& ev : events)
        os << to_jsonl_line(ev) << '\n';
}

inline TraceEvent parse_jsonl_line(const std::string& line, std::size_t line_no) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("corrupt trace line: ") + e.what(), line_no);
    }
    try {
        if (!j.is_object())
            throw InputError("trace line is not an object", line_no);
        TraceEvent ev;
        ev.t = j.at("t").get<double>();
        auto ent = parse_entity(j.at("entity").get<std::string>());
        if (!ent)
            throw InputError("unknown entity '" + j.at("entity").get<std::string>() + "'", line_no);
        ev.entity = *ent;
        ev.id = j.at("id").get<std::string>();
        ev.transition = j.at("transition").get<std::string>();
        ev.res.nodes = j.value("nodes", 0);
        ev.res.cpus = j.value("cpus", 0);
        ev.res.gpus = j.value("gpus", 0);
        return ev;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("bad trace event: ") + e.what(), line_no);
    }
}

/// Reads a JSONL trace. With `check_transitions` every event is also run
/// through the legal state graph; violations raise InputError with the
/// offending line number.
inline std::vector<TraceEvent> read_jsonl(std::istream& is, bool check_transitions = true) {
    std::vector<TraceEvent> events;
    TransitionChecker checker;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos)
            continue;
        auto ev = parse_jsonl_line(line, line_no);
        if (check_transitions) {
            auto problem = checker.check(ev);
            if (!problem.empty())
                throw InputError(problem, line_no);
        }
        events.push_back(std::move(ev));
    }
    return events;
}

} // namespace ensemble
