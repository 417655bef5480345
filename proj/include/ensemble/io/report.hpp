#pragma once

#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ensemble/io/csv.hpp"
#include "ensemble/metrics.hpp"
#include "ensemble/trace/event.hpp"

namespace ensemble {

inline const std::vector<std::string>& funnel_stage_names() {
    static const std::vector<std::string> names{"ML1", "S1", "S3CG", "S2", "S3FG"};
    return names;
}

/// Work that finished in one funnel stage: tasks that reached done, and
/// the distinct ligands or conformations those tasks were about.
struct StageCount {
    std::size_t tasks_done = 0;
    std::size_t items = 0;
};

/// Strips "<stage>." and the trailing ".<name>[.r<j>]" from a task id to
/// recover the ligand or conformation it works on.
inline std::string task_item(const std::string& task_id, const std::string& stage) {
    std::string s = task_id.substr(stage.size() + 1);
    auto dot = s.rfind('.');
    const bool replica = dot != std::string::npos && dot + 2 < s.size() && s[dot + 1] == 'r' &&
                         s.find_first_not_of("0123456789", dot + 2) == std::string::npos;
    if (replica)
        s.resize(dot);
    dot = s.rfind('.');
    return dot == std::string::npos ? s : s.substr(0, dot);
}

inline std::map<std::string, StageCount> funnel_counts(const std::vector<TraceEvent>& trace) {
    std::map<std::string, std::set<std::string>> items;
    std::map<std::string, StageCount> out;
    for (const auto& st : funnel_stage_names())
        out[st];
    for (const auto& ev : trace) {
        if (ev.entity != Entity::task || ev.transition != tr::done)
            continue;
        const auto dot = ev.id.find('.');
        if (dot == std::string::npos)
            continue;
        const std::string stage = ev.id.substr(0, dot);
        auto it = out.find(stage);
        if (it == out.end())
            continue;
        ++it->second.tasks_done;
        items[stage].insert(task_item(ev.id, stage));
    }
    for (auto& [stage, set] : items)
        out[stage].items = set.size();
    return out;
}

inline std::vector<std::pair<std::string, metrics::Throughput>> all_stage_throughput(
    const std::vector<TraceEvent>& trace, double window_s = 0.0) {
    std::vector<std::pair<std::string, metrics::Throughput>> out;
    for (const auto& st : funnel_stage_names())
        if (auto th = metrics::stage_throughput(trace, st, window_s))
            out.emplace_back(st, *th);
    return out;
}

inline double mean_node_utilization(const metrics::UtilizationSeries& s) {
    if (s.buckets.empty())
        return 0.0;
    double sum = 0.0;
    for (const auto& b : s.buckets)
        sum += b.busy_node_fraction;
    return sum / static_cast<double>(s.buckets.size());
}

/// Headline numbers of a finished run, as written to summary.json.
inline nlohmann::json run_summary(const std::vector<TraceEvent>& trace, double bucket_width_s = 0.0) {
    const auto oh = metrics::overhead(trace);
    const auto util = metrics::utilization(trace, bucket_width_s);
    nlohmann::json j;
    j["events"] = trace.size();
    j["makespan_s"] = oh.makespan_s;
    j["utilization_mean"] = mean_node_utilization(util);
    j["overhead_fraction"] = oh.fraction_of_makespan;
    j["overhead_per_task_ms"] = oh.per_task_ms;
    j["tasks_finished"] = oh.tasks;
    nlohmann::json th = nlohmann::json::object();
    for (const auto& [stage, t] : all_stage_throughput(trace))
        th[stage] = {{"overall_per_s", t.overall}, {"sustained_per_s", t.sustained}, {"completions", t.completions}};
    j["throughput"] = th;
    const auto counts = funnel_counts(trace);
    j["funnel"] = {
        {"s1_survivors", counts.at("S1").tasks_done},
        {"cg_ligands", counts.at("S3CG").items},
        {"s2_binders", counts.at("S2").items},
        {"selected_conformations", counts.at("S3FG").items},
        {"s3fg_tasks", counts.at("S3FG").tasks_done},
    };
    return j;
}

/// Flat metric,value table of the same numbers.
inline void write_metrics_csv(std::ostream& os, const nlohmann::json& summary) {
    os << "metric,value\n";
    auto num = [](const nlohmann::json& v) {
        return v.is_number_float() ? detail::csv_number(v.get<double>()) : v.dump();
    };
    for (auto key : {"makespan_s", "utilization_mean", "overhead_fraction", "overhead_per_task_ms", "tasks_finished"})
        os << key << ',' << num(summary.at(key)) << '\n';
    for (const auto& [stage, t] : summary.at("throughput").items()) {
        os << "throughput." << stage << ".overall_per_s," << num(t.at("overall_per_s")) << '\n';
        os << "throughput." << stage << ".sustained_per_s," << num(t.at("sustained_per_s")) << '\n';
    }
    for (const auto& [k, v] : summary.at("funnel").items())
        os << "funnel." << k << ',' << num(v) << '\n';
}

inline void write_overhead_json(std::ostream& os, const metrics::Overhead& o) {
    nlohmann::json j{{"makespan_s", o.makespan_s},
                     {"capacity_node_s", o.capacity_node_s},
                     {"busy_node_s", o.busy_node_s},
                     {"overhead_node_s", o.total_s},
                     {"bootstrap_node_s", o.bootstrap_s},
                     {"scheduling_node_s", o.scheduling_s},
                     {"idle_node_s", o.idle_s},
                     {"fraction_of_makespan", o.fraction_of_makespan},
                     {"per_task_ms", o.per_task_ms},
                     {"tasks", o.tasks},
                     {"utilization", o.utilization}};
    os << j.dump(2) << '\n';
}

} // namespace ensemble
