#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ensemble/analysis/lof.hpp"
#include "ensemble/campaign/records.hpp"
#include "ensemble/campaign/types.hpp"
#include "ensemble/workload/selection.hpp"

namespace ensemble {

/// Output of one finished task, as handed to a post hook.
struct TaskOutput {
    std::string task_id;
    std::string data;
};

/// Collapses records sharing an id into one (mean score, first group and
/// coordinates) and returns them ordered by id. Replicas of the same
/// ligand report under the ligand's id.
inline std::vector<ScoredItem> merge_by_id(std::vector<ScoredItem> items) {
    std::map<std::string, std::pair<ScoredItem, std::size_t>> acc;
    for (auto& it : items) {
        auto [pos, fresh] = acc.try_emplace(it.id, it, 1);
        if (!fresh) {
            pos->second.first.score += it.score;
            ++pos->second.second;
        }
    }
    std::vector<ScoredItem> out;
    out.reserve(acc.size());
    for (auto& [id, entry] : acc) {
        entry.first.score /= static_cast<double>(entry.second);
        out.push_back(std::move(entry.first));
    }
    return out;
}

namespace detail {

inline std::vector<ScoredItem> lof_select(const std::vector<ScoredItem>& items, const PostHook& hook) {
    std::map<std::string, std::vector<const ScoredItem*>> groups;
    for (const auto& it : items)
        groups[it.group].push_back(&it);

    std::vector<ScoredItem> out;
    for (const auto& [group, members] : groups) {
        const std::size_t n = members.size();
        const std::size_t keep = std::min(hook.per_group, n);
        if (keep == 0)
            continue;
        if (n == 1) {
            out.push_back(*members.front());
            continue;
        }
        analysis::PointSet points;
        for (const auto* m : members) {
            if (m->coords.empty())
                throw InputError("lof_outliers: record '" + m->id + "' carries no coordinates");
            points.push_back(m->coords);
        }
        auto scores = analysis::lof(points, std::min(hook.k_neighbors, n - 1));
        for (std::size_t idx : analysis::select_outliers(scores, keep))
            out.push_back(*members[idx]);
    }
    return out;
}

} // namespace detail

/// Applies `hook` to the outputs of a finished stage. `outputs` must be
/// ordered by task id. Throws InputError when an output cannot be parsed.
inline std::vector<ScoredItem> apply_hook(const PostHook& hook, const std::vector<TaskOutput>& outputs) {
    std::vector<ScoredItem> items;
    for (const auto& o : outputs) {
        auto parsed = decode_items(o.data);
        items.insert(items.end(), std::make_move_iterator(parsed.begin()),
                     std::make_move_iterator(parsed.end()));
    }
    switch (hook.kind) {
    case HookKind::identity: return items;
    case HookKind::select_top_fraction:
        return select_top_fraction(merge_by_id(std::move(items)), hook.fraction);
    case HookKind::select_top_k: return select_top_k(merge_by_id(std::move(items)), hook.k);
    case HookKind::lof_outliers: return detail::lof_select(items, hook);
    }
    return items;
}

/// Builds the next stage's task list from the records a hook selected.
inline std::vector<TaskDescriptor> materialize(const StageSpec& next, const PostHook& hook,
                                               const std::vector<ScoredItem>& selected) {
    if (hook.spawn.empty()) {
        std::string records = encode_items(selected);
        std::vector<TaskDescriptor> tasks = next.tasks;
        for (auto& t : tasks)
            t.payload += records;
        return tasks;
    }
    std::vector<TaskDescriptor> tasks;
    for (const auto& item : selected) {
        std::string payload = encode_item(item) + "\n";
        for (const auto& tpl : hook.spawn) {
            for (int r = 0; r < tpl.replicas; ++r) {
                TaskDescriptor t;
                t.task_id = next.stage_id + "." + item.id + "." + tpl.name;
                if (tpl.replicas > 1)
                    t.task_id += ".r" + std::to_string(r);
                t.kind = tpl.kind;
                t.stage_tag = tpl.stage_tag;
                t.cpus = tpl.cpus;
                t.gpus = tpl.gpus;
                t.nodes = tpl.nodes;
                t.duration = tpl.duration;
                t.entrypoint = tpl.entrypoint;
                t.payload = payload;
                tasks.push_back(std::move(t));
            }
        }
    }
    return tasks;
}

} // namespace ensemble
