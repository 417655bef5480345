#pragma once

#include <string>
#include <unordered_set>
#include <vector>

#include "ensemble/campaign/types.hpp"

namespace ensemble {

struct Violation {
    enum class Code {
        duplicate_id,
        zero_resources,
        bad_node_count,
        multi_node_function,
        empty_stage,
        exceeds_pilot,
        bad_pilot,
        bad_hook,
        bad_campaign,
    };

    Code code;
    std::string subject;
    std::string message;
};

namespace detail {

inline void check_shape(std::vector<Violation>& out, const std::string& subject, TaskKind kind,
                        int cpus, int gpus, int nodes, const PilotSpec& pilot) {
    using C = Violation::Code;
    if (cpus < 0 || gpus < 0 || cpus + gpus <= 0)
        out.push_back({C::zero_resources, subject, "task '" + subject + "' requests no cpus or gpus"});
    if (nodes < 1)
        out.push_back({C::bad_node_count, subject, "task '" + subject + "' needs nodes >= 1"});
    if (nodes > 1 && kind != TaskKind::executable)
        out.push_back({C::multi_node_function, subject,
                       "task '" + subject + "' spans " + std::to_string(nodes) +
                           " nodes but only executables may be multi-node"});
    Demand d = make_demand(cpus, gpus, nodes);
    if (!fits_empty_pilot(d, pilot))
        out.push_back({C::exceeds_pilot, subject,
                       "task '" + subject + "' needs " + std::to_string(d.nodes) + " node(s) x (" +
                           std::to_string(d.cpus) + " cpus, " + std::to_string(d.gpus) +
                           " gpus) but the pilot offers " + std::to_string(pilot.nodes) + " x (" +
                           std::to_string(pilot.cpus_per_node) + " cpus, " +
                           std::to_string(pilot.gpus_per_node) + " gpus)"});
}

inline void check_hook(std::vector<Violation>& out, const std::string& subject, const PostHook& h,
                       const PilotSpec& pilot) {
    using C = Violation::Code;
    if (h.kind == HookKind::select_top_fraction && !(h.fraction > 0.0 && h.fraction <= 1.0))
        out.push_back({C::bad_hook, subject, "stage '" + subject + "': fraction must be in (0, 1]"});
    if (h.kind == HookKind::lof_outliers && h.k_neighbors < 1)
        out.push_back({C::bad_hook, subject, "stage '" + subject + "': k_neighbors must be >= 1"});
    for (const auto& tpl : h.spawn) {
        if (tpl.replicas < 1)
            out.push_back({C::bad_hook, subject,
                           "stage '" + subject + "': template '" + tpl.name + "' needs replicas >= 1"});
        check_shape(out, subject + "/" + tpl.name, tpl.kind, tpl.cpus, tpl.gpus, tpl.nodes, pilot);
    }
}

} // namespace detail

/// Validates stage shape, ids and capacity of one pipeline; `seen` carries
/// task ids across pipelines of a campaign.
inline void validate_pipeline(const PipelineSpec& p, const PilotSpec& pilot,
                              std::unordered_set<std::string>& seen, std::vector<Violation>& out) {
    using C = Violation::Code;
    if (p.stages.empty())
        out.push_back({C::empty_stage, p.pipeline_id, "pipeline '" + p.pipeline_id + "' has no stages"});
    for (std::size_t s = 0; s < p.stages.size(); ++s) {
        const auto& stage = p.stages[s];
        const bool filled_by_hook = s > 0 && p.stages[s - 1].post_hook && !p.stages[s - 1].post_hook->spawn.empty();
        if (stage.tasks.empty() && !filled_by_hook)
            out.push_back({C::empty_stage, stage.stage_id,
                           "stage '" + stage.stage_id + "' of pipeline '" + p.pipeline_id + "' has no tasks"});
        for (const auto& t : stage.tasks) {
            if (!seen.insert(t.task_id).second)
                out.push_back({C::duplicate_id, t.task_id, "duplicate task id '" + t.task_id + "'"});
            detail::check_shape(out, t.task_id, t.kind, t.cpus, t.gpus, t.nodes, pilot);
        }
        if (stage.post_hook)
            detail::check_hook(out, stage.stage_id, *stage.post_hook, pilot);
    }
}

/// Every invariant violation of `spec`; an empty list means valid.
inline std::vector<Violation> validate_campaign(const CampaignSpec& spec) {
    using C = Violation::Code;
    std::vector<Violation> out;
    for (auto& msg : pilot_violations(spec.resource))
        out.push_back({C::bad_pilot, "resource", msg});
    if (!(spec.time_scale > 0.0))
        out.push_back({C::bad_campaign, "time_scale", "time_scale must be positive"});
    if (spec.mode != spec.resource.backend)
        out.push_back({C::bad_campaign, "mode", "campaign mode and pilot backend disagree"});
    std::unordered_set<std::string> pipeline_ids;
    std::unordered_set<std::string> task_ids;
    for (const auto& p : spec.pipelines) {
        if (!pipeline_ids.insert(p.pipeline_id).second)
            out.push_back({C::duplicate_id, p.pipeline_id, "duplicate pipeline id '" + p.pipeline_id + "'"});
        validate_pipeline(p, spec.resource, task_ids, out);
    }
    return out;
}

} // namespace ensemble
