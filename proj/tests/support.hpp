#pragma once

#include <string>
#include <vector>

#include "ensemble/campaign/types.hpp"
#include "ensemble/pilot/spec.hpp"

namespace ensemble::test {

inline TaskDescriptor fixed_task(std::string id, double seconds, int cpus = 1, int gpus = 0, int nodes = 1) {
    TaskDescriptor t;
    t.task_id = std::move(id);
    t.kind = TaskKind::simulated;
    t.stage_tag = StageTag::other("test");
    t.cpus = cpus;
    t.gpus = gpus;
    t.nodes = nodes;
    t.duration = DurationModel::fixed_seconds(seconds);
    return t;
}

inline std::vector<TaskDescriptor> fixed_tasks(const std::string& prefix, std::size_t n, double seconds, int cpus = 1,
                                               int gpus = 0) {
    std::vector<TaskDescriptor> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        out.push_back(fixed_task(prefix + std::to_string(i), seconds, cpus, gpus));
    return out;
}

inline PilotSpec pilot(int nodes, int cpus, int gpus, double walltime = 1e9) {
    PilotSpec p;
    p.nodes = nodes;
    p.cpus_per_node = cpus;
    p.gpus_per_node = gpus;
    p.walltime_s = walltime;
    return p;
}

inline CampaignSpec campaign(std::vector<PipelineSpec> pipelines, PilotSpec resource, std::uint64_t seed = 1) {
    CampaignSpec c;
    c.pipelines = std::move(pipelines);
    c.resource = resource;
    c.mode = resource.backend;
    c.seed = seed;
    c.time_scale = 1.0;
    return c;
}

} // namespace ensemble::test
