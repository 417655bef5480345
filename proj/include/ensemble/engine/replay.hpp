#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ensemble/campaign/functions.hpp"
#include "ensemble/campaign/state.hpp"
#include "ensemble/campaign/types.hpp"
#include "ensemble/error.hpp"
#include "ensemble/trace/event.hpp"

namespace ensemble {

/// Supplies the result of a task that the trace reports as done. Traces
/// carry no payloads, so outputs are regenerated (deterministic functions)
/// or looked up from a side record.
using OutputSource = std::function<std::string(const TaskDescriptor&)>;

/// Drives fresh pipeline states through the task transitions of a trace
/// and returns the states it ends in. Pipelines that are still active when
/// the pilot is released were cut off by the walltime and are canceled.
inline std::vector<PipelineState> replay_trace(const CampaignSpec& spec, const std::vector<TraceEvent>& trace,
                                               const OutputSource& output) {
    std::vector<PipelineState> states;
    states.reserve(spec.pipelines.size());
    for (const auto& p : spec.pipelines)
        states.emplace_back(p, spec.resource);

    std::unordered_map<std::string, std::size_t> owner;
    auto find_owner = [&](const std::string& id, std::size_t line) -> std::size_t {
        auto it = owner.find(id);
        if (it != owner.end())
            return it->second;
        for (std::size_t i = 0; i < states.size(); ++i)
            if (states[i].has_task(id))
                return owner[id] = i;
        throw TraceError("replay: event " + std::to_string(line) + " names unknown task '" + id + "'");
    };

    bool released = false;
    for (std::size_t n = 0; n < trace.size(); ++n) {
        const TraceEvent& ev = trace[n];
        if (ev.entity == Entity::pilot && ev.transition == tr::released)
            released = true;
        if (ev.entity != Entity::task)
            continue;
        auto& st = states[find_owner(ev.id, n + 1)];
        const TaskState now = st.task_state(ev.id);
        if (ev.transition == tr::pending) {
            if (now == TaskState::running)
                st.requeue(ev.id);
        } else if (ev.transition == tr::scheduled) {
            st.mark_scheduled(ev.id);
        } else if (ev.transition == tr::running) {
            st.mark_running(ev.id);
        } else if (ev.transition == tr::done) {
            st.on_task_complete(ev.id, Outcome::done, output(st.task(ev.id)));
        } else if (ev.transition == tr::failed) {
            st.on_task_complete(ev.id, Outcome::failed, {});
        } else if (ev.transition == tr::canceled) {
            // A fail-fast cancel has already happened inside the state; any
            // other cancel is the walltime stopping the whole pilot.
            if (!is_terminal(now))
                for (auto& s : states)
                    s.cancel();
        }
    }
    if (released)
        for (auto& s : states)
            if (!s.finished())
                s.cancel();
    return states;
}

inline std::vector<PipelineState> replay_trace(const CampaignSpec& spec, const std::vector<TraceEvent>& trace,
                                               const TaskFunctions* functions) {
    return replay_trace(spec, trace, [&](const TaskDescriptor& t) {
        return functions ? functions->run(t, TaskContext{spec.seed}) : std::string();
    });
}

} // namespace ensemble
