#pragma once

#include <algorithm>
#include <climits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ensemble/campaign/hooks.hpp"
#include "ensemble/campaign/types.hpp"
#include "ensemble/campaign/validate.hpp"
#include "ensemble/error.hpp"

namespace ensemble {

enum class TaskState { pending, scheduled, running, done, failed, canceled };

inline const char* to_string(TaskState s) {
    switch (s) {
    case TaskState::pending: return "pending";
    case TaskState::scheduled: return "scheduled";
    case TaskState::running: return "running";
    case TaskState::done: return "done";
    case TaskState::failed: return "failed";
    case TaskState::canceled: return "canceled";
    }
    return "?";
}

inline bool is_terminal(TaskState s) {
    return s == TaskState::done || s == TaskState::failed || s == TaskState::canceled;
}

enum class PipelineStatus { active, done, failed, canceled };

inline const char* to_string(PipelineStatus s) {
    switch (s) {
    case PipelineStatus::active: return "running";
    case PipelineStatus::done: return "done";
    case PipelineStatus::failed: return "failed";
    case PipelineStatus::canceled: return "canceled";
    }
    return "?";
}

enum class Outcome { done, failed };

struct CompletionEvent {
    enum class Kind { none, stage_advanced, pipeline_done, pipeline_failed };

    Kind kind = Kind::none;
    /// Stages finished by this completion, in order. Usually one; more
    /// when a hook empties the following stage.
    std::vector<std::size_t> finished_stages;
    /// Tasks moved to canceled because the pipeline failed.
    std::vector<std::string> canceled;
    /// Number of tasks placed in the new current stage.
    std::size_t materialized = 0;
    std::string reason;
};

/// Runtime progress of one pipeline. Stages run strictly in order; tasks
/// of a stage run in any order. Not thread-safe: one owner mutates it.
class PipelineState {
public:
    explicit PipelineState(PipelineSpec spec, std::optional<PilotSpec> pilot = std::nullopt)
        : spec_(std::move(spec)), pilot_(pilot) {
        for (std::size_t s = 0; s < spec_.stages.size(); ++s)
            index_stage(s);
        if (spec_.stages.empty())
            status_ = PipelineStatus::done;
    }

    const PipelineSpec& spec() const noexcept { return spec_; }
    const std::string& id() const noexcept { return spec_.pipeline_id; }
    std::size_t current_stage_index() const noexcept { return current_; }
    PipelineStatus status() const noexcept { return status_; }
    bool finished() const noexcept { return status_ != PipelineStatus::active; }

    /// State of every known task, by id.
    std::map<std::string, TaskState> task_states() const {
        std::map<std::string, TaskState> out;
        for (std::size_t s = 0; s < spec_.stages.size(); ++s)
            for (std::size_t i = 0; i < st_[s].size(); ++i)
                out.emplace(spec_.stages[s].tasks[i].task_id, st_[s][i]);
        return out;
    }

    /// Results of tasks that finished (done or failed), by id.
    std::map<std::string, std::string> outputs() const {
        std::map<std::string, std::string> out;
        for (std::size_t s = 0; s < spec_.stages.size(); ++s)
            for (std::size_t i = 0; i < st_[s].size(); ++i)
                if (st_[s][i] == TaskState::done || st_[s][i] == TaskState::failed)
                    out.emplace(spec_.stages[s].tasks[i].task_id, out_[s][i]);
        return out;
    }

    const std::string& output(const std::string& id) const { return slot(id, out_); }

    TaskState task_state(const std::string& id) const { return slot(id, st_); }

    const TaskDescriptor& task(const std::string& id) const {
        auto it = where_.find(id);
        if (it == where_.end())
            throw StateMachineError("unknown task '" + id + "'");
        return spec_.stages[it->second.first].tasks[it->second.second];
    }

    bool has_task(const std::string& id) const { return where_.count(id) != 0; }

    std::size_t stage_of(const std::string& id) const {
        auto it = where_.find(id);
        if (it == where_.end())
            throw StateMachineError("unknown task '" + id + "'");
        return it->second.first;
    }

    /// Pending tasks of the current stage, in declaration order.
    std::vector<std::string> next_ready_tasks() const {
        std::vector<std::string> out;
        if (finished())
            return out;
        const auto& tasks = spec_.stages[current_].tasks;
        for (std::size_t i = 0; i < tasks.size(); ++i)
            if (st_[current_][i] == TaskState::pending)
                out.push_back(tasks[i].task_id);
        return out;
    }

    void mark_scheduled(const std::string& id) { move(id, TaskState::pending, TaskState::scheduled); }
    void mark_running(const std::string& id) { move(id, TaskState::scheduled, TaskState::running); }
    /// Puts a task whose executor died back in the queue.
    void requeue(const std::string& id) { move(id, TaskState::running, TaskState::pending); }
    /// Returns a scheduled task to pending (its placement was undone).
    void unschedule(const std::string& id) { move(id, TaskState::scheduled, TaskState::pending); }

    CompletionEvent on_task_complete(const std::string& id, Outcome outcome, std::string result) {
        const TaskState now = task_state(id);
        if (is_terminal(now))
            throw StateMachineError("task '" + id + "' already reached " + to_string(now));
        if (now != TaskState::running)
            throw OrderingError("task '" + id + "' completed while " + to_string(now));
        if (stage_of(id) != current_)
            throw OrderingError("task '" + id + "' is not in the current stage");

        slot(id, st_) = outcome == Outcome::done ? TaskState::done : TaskState::failed;
        slot(id, out_) = std::move(result);
        if (outcome == Outcome::done)
            ++done_in_current_;

        CompletionEvent ev;
        if (finished())
            return ev;
        if (outcome == Outcome::failed)
            return fail("task '" + id + "' failed");
        if (!stage_complete(current_))
            return ev;
        return advance();
    }

    /// Replaces the task list of a stage that has not started yet. Returns
    /// the violations found; on any violation the state is left unchanged.
    std::vector<Violation> resize_stage(std::size_t stage_index, std::vector<TaskDescriptor> tasks) {
        if (stage_index >= spec_.stages.size())
            throw OrderingError("stage " + std::to_string(stage_index) + " does not exist");
        if (stage_index <= current_ || finished())
            throw OrderingError("stage " + std::to_string(stage_index) + " already started");
        PipelineSpec candidate = spec_;
        candidate.stages[stage_index].tasks = std::move(tasks);
        std::vector<Violation> out;
        std::unordered_set<std::string> seen;
        validate_pipeline(candidate, pilot_.value_or(PilotSpec{INT_MAX, INT_MAX, INT_MAX}), seen, out);
        if (!out.empty())
            return out;
        unindex_stage(stage_index);
        spec_.stages[stage_index].tasks = std::move(candidate.stages[stage_index].tasks);
        index_stage(stage_index);
        return out;
    }

    /// Cancels every non-terminal task (walltime expiry). Returns their ids.
    std::vector<std::string> cancel() {
        std::vector<std::string> out;
        for_each_task([&](const std::string& id, TaskState& st) {
            if (!is_terminal(st)) {
                st = TaskState::canceled;
                out.push_back(id);
            }
        });
        if (!finished())
            status_ = PipelineStatus::canceled;
        return out;
    }

    friend bool operator==(const PipelineState& a, const PipelineState& b) {
        return a.current_ == b.current_ && a.status_ == b.status_ && a.task_states() == b.task_states() &&
               a.outputs() == b.outputs();
    }

private:
    template <typename T>
    T& slot(const std::string& id, std::vector<std::vector<T>>& v) {
        auto it = where_.find(id);
        if (it == where_.end())
            throw StateMachineError("unknown task '" + id + "'");
        return v[it->second.first][it->second.second];
    }

    template <typename T>
    const T& slot(const std::string& id, const std::vector<std::vector<T>>& v) const {
        auto it = where_.find(id);
        if (it == where_.end())
            throw StateMachineError("unknown task '" + id + "'");
        return v[it->second.first][it->second.second];
    }

    template <typename F>
    void for_each_task(F&& f) {
        for (std::size_t s = 0; s < spec_.stages.size(); ++s)
            for (std::size_t i = 0; i < st_[s].size(); ++i)
                f(spec_.stages[s].tasks[i].task_id, st_[s][i]);
    }

    void index_stage(std::size_t s) {
        if (st_.size() < spec_.stages.size()) {
            st_.resize(spec_.stages.size());
            out_.resize(spec_.stages.size());
        }
        const auto& tasks = spec_.stages[s].tasks;
        st_[s].assign(tasks.size(), TaskState::pending);
        out_[s].assign(tasks.size(), std::string());
        for (std::size_t i = 0; i < tasks.size(); ++i)
            where_[tasks[i].task_id] = {s, i};
    }

    void unindex_stage(std::size_t s) {
        for (const auto& t : spec_.stages[s].tasks)
            where_.erase(t.task_id);
        st_[s].clear();
        out_[s].clear();
    }

    void move(const std::string& id, TaskState from, TaskState to) {
        const TaskState now = task_state(id);
        if (now != from)
            throw OrderingError("task '" + id + "' cannot go " + to_string(now) + " -> " + to_string(to));
        if (stage_of(id) != current_ || finished())
            throw OrderingError("task '" + id + "' is not in the active stage");
        slot(id, st_) = to;
    }

    bool stage_complete(std::size_t s) const { return done_in_current_ == spec_.stages[s].tasks.size(); }

    CompletionEvent fail(std::string reason) {
        CompletionEvent ev;
        ev.kind = CompletionEvent::Kind::pipeline_failed;
        ev.reason = std::move(reason);
        status_ = PipelineStatus::failed;
        for_each_task([&](const std::string& id, TaskState& st) {
            if (st == TaskState::pending || st == TaskState::scheduled) {
                st = TaskState::canceled;
                ev.canceled.push_back(id);
            }
        });
        return ev;
    }

    CompletionEvent advance() {
        CompletionEvent ev;
        while (true) {
            ev.finished_stages.push_back(current_);
            if (current_ + 1 == spec_.stages.size()) {
                status_ = PipelineStatus::done;
                ev.kind = CompletionEvent::Kind::pipeline_done;
                return ev;
            }
            const auto& stage = spec_.stages[current_];
            if (stage.post_hook) {
                std::vector<TaskOutput> outs;
                for (std::size_t i = 0; i < stage.tasks.size(); ++i)
                    outs.push_back({stage.tasks[i].task_id, out_[current_][i]});
                std::sort(outs.begin(), outs.end(),
                          [](const TaskOutput& a, const TaskOutput& b) { return a.task_id < b.task_id; });
                std::vector<TaskDescriptor> next;
                try {
                    auto selected = apply_hook(*stage.post_hook, outs);
                    next = materialize(spec_.stages[current_ + 1], *stage.post_hook, selected);
                } catch (const Error& e) {
                    auto f = fail("post hook of stage '" + stage.stage_id + "': " + e.what());
                    f.finished_stages = std::move(ev.finished_stages);
                    return f;
                }
                unindex_stage(current_ + 1);
                for (const auto& t : next)
                    if (where_.count(t.task_id)) {
                        auto f = fail("materialized duplicate task id '" + t.task_id + "'");
                        f.finished_stages = std::move(ev.finished_stages);
                        return f;
                    }
                spec_.stages[current_ + 1].tasks = std::move(next);
                index_stage(current_ + 1);
            }
            ++current_;
            done_in_current_ = 0;
            if (!spec_.stages[current_].tasks.empty()) {
                ev.kind = CompletionEvent::Kind::stage_advanced;
                ev.materialized = spec_.stages[current_].tasks.size();
                return ev;
            }
        }
    }

    PipelineSpec spec_;
    std::optional<PilotSpec> pilot_;
    std::size_t current_ = 0;
    std::size_t done_in_current_ = 0;
    PipelineStatus status_ = PipelineStatus::active;
    std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> where_;
    std::vector<std::vector<TaskState>> st_;
    std::vector<std::vector<std::string>> out_;
};

} // namespace ensemble
