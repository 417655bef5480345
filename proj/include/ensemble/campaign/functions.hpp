#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>

#include "ensemble/campaign/types.hpp"
#include "ensemble/error.hpp"

namespace ensemble {

struct TaskContext {
    std::uint64_t seed = 0;
};

/// In-process body of a task. Returns the task's output text; throwing
/// marks the task failed.
using TaskFunction = std::function<std::string(const TaskDescriptor&, const TaskContext&)>;

/// Named task bodies, looked up through TaskDescriptor::entrypoint.
class TaskFunctions {
public:
    void add(std::string name, TaskFunction fn) { fns_[std::move(name)] = std::move(fn); }

    bool contains(const std::string& name) const { return fns_.count(name) != 0; }

    const TaskFunction* find(const std::string& name) const {
        auto it = fns_.find(name);
        return it == fns_.end() ? nullptr : &it->second;
    }

    /// Output of `task`: the registered function's result, or the empty
    /// string when the entrypoint names nothing registered.
    std::string run(const TaskDescriptor& task, const TaskContext& ctx) const {
        const TaskFunction* fn = find(task.entrypoint);
        return fn ? (*fn)(task, ctx) : std::string();
    }

    std::size_t size() const noexcept { return fns_.size(); }

private:
    std::map<std::string, TaskFunction> fns_;
};

} // namespace ensemble
