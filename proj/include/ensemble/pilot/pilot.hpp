#pragma once

#include <span>
#include <string>
#include <thread>

#include "ensemble/error.hpp"
#include "ensemble/pilot/slots.hpp"
#include "ensemble/pilot/spec.hpp"

namespace ensemble {

/// A resource block acquired once. Owns the slot map; tasks are placed
/// and released without going back to any batch system.
class Pilot {
public:
    Pilot(PilotSpec spec, std::string id = "pilot.0", bool gpu_host_cpu = true)
        : id_(std::move(id)), slots_(spec), gpu_host_cpu_(gpu_host_cpu) {}

    const std::string& id() const noexcept { return id_; }
    const PilotSpec& spec() const noexcept { return slots_.spec(); }
    const SlotMap& slots() const noexcept { return slots_; }
    SlotMap& slots() noexcept { return slots_; }
    bool gpu_host_cpu() const noexcept { return gpu_host_cpu_; }

    ScheduleResult schedule(std::span<const TaskDescriptor> ready, double now = 0.0) {
        return ensemble::schedule(ready, slots_, now, gpu_host_cpu_);
    }

    void release(const Placement& p) { slots_.release(p.task_id); }
    void release(const std::string& task_id) { slots_.release(task_id); }

private:
    std::string id_;
    SlotMap slots_;
    bool gpu_host_cpu_;
};

struct AcquireOptions {
    std::string id = "pilot.0";
    bool gpu_host_cpu = true;
    /// Cores the local backend may bind; 0 means the host's hardware
    /// concurrency.
    unsigned host_cores = 0;
};

/// Validates `spec` and returns a pilot with every slot free. The local
/// backend models nodes as disjoint groups of the host's cores and fails
/// with CapacityError when the host is too small. GPU slots are virtual
/// on the local backend.
inline Pilot acquire_pilot(const PilotSpec& spec, const AcquireOptions& opt = {}) {
    check_pilot(spec);
    if (spec.backend == Backend::local) {
        const unsigned cores = opt.host_cores ? opt.host_cores : std::max(1u, std::thread::hardware_concurrency());
        if (static_cast<long long>(spec.nodes) * spec.cpus_per_node > static_cast<long long>(cores))
            throw CapacityError("local pilot needs " + std::to_string(spec.total_cpus()) +
                                " cores but the host offers " + std::to_string(cores));
    }
    return Pilot(spec, opt.id, opt.gpu_host_cpu);
}

} // namespace ensemble
