#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ensemble/campaign/types.hpp"
#include "ensemble/error.hpp"
#include "ensemble/pilot/spec.hpp"
#include "ensemble/trace/event.hpp"

namespace ensemble {

/// Where a task runs: the nodes of its placement and, per node, the slot
/// indices it holds.
struct Placement {
    std::string task_id;
    Demand demand;
    std::vector<int> node_indices;
    std::vector<std::vector<int>> cpu_slots;
    std::vector<std::vector<int>> gpu_slots;
    double start_time = 0.0;

    Resources resources() const {
        const int n = static_cast<int>(node_indices.size());
        return {n, n * demand.cpus, n * demand.gpus};
    }
};

/// Per-node cpu and gpu slots, each free or held by one live placement.
class SlotMap {
public:
    static constexpr std::int32_t free_slot = -1;

    explicit SlotMap(const PilotSpec& spec)
        : spec_(spec),
          cpu_owner_(static_cast<std::size_t>(spec.total_cpus()), free_slot),
          gpu_owner_(static_cast<std::size_t>(spec.total_gpus()), free_slot),
          free_cpus_(static_cast<std::size_t>(spec.nodes), spec.cpus_per_node),
          free_gpus_(static_cast<std::size_t>(spec.nodes), spec.gpus_per_node) {
        for (int n = 0; n < spec.nodes; ++n) {
            if (spec.cpus_per_node > 0)
                with_free_cpu_.insert(with_free_cpu_.end(), n);
            if (spec.gpus_per_node > 0)
                with_free_gpu_.insert(with_free_gpu_.end(), n);
        }
    }

    const PilotSpec& spec() const noexcept { return spec_; }
    int free_cpus(int node) const { return free_cpus_[static_cast<std::size_t>(node)]; }
    int free_gpus(int node) const { return free_gpus_[static_cast<std::size_t>(node)]; }

    int total_free_cpus() const { return sum(free_cpus_); }
    int total_free_gpus() const { return sum(free_gpus_); }
    int total_busy_cpus() const { return spec_.total_cpus() - total_free_cpus(); }
    int total_busy_gpus() const { return spec_.total_gpus() - total_free_gpus(); }

    /// Owner handle of a slot, or free_slot.
    std::int32_t cpu_owner(int node, int slot) const {
        return cpu_owner_[static_cast<std::size_t>(node * spec_.cpus_per_node + slot)];
    }
    std::int32_t gpu_owner(int node, int slot) const {
        return gpu_owner_[static_cast<std::size_t>(node * spec_.gpus_per_node + slot)];
    }

    bool node_fits(int node, const Demand& d) const {
        return free_cpus(node) >= d.cpus && free_gpus(node) >= d.gpus;
    }

    /// Ascending indices of nodes with at least one free cpu (gpu) slot.
    const std::set<int>& nodes_with_free_cpu() const noexcept { return with_free_cpu_; }
    const std::set<int>& nodes_with_free_gpu() const noexcept { return with_free_gpu_; }

    /// Lowest-indexed nodes, up to `count`, that can hold `d`.
    std::vector<int> find_nodes(const Demand& d, int count) const {
        std::vector<int> nodes;
        auto scan = [&](const auto& range) {
            for (int n : range) {
                if (node_fits(n, d))
                    nodes.push_back(n);
                if (static_cast<int>(nodes.size()) == count)
                    break;
            }
        };
        if (d.gpus > 0)
            scan(with_free_gpu_);
        else if (d.cpus > 0)
            scan(with_free_cpu_);
        else
            for (int n = 0; n < spec_.nodes && static_cast<int>(nodes.size()) < count; ++n)
                nodes.push_back(n);
        return nodes;
    }

    const std::unordered_map<std::string, Placement>& live() const noexcept { return live_; }
    bool is_live(const std::string& task_id) const { return live_.count(task_id) != 0; }

    /// Marks the lowest free slots of `nodes` busy for `task_id`.
    const Placement& occupy(const std::string& task_id, const Demand& d, const std::vector<int>& nodes,
                            double now) {
        if (live_.count(task_id))
            throw StateError("task '" + task_id + "' already holds a placement");
        const std::int32_t handle = next_handle_++;
        Placement p{task_id, d, nodes, {}, {}, now};
        for (int node : nodes) {
            p.cpu_slots.push_back(take(cpu_owner_, node, spec_.cpus_per_node, d.cpus, handle));
            p.gpu_slots.push_back(take(gpu_owner_, node, spec_.gpus_per_node, d.gpus, handle));
            free_cpus_[static_cast<std::size_t>(node)] -= d.cpus;
            free_gpus_[static_cast<std::size_t>(node)] -= d.gpus;
            sync(node);
        }
        return live_.emplace(task_id, std::move(p)).first->second;
    }

    /// Returns exactly the placement's slots to free.
    void release(const std::string& task_id) {
        auto it = live_.find(task_id);
        if (it == live_.end())
            throw StateError("no live placement for task '" + task_id + "'");
        const Placement& p = it->second;
        for (std::size_t i = 0; i < p.node_indices.size(); ++i) {
            const int node = p.node_indices[i];
            for (int s : p.cpu_slots[i])
                cpu_owner_[static_cast<std::size_t>(node * spec_.cpus_per_node + s)] = free_slot;
            for (int s : p.gpu_slots[i])
                gpu_owner_[static_cast<std::size_t>(node * spec_.gpus_per_node + s)] = free_slot;
            free_cpus_[static_cast<std::size_t>(node)] += p.demand.cpus;
            free_gpus_[static_cast<std::size_t>(node)] += p.demand.gpus;
            sync(node);
        }
        live_.erase(it);
    }

    void release(const Placement& p) { release(p.task_id); }

    friend bool operator==(const SlotMap& a, const SlotMap& b) {
        return a.cpu_owner_ == b.cpu_owner_ && a.gpu_owner_ == b.gpu_owner_ && a.free_cpus_ == b.free_cpus_ &&
               a.free_gpus_ == b.free_gpus_ && a.live_.size() == b.live_.size();
    }

private:
    void sync(int node) {
        if (free_cpus(node) > 0)
            with_free_cpu_.insert(node);
        else
            with_free_cpu_.erase(node);
        if (free_gpus(node) > 0)
            with_free_gpu_.insert(node);
        else
            with_free_gpu_.erase(node);
    }

    static int sum(const std::vector<int>& v) {
        int s = 0;
        for (int x : v)
            s += x;
        return s;
    }

    static std::vector<int> take(std::vector<std::int32_t>& owner, int node, int per_node, int count,
                                 std::int32_t handle) {
        std::vector<int> slots;
        slots.reserve(static_cast<std::size_t>(count));
        for (int s = 0; s < per_node && static_cast<int>(slots.size()) < count; ++s) {
            auto& o = owner[static_cast<std::size_t>(node * per_node + s)];
            if (o == free_slot) {
                o = handle;
                slots.push_back(s);
            }
        }
        if (static_cast<int>(slots.size()) != count)
            throw StateError("slot bookkeeping out of sync on node " + std::to_string(node));
        return slots;
    }

    PilotSpec spec_;
    std::vector<std::int32_t> cpu_owner_;
    std::vector<std::int32_t> gpu_owner_;
    std::vector<int> free_cpus_;
    std::vector<int> free_gpus_;
    std::set<int> with_free_cpu_;
    std::set<int> with_free_gpu_;
    std::unordered_map<std::string, Placement> live_;
    std::int32_t next_handle_ = 0;
};

/// First-fit core over `count` ready tasks. `task(i)` yields the i-th
/// TaskDescriptor; `placed(i, placement)` is called for every task that
/// gets slots. Returns the number placed.
template <typename TaskAt, typename OnPlaced>
std::size_t first_fit(std::size_t count, TaskAt&& task, SlotMap& slots, double now, bool gpu_host_cpu,
                      OnPlaced&& placed) {
    const PilotSpec& spec = slots.spec();
    std::vector<Demand> rejected; // demands that failed this round; slots only shrink within a round
    std::vector<int> nodes;
    std::size_t n_placed = 0;
    for (std::size_t i = 0; i < count; ++i) {
        const TaskDescriptor& t = task(i);
        const Demand d = make_demand(t.cpus, t.gpus, t.nodes, gpu_host_cpu);
        if (!fits_empty_pilot(d, spec))
            throw UnsatisfiableError("task '" + t.task_id + "' is larger than the whole pilot");
        bool known_misfit = false;
        for (const auto& r : rejected)
            if (r.cpus <= d.cpus && r.gpus <= d.gpus && r.nodes <= d.nodes) {
                known_misfit = true;
                break;
            }
        if (known_misfit)
            continue;
        nodes = slots.find_nodes(d, d.nodes);
        if (static_cast<int>(nodes.size()) == d.nodes) {
            placed(i, slots.occupy(t.task_id, d, nodes, now));
            ++n_placed;
        } else {
            rejected.push_back(d);
        }
    }
    return n_placed;
}

struct ScheduleResult {
    std::vector<Placement> placements;
    std::vector<std::string> still_queued;
};

/// First-fit in ready order: each task takes the lowest-indexed nodes that
/// can hold its per-node demand, and the lowest free slots on them. Tasks
/// that do not fit stay queued in order. A task that could not fit even on
/// an empty pilot raises UnsatisfiableError.
inline ScheduleResult schedule(std::span<const TaskDescriptor> ready, SlotMap& slots, double now = 0.0,
                               bool gpu_host_cpu = true) {
    ScheduleResult out;
    std::vector<bool> placed(ready.size(), false);
    first_fit(
        ready.size(), [&](std::size_t i) -> const TaskDescriptor& { return ready[i]; }, slots, now, gpu_host_cpu,
        [&](std::size_t i, const Placement& p) {
            placed[i] = true;
            out.placements.push_back(p);
        });
    for (std::size_t i = 0; i < ready.size(); ++i)
        if (!placed[i])
            out.still_queued.push_back(ready[i].task_id);
    return out;
}

} // namespace ensemble
