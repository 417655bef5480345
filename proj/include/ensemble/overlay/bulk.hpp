#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "ensemble/error.hpp"

namespace ensemble::overlay {

template <typename T>
struct Bulk {
    std::size_t bulk_id = 0;
    std::vector<T> tasks;
};

/// Consecutive chunks of at most `bulk_size` tasks, order preserved.
template <typename T>
std::vector<Bulk<T>> partition_bulks(const std::vector<T>& tasks, std::size_t bulk_size,
                                     std::size_t first_id = 0) {
    if (bulk_size < 1)
        throw ValidationError("partition_bulks: bulk_size must be >= 1");
    std::vector<Bulk<T>> out;
    out.reserve((tasks.size() + bulk_size - 1) / bulk_size);
    for (std::size_t i = 0; i < tasks.size(); i += bulk_size) {
        Bulk<T> b{first_id + out.size(), {}};
        const std::size_t end = std::min(tasks.size(), i + bulk_size);
        b.tasks.assign(tasks.begin() + static_cast<std::ptrdiff_t>(i), tasks.begin() + static_cast<std::ptrdiff_t>(end));
        out.push_back(std::move(b));
    }
    return out;
}

/// Item i goes to bin i mod n_bins.
template <typename T>
std::vector<std::vector<T>> round_robin_assign(const std::vector<T>& items, std::size_t n_bins) {
    if (n_bins < 1)
        throw ValidationError("round_robin_assign: n_bins must be >= 1");
    std::vector<std::vector<T>> bins(n_bins);
    for (std::size_t i = 0; i < items.size(); ++i)
        bins[i % n_bins].push_back(items[i]);
    return bins;
}

enum class DispatchPolicy { least_outstanding, round_robin };

inline const char* to_string(DispatchPolicy p) {
    return p == DispatchPolicy::least_outstanding ? "least_outstanding" : "round_robin";
}

struct MasterConfig {
    std::size_t n_masters = 1;
    /// Cap on the workers one master serves.
    std::size_t workers_per_master = 64;
    std::size_t bulk_size = 1024;
    DispatchPolicy policy = DispatchPolicy::least_outstanding;
    /// Workers to launch; 0 means n_masters * workers_per_master.
    std::size_t n_workers = 0;
    int worker_cpus = 1;
    int worker_gpus = 1;
    int master_cpus = 1;
    double master_startup_s = 0.0;
    double worker_startup_s = 0.0;
    /// Delay between a master deciding to dispatch a bulk and its tasks
    /// reaching the workers.
    double dispatch_latency_s = 0.0;

    std::size_t worker_count() const { return n_workers ? n_workers : n_masters * workers_per_master; }
};

inline std::vector<std::string> config_violations(const MasterConfig& c) {
    std::vector<std::string> v;
    if (c.n_masters < 1)
        v.push_back("overlay: n_masters must be >= 1");
    if (c.workers_per_master < 1)
        v.push_back("overlay: workers_per_master must be >= 1");
    if (c.bulk_size < 1)
        v.push_back("overlay: bulk_size must be >= 1");
    if (c.worker_cpus < 0 || c.worker_gpus < 0 || c.worker_cpus + c.worker_gpus <= 0)
        v.push_back("overlay: workers need at least one cpu or gpu");
    if (c.master_cpus < 0)
        v.push_back("overlay: master_cpus must be >= 0");
    if (v.empty() && c.worker_count() > c.n_masters * c.workers_per_master)
        v.push_back("overlay: " + std::to_string(c.worker_count()) + " workers exceed " +
                    std::to_string(c.n_masters) + " masters x " + std::to_string(c.workers_per_master) + " cap");
    if (v.empty() && c.worker_count() < 1)
        v.push_back("overlay: at least one worker is required");
    if (c.master_startup_s < 0 || c.worker_startup_s < 0 || c.dispatch_latency_s < 0)
        v.push_back("overlay: delays must be >= 0");
    return v;
}

struct WorkerState {
    std::string worker_id;
    std::string master_id;
    std::size_t outstanding = 0;
    std::size_t completed = 0;
    double busy_time_s = 0.0;
    double idle_time_s = 0.0;
};

/// Worker j of the overlay belongs to master j mod n_masters.
inline std::size_t master_of_worker(std::size_t worker, std::size_t n_masters) { return worker % n_masters; }

/// One master's view of its workers. Workers are ordered by registration,
/// which is also the tie-break order of dispatch.
class Master {
public:
    explicit Master(std::string id, DispatchPolicy policy = DispatchPolicy::least_outstanding)
        : id_(std::move(id)), policy_(policy) {}

    const std::string& id() const noexcept { return id_; }
    DispatchPolicy policy() const noexcept { return policy_; }

    std::size_t add_worker(std::string worker_id) {
        const std::size_t idx = workers_.size();
        workers_.push_back({std::move(worker_id), id_, 0, 0, 0.0, 0.0});
        alive_.push_back(true);
        load_.insert({0, idx});
        return idx;
    }

    std::size_t size() const noexcept { return workers_.size(); }
    std::size_t alive_count() const noexcept { return load_.size(); }
    const std::vector<WorkerState>& workers() const noexcept { return workers_; }
    const WorkerState& worker(std::size_t i) const { return workers_.at(i); }
    bool alive(std::size_t i) const { return alive_.at(i); }

    /// Whether some live worker has nothing outstanding.
    bool has_idle_worker() const { return !load_.empty() && load_.begin()->first == 0; }

    /// Worker index for each of `count` tasks, in order. Least-outstanding
    /// assigns each task to the live worker with the fewest outstanding
    /// tasks (lowest index on ties); round-robin deals tasks to live
    /// workers in turn, ignoring load.
    std::vector<std::size_t> assign(std::size_t count) {
        if (load_.empty())
            throw DispatchError("master '" + id_ + "' has no workers");
        std::vector<std::size_t> out;
        out.reserve(count);
        for (std::size_t n = 0; n < count; ++n) {
            std::size_t w;
            if (policy_ == DispatchPolicy::least_outstanding) {
                w = load_.begin()->second;
            } else {
                do
                    w = rr_next_++ % workers_.size();
                while (!alive_[w]);
            }
            bump(w, +1);
            out.push_back(w);
        }
        return out;
    }

    /// Map worker_id -> task ids for one bulk.
    template <typename Id>
    std::map<std::string, std::vector<Id>> dispatch(const Bulk<Id>& bulk) {
        std::map<std::string, std::vector<Id>> out;
        auto who = assign(bulk.tasks.size());
        for (std::size_t i = 0; i < who.size(); ++i)
            out[workers_[who[i]].worker_id].push_back(bulk.tasks[i]);
        return out;
    }

    /// Credits a finished task to worker `w`.
    void finished(std::size_t w, double busy_s) {
        auto& ws = workers_.at(w);
        if (ws.outstanding == 0)
            throw StateError("worker '" + ws.worker_id + "' has no outstanding task");
        bump(w, -1);
        ++ws.completed;
        ws.busy_time_s += busy_s;
    }

    /// Takes back `n` outstanding tasks from worker `w` without completing
    /// them (cancellation or re-dispatch).
    void withdraw(std::size_t w, std::size_t n) {
        auto& ws = workers_.at(w);
        if (n > ws.outstanding)
            throw StateError("worker '" + ws.worker_id + "' has fewer outstanding tasks");
        if (alive_[w])
            load_.erase({ws.outstanding, w});
        ws.outstanding -= n;
        if (alive_[w])
            load_.insert({ws.outstanding, w});
    }

    /// Removes a dead worker from dispatch. Its outstanding count drops to
    /// zero; returns how many tasks it held.
    std::size_t remove_worker(std::size_t w) {
        if (!alive_.at(w))
            return 0;
        auto& ws = workers_[w];
        load_.erase({ws.outstanding, w});
        alive_[w] = false;
        return std::exchange(ws.outstanding, 0);
    }

    void set_idle_time(std::size_t w, double s) { workers_.at(w).idle_time_s = s; }

    /// Pre-loads outstanding counts (testing and replays).
    void set_outstanding(std::size_t w, std::size_t n) {
        auto& ws = workers_.at(w);
        if (alive_[w])
            load_.erase({ws.outstanding, w});
        ws.outstanding = n;
        if (alive_[w])
            load_.insert({n, w});
    }

private:
    void bump(std::size_t w, int delta) {
        auto& ws = workers_[w];
        load_.erase({ws.outstanding, w});
        ws.outstanding = static_cast<std::size_t>(static_cast<long long>(ws.outstanding) + delta);
        load_.insert({ws.outstanding, w});
    }

    std::string id_;
    DispatchPolicy policy_;
    std::vector<WorkerState> workers_;
    std::vector<bool> alive_;
    std::set<std::pair<std::size_t, std::size_t>> load_;
    std::size_t rr_next_ = 0;
};

} // namespace ensemble::overlay
