#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <unordered_set>
#include <vector>

#include "ensemble/campaign/functions.hpp"
#include "ensemble/campaign/state.hpp"
#include "ensemble/campaign/types.hpp"
#include "ensemble/campaign/validate.hpp"
#include "ensemble/error.hpp"
#include "ensemble/overlay/bulk.hpp"
#include "ensemble/pilot/ready_queue.hpp"
#include "ensemble/pilot/slots.hpp"
#include "ensemble/rng.hpp"
#include "ensemble/trace/sink.hpp"
#include "ensemble/workload/cost.hpp"

namespace ensemble {

struct EngineConfig {
    /// Time from pilot acquisition to the agent accepting tasks.
    double bootstrap_s = 0.0;
    /// Delay between something that warrants a scheduling round (new
    /// ready tasks, freed slots) and the round itself.
    double sched_latency_s = 0.0;
    bool gpu_host_cpu = true;
    /// When set, function tasks run on a master/worker overlay instead of
    /// being placed one by one.
    std::optional<overlay::MasterConfig> overlay;
    std::string pilot_id = "pilot.0";
};

struct Completion {
    double t = 0.0;
    std::string task_id;
    std::size_t pipeline = 0;
    TaskState state = TaskState::done;
};

struct WorkerSummary {
    std::string worker_id;
    std::string master_id;
    std::size_t completed = 0;
    double busy_time_s = 0.0;
    double idle_time_s = 0.0;
};

struct RunResult {
    std::vector<PipelineState> pipelines;
    std::vector<TraceEvent> trace;
    std::vector<Completion> completions;
    std::vector<WorkerSummary> workers;
    double end_time = 0.0;
    bool walltime_exceeded = false;
};

/// Clock seconds `t` runs for. Stage-cost durations draw from a stream
/// derived from the seed and the task id, so they do not depend on the
/// order tasks are visited in.
inline double task_duration(const TaskDescriptor& t, const CostModel& cm, std::uint64_t seed, double time_scale) {
    if (t.duration.kind == DurationModel::Kind::fixed)
        return t.duration.seconds;
    Rng rng = derived_rng(seed, t.task_id);
    return sample_units_duration(t.duration.stage, cm, rng, t.duration.units, time_scale);
}

/// Throws CapacityError unless every master and worker of `c` can be
/// placed on an empty pilot at the same time.
inline void check_overlay_fits(const overlay::MasterConfig& c, const PilotSpec& pilot, bool gpu_host_cpu) {
    SlotMap slots(pilot);
    const Demand md = make_demand(c.master_cpus, 0, 1, gpu_host_cpu);
    const Demand wd = make_demand(c.worker_cpus, c.worker_gpus, 1, gpu_host_cpu);
    const std::size_t total = c.n_masters + c.worker_count();
    for (std::size_t k = 0; k < total; ++k) {
        const Demand& d = k < c.n_masters ? md : wd;
        auto nodes = slots.find_nodes(d, 1);
        if (nodes.empty())
            throw CapacityError("overlay of " + std::to_string(c.n_masters) + " masters and " +
                                std::to_string(c.worker_count()) + " workers does not fit the pilot");
        slots.occupy("service." + std::to_string(k), d, nodes, 0.0);
    }
}

inline std::string stage_entity_id(const PipelineSpec& p, std::size_t s) {
    return p.pipeline_id + ":" + p.stages[s].stage_id;
}

/// Single-threaded discrete-event execution of a campaign on a simulated
/// pilot. Events at equal times run completions first, then scheduling
/// rounds, then the walltime check; ties keep insertion order.
class SimEngine {
public:
    SimEngine(CampaignSpec spec, const TaskFunctions* functions = nullptr, CostModel cost = CostModel::summit_defaults(),
              EngineConfig cfg = {})
        : spec_(std::move(spec)), functions_(functions), cost_(std::move(cost)), cfg_(std::move(cfg)),
          slots_(spec_.resource) {
        auto v = validate_campaign(spec_);
        if (!v.empty())
            throw ValidationError(v.front().message);
        if (cfg_.overlay) {
            auto ov = overlay::config_violations(*cfg_.overlay);
            if (!ov.empty())
                throw ValidationError(ov.front());
            check_overlay_fits(*cfg_.overlay, spec_.resource, cfg_.gpu_host_cpu);
        }
        if (cfg_.bootstrap_s < 0 || cfg_.sched_latency_s < 0)
            throw ValidationError("engine delays must be >= 0");
        for (const auto& p : spec_.pipelines)
            states_.emplace_back(p, spec_.resource);
        started_.assign(states_.size(), false);
    }

    RunResult run() {
        const PilotSpec& r = spec_.resource;
        record(0.0, Entity::pilot, cfg_.pilot_id, tr::acquired, {r.nodes, r.total_cpus(), r.total_gpus()});
        push(cfg_.bootstrap_s, Ev::active);
        push(r.walltime_s, Ev::walltime);
        if (spec_.pipeline_mode == PipelineMode::sequential) {
            if (!states_.empty())
                start_pipeline(next_pipeline_++, 0.0);
        } else {
            for (next_pipeline_ = 0; next_pipeline_ < states_.size(); ++next_pipeline_)
                start_pipeline(next_pipeline_, 0.0);
        }
        maybe_finish(0.0);

        while (!done_ && !events_.empty()) {
            Event e = events_.top();
            events_.pop();
            now_ = e.t;
            switch (e.kind) {
            case Ev::active: on_active(); break;
            case Ev::task_done: on_task_done(e.id, e.a); break;
            case Ev::service_up: on_service_up(e.a, e.b); break;
            case Ev::dispatch: if (ov_ && ov_->gen == e.b) do_dispatch(e.a); break;
            case Ev::fn_done: if (ov_ && ov_->gen == e.b) on_fn_done(e.a); break;
            case Ev::round: on_round(); break;
            case Ev::walltime: on_walltime(); break;
            }
        }
        if (!done_)
            throw StateError("simulation stalled at t=" + std::to_string(now_));

        RunResult out;
        out.pipelines = std::move(states_);
        out.trace = sink_.take();
        out.completions = std::move(completions_);
        out.workers = std::move(workers_);
        out.end_time = now_;
        out.walltime_exceeded = walltime_hit_;
        return out;
    }

private:
    enum class Ev { active, task_done, service_up, dispatch, fn_done, round, walltime };

    struct Event {
        double t;
        int prio;
        std::uint64_t seq;
        Ev kind;
        std::size_t a = 0;
        std::size_t b = 0;
        std::string id;

        bool operator>(const Event& o) const {
            if (t != o.t)
                return t > o.t;
            if (prio != o.prio)
                return prio > o.prio;
            return seq > o.seq;
        }
    };

    static int priority(Ev k) {
        switch (k) {
        case Ev::round: return 1;
        case Ev::walltime: return 2;
        default: return 0;
        }
    }

    struct OvTask {
        std::string id;
        std::size_t pipeline;
    };

    struct WorkerRt {
        std::string id;
        std::size_t master = 0;
        std::size_t slot_in_master = 0;
        Resources res;
        bool placed = false;
        bool up = false;
        bool busy = false;
        bool running_task = false;
        double up_time = 0.0;
        std::deque<OvTask> queue;
        OvTask current;
        double current_duration = 0.0;
    };

    struct MasterRt {
        std::string id;
        overlay::Master m;
        std::vector<std::size_t> members; // master-local index -> worker index
        Resources res;
        bool placed = false;
        bool up = false;
        bool dispatching = false;
        std::deque<overlay::Bulk<OvTask>> bulks;
    };

    struct OverlayRt {
        std::size_t gen = 0;
        std::vector<MasterRt> masters;
        std::vector<WorkerRt> workers;
        std::size_t outstanding = 0;
        std::size_t next_master = 0;
        std::size_t next_bulk = 0;
    };

    // -- plumbing -----------------------------------------------------------

    void push(double t, Ev kind, std::size_t a = 0, std::size_t b = 0, std::string id = {}) {
        events_.push(Event{t, priority(kind), seq_++, kind, a, b, std::move(id)});
    }

    void record(double t, Entity e, const std::string& id, std::string_view transition, Resources res = {}) {
        sink_.record(t, e, id, transition, res);
    }

    static Resources totals(const Demand& d) { return {d.nodes, d.nodes * d.cpus, d.nodes * d.gpus}; }

    Demand demand_of(const TaskDescriptor& t) const {
        return make_demand(t.cpus, t.gpus, t.nodes, cfg_.gpu_host_cpu);
    }

    bool via_overlay(const TaskDescriptor& t) const {
        return cfg_.overlay.has_value() && t.kind == TaskKind::function;
    }

    void request_round() {
        if (round_pending_)
            return;
        round_pending_ = true;
        push(now_ + cfg_.sched_latency_s, Ev::round);
    }

    /// Runs the task body and returns (outcome, output).
    std::pair<Outcome, std::string> execute(const TaskDescriptor& t) const {
        if (!functions_)
            return {Outcome::done, {}};
        try {
            return {Outcome::done, functions_->run(t, TaskContext{spec_.seed})};
        } catch (const std::exception&) {
            return {Outcome::failed, {}};
        }
    }

    // -- pipelines ----------------------------------------------------------

    void start_pipeline(std::size_t i, double t) {
        started_[i] = true;
        auto& st = states_[i];
        record(t, Entity::pipeline, st.id(), tr::running);
        if (st.finished()) {
            record(t, Entity::pipeline, st.id(), tr::done);
            on_pipeline_finished(t);
            return;
        }
        enter_stage(i, t);
    }

    void enter_stage(std::size_t i, double t) {
        auto& st = states_[i];
        record(t, Entity::stage, stage_entity_id(st.spec(), st.current_stage_index()), tr::running);
        std::vector<OvTask> fn;
        for (const auto& id : st.next_ready_tasks()) {
            const TaskDescriptor& task = st.task(id);
            const Demand d = demand_of(task);
            record(t, Entity::task, id, tr::pending, totals(d));
            announced_.insert(id);
            if (via_overlay(task))
                fn.push_back({id, i});
            else
                ready_.push({id, static_cast<int>(i), d});
        }
        if (!fn.empty())
            overlay_submit(std::move(fn));
        request_round();
    }

    void close_stages(std::size_t i, const std::vector<std::size_t>& stages) {
        const auto& spec = states_[i].spec();
        for (std::size_t k = 0; k < stages.size(); ++k) {
            const std::string sid = stage_entity_id(spec, stages[k]);
            if (k > 0) // emptied by a hook: it never started
                record(now_, Entity::stage, sid, tr::running);
            record(now_, Entity::stage, sid, tr::done);
        }
    }

    void handle(std::size_t i, const CompletionEvent& ev) {
        auto& st = states_[i];
        switch (ev.kind) {
        case CompletionEvent::Kind::none: return;
        case CompletionEvent::Kind::stage_advanced:
            close_stages(i, ev.finished_stages);
            enter_stage(i, now_);
            return;
        case CompletionEvent::Kind::pipeline_done:
            close_stages(i, ev.finished_stages);
            record(now_, Entity::pipeline, st.id(), tr::done);
            on_pipeline_finished(now_);
            return;
        case CompletionEvent::Kind::pipeline_failed: {
            std::unordered_set<std::string> gone(ev.canceled.begin(), ev.canceled.end());
            ready_.erase_if([&](const ReadyEntry& e) { return e.owner == static_cast<int>(i) && gone.count(e.task_id); });
            overlay_withdraw(gone);
            for (const auto& id : ev.canceled)
                if (announced_.erase(id))
                    record(now_, Entity::task, id, tr::canceled);
            record(now_, Entity::stage, stage_entity_id(st.spec(), st.current_stage_index()), tr::failed);
            record(now_, Entity::pipeline, st.id(), tr::failed);
            on_pipeline_finished(now_);
            return;
        }
        }
    }

    void on_pipeline_finished(double t) {
        if (spec_.pipeline_mode == PipelineMode::sequential && next_pipeline_ < states_.size())
            start_pipeline(next_pipeline_++, t);
    }

    void complete(std::size_t i, const std::string& id, Resources res, double duration_hint,
                  std::optional<std::size_t> worker) {
        auto& st = states_[i];
        auto [outcome, output] = execute(st.task(id));
        record(now_, Entity::task, id, outcome == Outcome::done ? tr::done : tr::failed, res);
        announced_.erase(id);
        completions_.push_back({now_, id, i, outcome == Outcome::done ? TaskState::done : TaskState::failed});
        if (worker)
            finish_on_worker(*worker, duration_hint);
        handle(i, st.on_task_complete(id, outcome, std::move(output)));
    }

    // -- pilot --------------------------------------------------------------

    void on_active() {
        active_ = true;
        const PilotSpec& r = spec_.resource;
        record(now_, Entity::pilot, cfg_.pilot_id, tr::active, {r.nodes, r.total_cpus(), r.total_gpus()});
        request_round();
    }

    void on_round() {
        round_pending_ = false;
        if (!active_ || done_)
            return;
        ready_.place(slots_, now_, [&](const ReadyEntry& e, const Placement& p) { on_placed(e, p); });
    }

    void on_placed(const ReadyEntry& e, const Placement& p) {
        const Resources res = p.resources();
        if (e.owner < 0) {
            service_placed(static_cast<std::size_t>(-e.owner - 1), res);
            return;
        }
        const auto i = static_cast<std::size_t>(e.owner);
        auto& st = states_[i];
        st.mark_scheduled(e.task_id);
        st.mark_running(e.task_id);
        record(now_, Entity::task, e.task_id, tr::scheduled, res);
        record(now_, Entity::task, e.task_id, tr::running, res);
        running_[e.task_id] = res;
        const double d = task_duration(st.task(e.task_id), cost_, spec_.seed, spec_.time_scale);
        push(now_ + d, Ev::task_done, i, 0, e.task_id);
    }

    void on_task_done(const std::string& id, std::size_t i) {
        auto it = running_.find(id);
        if (it == running_.end())
            return; // canceled at walltime
        const Resources res = it->second;
        running_.erase(it);
        slots_.release(id);
        complete(i, id, res, 0.0, std::nullopt);
        request_round();
        maybe_shutdown_overlay();
        maybe_finish(now_);
    }

    bool all_finished() const {
        for (const auto& s : states_)
            if (!s.finished())
                return false;
        return next_pipeline_ >= states_.size();
    }

    void maybe_finish(double t) {
        if (done_ || !all_finished() || !running_.empty() || ov_)
            return;
        const PilotSpec& r = spec_.resource;
        record(t, Entity::pilot, cfg_.pilot_id, tr::released, {r.nodes, r.total_cpus(), r.total_gpus()});
        done_ = true;
    }

    void on_walltime() {
        if (done_)
            return;
        walltime_hit_ = true;
        std::vector<std::pair<std::string, Resources>> live(running_.begin(), running_.end());
        std::sort(live.begin(), live.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [id, res] : live) {
            slots_.release(id);
            record(now_, Entity::task, id, tr::canceled, res);
            announced_.erase(id);
        }
        running_.clear();
        if (ov_) {
            for (auto& w : ov_->workers)
                if (w.running_task) {
                    record(now_, Entity::task, w.current.id, tr::canceled, w.res);
                    announced_.erase(w.current.id);
                    w.running_task = false;
                }
        }
        for (std::size_t i = 0; i < states_.size(); ++i) {
            auto& st = states_[i];
            const bool was_active = started_[i] && !st.finished();
            for (const auto& id : st.cancel())
                if (announced_.erase(id))
                    record(now_, Entity::task, id, tr::canceled);
            if (was_active) {
                record(now_, Entity::stage, stage_entity_id(st.spec(), st.current_stage_index()), tr::canceled);
                record(now_, Entity::pipeline, st.id(), tr::canceled);
            }
        }
        if (ov_)
            shutdown_overlay(tr::canceled);
        const PilotSpec& r = spec_.resource;
        record(now_, Entity::pilot, cfg_.pilot_id, tr::released, {r.nodes, r.total_cpus(), r.total_gpus()});
        done_ = true;
    }

    // -- overlay ------------------------------------------------------------

    void start_overlay() {
        const auto& c = *cfg_.overlay;
        OverlayRt ov;
        ov.gen = overlay_gen_++;
        const std::string g = std::to_string(ov.gen);
        for (std::size_t m = 0; m < c.n_masters; ++m)
            ov.masters.push_back({"master." + g + "." + std::to_string(m),
                                  overlay::Master("master." + g + "." + std::to_string(m), c.policy), {}, {},
                                  false, false, false, {}});
        const std::size_t nw = c.worker_count();
        ov.workers.resize(nw);
        for (std::size_t w = 0; w < nw; ++w) {
            ov.workers[w].id = "worker." + g + "." + std::to_string(w);
            ov.workers[w].master = overlay::master_of_worker(w, c.n_masters);
        }
        const Demand md = make_demand(c.master_cpus, 0, 1, cfg_.gpu_host_cpu);
        const Demand wd = make_demand(c.worker_cpus, c.worker_gpus, 1, cfg_.gpu_host_cpu);
        for (std::size_t m = 0; m < c.n_masters; ++m)
            ready_.push({ov.masters[m].id, -static_cast<int>(m) - 1, md});
        for (std::size_t w = 0; w < nw; ++w)
            ready_.push({ov.workers[w].id, -static_cast<int>(c.n_masters + w) - 1, wd});
        ov_ = std::move(ov);
        request_round();
    }

    void overlay_submit(std::vector<OvTask> tasks) {
        if (!ov_)
            start_overlay();
        auto& ov = *ov_;
        ov.outstanding += tasks.size();
        for (auto& b : overlay::partition_bulks(tasks, cfg_.overlay->bulk_size, ov.next_bulk)) {
            const std::size_t m = ov.next_master++ % ov.masters.size();
            ++ov.next_bulk;
            if (ov.masters[m].placed)
                record(now_, Entity::master, ov.masters[m].id, tr::bulk_created);
            ov.masters[m].bulks.push_back(std::move(b));
        }
        for (std::size_t m = 0; m < ov.masters.size(); ++m)
            try_dispatch(m);
    }

    void service_placed(std::size_t k, Resources res) {
        auto& ov = *ov_;
        const auto& c = *cfg_.overlay;
        if (k < ov.masters.size()) {
            auto& m = ov.masters[k];
            m.placed = true;
            m.res = res;
            record(now_, Entity::master, m.id, tr::scheduled, res);
            for (std::size_t b = 0; b < m.bulks.size(); ++b)
                record(now_, Entity::master, m.id, tr::bulk_created);
            push(now_ + c.master_startup_s, Ev::service_up, k, ov.gen);
        } else {
            auto& w = ov.workers[k - ov.masters.size()];
            w.placed = true;
            w.res = res;
            record(now_, Entity::worker, w.id, tr::scheduled, res);
            push(now_ + c.worker_startup_s, Ev::service_up, k, ov.gen);
        }
    }

    void on_service_up(std::size_t k, std::size_t gen) {
        if (!ov_ || ov_->gen != gen)
            return;
        auto& ov = *ov_;
        if (k < ov.masters.size()) {
            auto& m = ov.masters[k];
            m.up = true;
            record(now_, Entity::master, m.id, tr::running, m.res);
            try_dispatch(k);
            return;
        }
        const std::size_t wi = k - ov.masters.size();
        auto& w = ov.workers[wi];
        w.up = true;
        w.up_time = now_;
        record(now_, Entity::worker, w.id, tr::running, w.res);
        record(now_, Entity::worker, w.id, tr::idle, w.res);
        auto& m = ov.masters[w.master];
        w.slot_in_master = m.m.add_worker(w.id);
        m.members.push_back(wi);
        // Deferred so that workers coming up at the same instant register
        // before the master splits its first bulk.
        try_dispatch(w.master, true);
    }

    void try_dispatch(std::size_t mi, bool defer = false) {
        auto& m = ov_->masters[mi];
        if (!m.up || m.dispatching || m.bulks.empty() || m.m.alive_count() == 0)
            return;
        if (m.m.policy() == overlay::DispatchPolicy::least_outstanding && !m.m.has_idle_worker())
            return;
        m.dispatching = true;
        if (defer || cfg_.overlay->dispatch_latency_s > 0.0)
            push(now_ + cfg_.overlay->dispatch_latency_s, Ev::dispatch, mi, ov_->gen);
        else
            do_dispatch(mi);
    }

    void do_dispatch(std::size_t mi) {
        auto& ov = *ov_;
        auto& m = ov.masters[mi];
        m.dispatching = false;
        const bool deal_all = m.m.policy() == overlay::DispatchPolicy::round_robin;
        std::vector<std::size_t> touched;
        do {
            if (m.bulks.empty() || m.m.alive_count() == 0)
                break;
            auto bulk = std::move(m.bulks.front());
            m.bulks.pop_front();
            auto who = m.m.assign(bulk.tasks.size());
            for (std::size_t k = 0; k < who.size(); ++k) {
                const std::size_t wi = m.members[who[k]];
                auto& w = ov.workers[wi];
                auto& task = bulk.tasks[k];
                states_[task.pipeline].mark_scheduled(task.id);
                record(now_, Entity::task, task.id, tr::scheduled, w.res);
                w.queue.push_back(std::move(task));
                touched.push_back(wi);
            }
        } while (deal_all || (m.m.has_idle_worker() && !m.bulks.empty()));
        for (std::size_t wi : touched)
            start_next(wi);
    }

    void start_next(std::size_t wi) {
        auto& w = ov_->workers[wi];
        if (w.running_task)
            return;
        if (w.queue.empty()) {
            if (w.busy) {
                record(now_, Entity::worker, w.id, tr::idle, w.res);
                w.busy = false;
            }
            return;
        }
        w.current = std::move(w.queue.front());
        w.queue.pop_front();
        if (!w.busy) {
            record(now_, Entity::worker, w.id, tr::busy, w.res);
            w.busy = true;
        }
        auto& st = states_[w.current.pipeline];
        st.mark_running(w.current.id);
        record(now_, Entity::task, w.current.id, tr::running, w.res);
        w.running_task = true;
        w.current_duration = task_duration(st.task(w.current.id), cost_, spec_.seed, spec_.time_scale);
        push(now_ + w.current_duration, Ev::fn_done, wi, ov_->gen);
    }

    void finish_on_worker(std::size_t wi, double duration) {
        auto& w = ov_->workers[wi];
        ov_->masters[w.master].m.finished(w.slot_in_master, duration);
        --ov_->outstanding;
    }

    void on_fn_done(std::size_t wi) {
        auto& w = ov_->workers[wi];
        if (!w.running_task)
            return;
        w.running_task = false;
        const OvTask task = w.current;
        const std::size_t master = w.master;
        complete(task.pipeline, task.id, w.res, w.current_duration, wi);
        if (ov_) {
            start_next(wi);
            try_dispatch(master);
        }
        maybe_shutdown_overlay();
        request_round();
        maybe_finish(now_);
    }

    /// Removes canceled tasks from master and worker queues.
    void overlay_withdraw(const std::unordered_set<std::string>& gone) {
        if (!ov_ || gone.empty())
            return;
        auto& ov = *ov_;
        for (auto& m : ov.masters)
            for (auto& b : m.bulks) {
                const auto before = b.tasks.size();
                std::erase_if(b.tasks, [&](const OvTask& t) { return gone.count(t.id) != 0; });
                ov.outstanding -= before - b.tasks.size();
            }
        for (auto& m : ov.masters)
            std::erase_if(m.bulks, [](const auto& b) { return b.tasks.empty(); });
        for (auto& w : ov.workers) {
            const auto before = w.queue.size();
            std::erase_if(w.queue, [&](const OvTask& t) { return gone.count(t.id) != 0; });
            const auto removed = before - w.queue.size();
            if (removed) {
                ov.masters[w.master].m.withdraw(w.slot_in_master, removed);
                ov.outstanding -= removed;
            }
        }
    }

    void maybe_shutdown_overlay() {
        if (ov_ && ov_->outstanding == 0)
            shutdown_overlay(tr::done);
    }

    void shutdown_overlay(std::string_view how) {
        auto& ov = *ov_;
        for (auto& w : ov.workers) {
            if (!w.placed)
                continue;
            record(now_, Entity::worker, w.id, how, w.res);
            slots_.release(w.id);
            WorkerSummary s{w.id, ov.masters[w.master].id, 0, 0.0, 0.0};
            if (w.up) {
                const auto& ws = ov.masters[w.master].m.worker(w.slot_in_master);
                s.completed = ws.completed;
                s.busy_time_s = ws.busy_time_s;
                s.idle_time_s = std::max(0.0, (now_ - w.up_time) - ws.busy_time_s);
            }
            workers_.push_back(std::move(s));
        }
        for (auto& m : ov.masters)
            if (m.placed) {
                record(now_, Entity::master, m.id, how, m.res);
                slots_.release(m.id);
            }
        ready_.erase_if([](const ReadyEntry& e) { return e.owner < 0; });
        ov_.reset();
        request_round();
    }

    CampaignSpec spec_;
    const TaskFunctions* functions_;
    CostModel cost_;
    EngineConfig cfg_;
    SlotMap slots_;
    TraceSink sink_;
    ReadyQueue ready_;
    std::vector<PipelineState> states_;
    std::vector<bool> started_;
    std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;
    bool active_ = false;
    bool done_ = false;
    bool round_pending_ = false;
    bool walltime_hit_ = false;
    std::size_t next_pipeline_ = 0;
    std::unordered_map<std::string, Resources> running_;
    std::unordered_set<std::string> announced_;
    std::vector<Completion> completions_;
    std::optional<OverlayRt> ov_;
    std::size_t overlay_gen_ = 0;
    std::vector<WorkerSummary> workers_;
};

inline RunResult simulate(const CampaignSpec& spec, const TaskFunctions* functions = nullptr,
                          const CostModel& cost = CostModel::summit_defaults(), const EngineConfig& cfg = {}) {
    return SimEngine(spec, functions, cost, cfg).run();
}

/// Runs `tasks` as one single-stage pipeline on a simulated pilot.
inline RunResult run_executor(const PilotSpec& pilot, std::vector<TaskDescriptor> tasks, const EngineConfig& cfg = {},
                              std::uint64_t seed = 0, const CostModel& cost = CostModel::summit_defaults(),
                              double time_scale = 1.0) {
    CampaignSpec spec;
    spec.resource = pilot;
    spec.resource.backend = Backend::simulated;
    spec.mode = Backend::simulated;
    spec.seed = seed;
    spec.time_scale = time_scale;
    spec.pipelines = {{"executor", {{"tasks", std::move(tasks), std::nullopt}}}};
    return simulate(spec, nullptr, cost, cfg);
}

/// Runs function tasks through a master/worker overlay on a simulated
/// pilot; the result carries per-worker summaries.
inline RunResult run_overlay(const PilotSpec& pilot, const overlay::MasterConfig& config,
                             std::vector<TaskDescriptor> tasks, std::uint64_t seed = 0,
                             const CostModel& cost = CostModel::summit_defaults(), double time_scale = 1.0,
                             EngineConfig cfg = {}) {
    for (auto& t : tasks)
        t.kind = TaskKind::function;
    cfg.overlay = config;
    return run_executor(pilot, std::move(tasks), cfg, seed, cost, time_scale);
}

} // namespace ensemble
