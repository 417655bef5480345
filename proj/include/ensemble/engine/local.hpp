#pragma once

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <csignal>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <fcntl.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "ensemble/engine/sim.hpp"
#include "ensemble/pilot/pilot.hpp"

extern char** environ;

namespace ensemble {

/// Thrown from a task function to make the overlay worker running it die,
/// as a crashed worker process would.
class WorkerLost : public Error {
public:
    using Error::Error;
};

struct ShellResult {
    int exit_code = 0;
    bool signaled = false;
    std::string out;
};

/// Runs `command` with /bin/sh -c, feeding `input` on stdin and capturing
/// stdout. `spawned` sees the child's pid as soon as it exists; `exiting`
/// runs after the child has terminated but before it is reaped, so a pid
/// published through `spawned` stays valid until `exiting` returns.
inline ShellResult run_shell(const std::string& command, const std::string& input,
                             const std::vector<std::string>& extra_env = {},
                             const std::function<void(pid_t)>& spawned = {},
                             const std::function<void()>& exiting = {}) {
    int in[2], out[2];
    // A socket for stdin lets us write with MSG_NOSIGNAL, so a child that
    // exits without reading cannot kill us with SIGPIPE.
    if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in) != 0)
        throw Error(std::string("socketpair: ") + std::strerror(errno));
    if (pipe2(out, O_CLOEXEC) != 0) {
        close(in[0]);
        close(in[1]);
        throw Error(std::string("pipe: ") + std::strerror(errno));
    }

    std::vector<std::string> env_text;
    for (char** e = environ; e && *e; ++e)
        env_text.emplace_back(*e);
    env_text.insert(env_text.end(), extra_env.begin(), extra_env.end());
    std::vector<char*> envp;
    for (auto& s : env_text)
        envp.push_back(s.data());
    envp.push_back(nullptr);

    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_adddup2(&fa, in[1], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&fa, out[1], STDOUT_FILENO);
    std::string sh = "/bin/sh", dash_c = "-c", cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    // The shell leads its own process group so that a kill reaches the
    // commands it forks, not only the shell itself.
    posix_spawnattr_t attr;
    posix_spawnattr_init(&attr);
    posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
    posix_spawnattr_setpgroup(&attr, 0);
    pid_t pid = 0;
    const int rc = posix_spawn(&pid, "/bin/sh", &fa, &attr, argv, envp.data());
    posix_spawnattr_destroy(&attr);
    posix_spawn_file_actions_destroy(&fa);
    close(in[1]);
    close(out[1]);
    if (rc != 0) {
        close(in[0]);
        close(out[0]);
        throw Error(std::string("spawn /bin/sh: ") + std::strerror(rc));
    }
    if (spawned)
        spawned(pid);

    std::thread writer([fd = in[0], &input] {
        std::size_t off = 0;
        while (off < input.size()) {
            const ssize_t n = send(fd, input.data() + off, input.size() - off, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR)
                continue;
            if (n <= 0)
                break;
            off += static_cast<std::size_t>(n);
        }
        shutdown(fd, SHUT_WR);
    });
    ShellResult res;
    char buf[8192];
    while (true) {
        const ssize_t n = read(out[0], buf, sizeof buf);
        if (n < 0 && errno == EINTR)
            continue;
        if (n <= 0)
            break;
        res.out.append(buf, static_cast<std::size_t>(n));
    }
    close(out[0]);
    writer.join();
    close(in[0]);

    siginfo_t info{};
    while (waitid(P_PID, static_cast<id_t>(pid), &info, WEXITED | WNOWAIT) != 0 && errno == EINTR) {
    }
    if (exiting)
        exiting();
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFSIGNALED(status)) {
        res.signaled = true;
        res.exit_code = 128 + WTERMSIG(status);
    } else {
        res.exit_code = WEXITSTATUS(status);
    }
    return res;
}

struct LocalConfig {
    /// Overlay for function tasks; unset picks default_local_overlay().
    std::optional<overlay::MasterConfig> overlay;
    bool gpu_host_cpu = true;
    std::string pilot_id = "pilot.0";
    /// Cores the pilot may bind; 0 means the host's hardware concurrency.
    unsigned host_cores = 0;
};

/// One master that holds no cores (it lives in the scheduler thread) and
/// one single-core worker per two pilot cores.
inline overlay::MasterConfig default_local_overlay(const PilotSpec& p) {
    overlay::MasterConfig c;
    c.n_masters = 1;
    c.master_cpus = 0;
    c.worker_cpus = 1;
    c.worker_gpus = 0;
    c.n_workers = static_cast<std::size_t>(std::max(1, p.total_cpus() / 2));
    c.workers_per_master = std::max<std::size_t>(c.n_workers, 1);
    return c;
}

/// Runs a campaign for real on the local host. Executables become
/// subprocesses and function tasks go to a threaded master/worker overlay;
/// simulated tasks just sleep. Placement and state live in the calling
/// thread, and everything else reports back through one message queue.
class LocalEngine {
public:
    LocalEngine(CampaignSpec spec, const TaskFunctions* functions = nullptr,
                CostModel cost = CostModel::summit_defaults(), LocalConfig cfg = {})
        : spec_(std::move(spec)), functions_(functions), cost_(std::move(cost)), cfg_(std::move(cfg)),
          slots_(spec_.resource) {
        spec_.resource.backend = Backend::local;
        acquire_pilot(spec_.resource, {cfg_.pilot_id, cfg_.gpu_host_cpu, cfg_.host_cores});
        auto v = validate_campaign(spec_);
        if (!v.empty())
            throw ValidationError(v.front().message);
        ov_cfg_ = cfg_.overlay.value_or(default_local_overlay(spec_.resource));
        auto ov = overlay::config_violations(ov_cfg_);
        if (!ov.empty())
            throw ValidationError(ov.front());
        check_overlay_fits(ov_cfg_, spec_.resource, cfg_.gpu_host_cpu);
        for (const auto& p : spec_.pipelines)
            states_.emplace_back(p, spec_.resource);
        started_.assign(states_.size(), false);
    }

    LocalEngine(const LocalEngine&) = delete;
    LocalEngine& operator=(const LocalEngine&) = delete;

    ~LocalEngine() { stop_everything(); }

    RunResult run() {
        t0_ = std::chrono::steady_clock::now();
        const PilotSpec& r = spec_.resource;
        const Resources all{r.nodes, r.total_cpus(), r.total_gpus()};
        record(0.0, Entity::pilot, cfg_.pilot_id, tr::acquired, all);
        record(now(), Entity::pilot, cfg_.pilot_id, tr::active, all);
        if (spec_.pipeline_mode == PipelineMode::sequential) {
            if (!states_.empty())
                start_pipeline(next_pipeline_++);
        } else {
            for (next_pipeline_ = 0; next_pipeline_ < states_.size(); ++next_pipeline_)
                start_pipeline(next_pipeline_);
        }
        maybe_finish();

        const auto deadline = t0_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                        std::chrono::duration<double>(r.walltime_s));
        while (!done_) {
            ready_.place(slots_, now(), [&](const ReadyEntry& e, const Placement& p) { on_placed(e, p); });
            if (done_)
                break;
            Msg m;
            if (!pop(deadline, m)) {
                on_walltime();
                break;
            }
            on_message(std::move(m));
        }

        RunResult out;
        out.pipelines = std::move(states_);
        out.trace = sink_.take();
        out.completions = std::move(completions_);
        out.workers = std::move(workers_);
        out.end_time = now();
        out.walltime_exceeded = walltime_hit_;
        return out;
    }

private:
    struct Msg {
        enum class Kind { task_done, fn_started, fn_done, worker_lost };
        Kind kind = Kind::task_done;
        std::string task_id;
        std::size_t worker = 0;
        std::size_t gen = 0;
        Outcome outcome = Outcome::done;
        std::string output;
        double busy_s = 0.0;

        static Msg of(Kind k, std::string id, std::size_t w = 0, std::size_t g = 0) {
            Msg m;
            m.kind = k;
            m.task_id = std::move(id);
            m.worker = w;
            m.gen = g;
            return m;
        }
    };

    struct JobControl {
        std::mutex m;
        std::condition_variable cv;
        bool cancel = false;
        pid_t pid = 0;
    };

    struct Job {
        std::size_t pipeline = 0;
        Resources res;
        std::thread thread;
        std::shared_ptr<JobControl> ctl;
    };

    struct OvTask {
        std::string id;
        std::size_t pipeline = 0;
        TaskDescriptor task;
        int dispatches = 0;
    };

    struct Inbox {
        std::mutex m;
        std::condition_variable cv;
        std::deque<OvTask> q;
        bool stop = false;
    };

    struct WorkerRt {
        std::string id;
        std::size_t master = 0;
        std::size_t slot_in_master = 0;
        Resources res;
        bool placed = false;
        bool up = false;
        bool busy = false;
        bool lost = false;
        double up_time = 0.0;
        std::vector<OvTask> assigned; // unfinished, in assignment order
        std::shared_ptr<Inbox> inbox = std::make_shared<Inbox>();
        std::thread thread;
    };

    struct MasterRt {
        std::string id;
        overlay::Master m;
        std::vector<std::size_t> members;
        Resources res;
        bool placed = false;
        bool up = false;
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

    double now() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

    void record(double t, Entity e, const std::string& id, std::string_view transition, Resources res = {}) {
        sink_.record(t, e, id, transition, res);
    }

    void post(Msg m) {
        {
            std::lock_guard lk(mq_mutex_);
            mq_.push_back(std::move(m));
        }
        mq_cv_.notify_one();
    }

    bool pop(std::chrono::steady_clock::time_point deadline, Msg& out) {
        std::unique_lock lk(mq_mutex_);
        if (!mq_cv_.wait_until(lk, deadline, [&] { return !mq_.empty(); }))
            return false;
        out = std::move(mq_.front());
        mq_.pop_front();
        return true;
    }

    Demand demand_of(const TaskDescriptor& t) const { return make_demand(t.cpus, t.gpus, t.nodes, cfg_.gpu_host_cpu); }

    static Resources totals(const Demand& d) { return {d.nodes, d.nodes * d.cpus, d.nodes * d.gpus}; }

    // -- pipelines ----------------------------------------------------------

    void start_pipeline(std::size_t i) {
        started_[i] = true;
        auto& st = states_[i];
        record(now(), Entity::pipeline, st.id(), tr::running);
        if (st.finished()) {
            record(now(), Entity::pipeline, st.id(), tr::done);
            on_pipeline_finished();
            return;
        }
        enter_stage(i);
    }

    void enter_stage(std::size_t i) {
        auto& st = states_[i];
        const double t = now();
        record(t, Entity::stage, stage_entity_id(st.spec(), st.current_stage_index()), tr::running);
        std::vector<OvTask> fn;
        for (const auto& id : st.next_ready_tasks()) {
            const TaskDescriptor& task = st.task(id);
            const Demand d = demand_of(task);
            record(t, Entity::task, id, tr::pending, totals(d));
            announced_.insert(id);
            if (task.kind == TaskKind::function)
                fn.push_back({id, i, task, 0});
            else
                ready_.push({id, static_cast<int>(i), d});
        }
        if (!fn.empty())
            overlay_submit(std::move(fn));
    }

    void close_stages(std::size_t i, const std::vector<std::size_t>& stages) {
        const auto& spec = states_[i].spec();
        for (std::size_t k = 0; k < stages.size(); ++k) {
            const std::string sid = stage_entity_id(spec, stages[k]);
            if (k > 0)
                record(now(), Entity::stage, sid, tr::running);
            record(now(), Entity::stage, sid, tr::done);
        }
    }

    void handle(std::size_t i, const CompletionEvent& ev) {
        auto& st = states_[i];
        switch (ev.kind) {
        case CompletionEvent::Kind::none: return;
        case CompletionEvent::Kind::stage_advanced:
            close_stages(i, ev.finished_stages);
            enter_stage(i);
            return;
        case CompletionEvent::Kind::pipeline_done:
            close_stages(i, ev.finished_stages);
            record(now(), Entity::pipeline, st.id(), tr::done);
            on_pipeline_finished();
            return;
        case CompletionEvent::Kind::pipeline_failed: {
            std::unordered_set<std::string> gone(ev.canceled.begin(), ev.canceled.end());
            ready_.erase_if([&](const ReadyEntry& e) { return e.owner == static_cast<int>(i) && gone.count(e.task_id); });
            overlay_withdraw(gone);
            for (const auto& id : ev.canceled)
                if (announced_.erase(id))
                    record(now(), Entity::task, id, tr::canceled);
            record(now(), Entity::stage, stage_entity_id(st.spec(), st.current_stage_index()), tr::failed);
            record(now(), Entity::pipeline, st.id(), tr::failed);
            on_pipeline_finished();
            return;
        }
        }
    }

    void on_pipeline_finished() {
        if (spec_.pipeline_mode == PipelineMode::sequential && next_pipeline_ < states_.size())
            start_pipeline(next_pipeline_++);
    }

    void complete(std::size_t i, const std::string& id, Resources res, Outcome outcome, std::string output) {
        record(now(), Entity::task, id, outcome == Outcome::done ? tr::done : tr::failed, res);
        announced_.erase(id);
        completions_.push_back({now(), id, i, outcome == Outcome::done ? TaskState::done : TaskState::failed});
        handle(i, states_[i].on_task_complete(id, outcome, std::move(output)));
    }

    bool all_finished() const {
        for (const auto& s : states_)
            if (!s.finished())
                return false;
        return next_pipeline_ >= states_.size();
    }

    void maybe_finish() {
        if (done_ || !all_finished() || !jobs_.empty() || ov_)
            return;
        const PilotSpec& r = spec_.resource;
        record(now(), Entity::pilot, cfg_.pilot_id, tr::released, {r.nodes, r.total_cpus(), r.total_gpus()});
        done_ = true;
    }

    // -- tasks --------------------------------------------------------------

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
        record(now(), Entity::task, e.task_id, tr::scheduled, res);
        record(now(), Entity::task, e.task_id, tr::running, res);
        Job job{i, res, {}, std::make_shared<JobControl>()};
        job.thread = launch(st.task(e.task_id), job.ctl);
        jobs_.emplace(e.task_id, std::move(job));
    }

    std::thread launch(const TaskDescriptor& task, std::shared_ptr<JobControl> ctl) {
        if (task.kind == TaskKind::executable) {
            const std::vector<std::string> env{"ENSEMBLE_TASK_ID=" + task.task_id,
                                               "ENSEMBLE_SEED=" + std::to_string(spec_.seed)};
            return std::thread([this, task, ctl, env] {
                Msg m = Msg::of(Msg::Kind::task_done, task.task_id);
                try {
                    auto r = run_shell(
                        task.entrypoint, task.payload, env,
                        [&](pid_t pid) {
                            std::lock_guard lk(ctl->m);
                            ctl->pid = pid;
                            if (ctl->cancel)
                                kill(-pid, SIGKILL);
                        },
                        [&] {
                            std::lock_guard lk(ctl->m);
                            ctl->pid = 0;
                        });
                    m.outcome = r.exit_code == 0 ? Outcome::done : Outcome::failed;
                    m.output = std::move(r.out);
                } catch (const std::exception&) {
                    m.outcome = Outcome::failed;
                }
                post(std::move(m));
            });
        }
        const double d = task_duration(task, cost_, spec_.seed, spec_.time_scale);
        return std::thread([this, task, ctl, d] {
            {
                std::unique_lock lk(ctl->m);
                ctl->cv.wait_for(lk, std::chrono::duration<double>(d), [&] { return ctl->cancel; });
                if (ctl->cancel)
                    return;
            }
            Msg m = Msg::of(Msg::Kind::task_done, task.task_id);
            try {
                m.output = functions_ ? functions_->run(task, TaskContext{spec_.seed}) : std::string();
            } catch (const std::exception&) {
                m.outcome = Outcome::failed;
            }
            post(std::move(m));
        });
    }

    void on_message(Msg m) {
        switch (m.kind) {
        case Msg::Kind::task_done: on_task_done(m); break;
        case Msg::Kind::fn_started: on_fn_started(m); break;
        case Msg::Kind::fn_done: on_fn_done(m); break;
        case Msg::Kind::worker_lost: on_worker_lost(m); break;
        }
        maybe_shutdown_overlay();
        maybe_finish();
    }

    void on_task_done(Msg& m) {
        auto it = jobs_.find(m.task_id);
        if (it == jobs_.end())
            return;
        Job job = std::move(it->second);
        jobs_.erase(it);
        job.thread.join();
        slots_.release(m.task_id);
        complete(job.pipeline, m.task_id, job.res, m.outcome, std::move(m.output));
    }

    // -- overlay ------------------------------------------------------------

    void start_overlay() {
        const auto& c = ov_cfg_;
        OverlayRt ov;
        ov.gen = overlay_gen_++;
        const std::string g = std::to_string(ov.gen);
        for (std::size_t m = 0; m < c.n_masters; ++m) {
            const std::string id = "master." + g + "." + std::to_string(m);
            ov.masters.push_back({id, overlay::Master(id, c.policy), {}, {}, false, false, {}});
        }
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
    }

    void overlay_submit(std::vector<OvTask> tasks) {
        if (!ov_)
            start_overlay();
        auto& ov = *ov_;
        ov.outstanding += tasks.size();
        for (auto& b : overlay::partition_bulks(tasks, ov_cfg_.bulk_size, ov.next_bulk)) {
            const std::size_t m = ov.next_master++ % ov.masters.size();
            ++ov.next_bulk;
            if (ov.masters[m].placed)
                record(now(), Entity::master, ov.masters[m].id, tr::bulk_created);
            ov.masters[m].bulks.push_back(std::move(b));
        }
        for (std::size_t m = 0; m < ov.masters.size(); ++m)
            try_dispatch(m);
    }

    void service_placed(std::size_t k, Resources res) {
        auto& ov = *ov_;
        if (k < ov.masters.size()) {
            auto& m = ov.masters[k];
            m.placed = true;
            m.up = true;
            m.res = res;
            record(now(), Entity::master, m.id, tr::scheduled, res);
            for (std::size_t b = 0; b < m.bulks.size(); ++b)
                record(now(), Entity::master, m.id, tr::bulk_created);
            record(now(), Entity::master, m.id, tr::running, res);
            try_dispatch(k);
            return;
        }
        const std::size_t wi = k - ov.masters.size();
        auto& w = ov.workers[wi];
        w.placed = true;
        w.res = res;
        record(now(), Entity::worker, w.id, tr::scheduled, res);
        w.thread = std::thread([this, inbox = w.inbox, wi, gen = ov.gen] { worker_loop(*inbox, wi, gen); });
        w.up = true;
        w.up_time = now();
        record(w.up_time, Entity::worker, w.id, tr::running, res);
        record(w.up_time, Entity::worker, w.id, tr::idle, res);
        auto& m = ov.masters[w.master];
        w.slot_in_master = m.m.add_worker(w.id);
        m.members.push_back(wi);
        try_dispatch(w.master);
    }

    void worker_loop(Inbox& inbox, std::size_t wi, std::size_t gen) {
        const TaskContext ctx{spec_.seed};
        while (true) {
            OvTask t;
            {
                std::unique_lock lk(inbox.m);
                inbox.cv.wait(lk, [&] { return inbox.stop || !inbox.q.empty(); });
                if (inbox.stop)
                    return;
                t = std::move(inbox.q.front());
                inbox.q.pop_front();
            }
            post(Msg::of(Msg::Kind::fn_started, t.id, wi, gen));
            const auto start = std::chrono::steady_clock::now();
            Msg done = Msg::of(Msg::Kind::fn_done, t.id, wi, gen);
            try {
                done.output = functions_ ? functions_->run(t.task, ctx) : std::string();
            } catch (const WorkerLost&) {
                post(Msg::of(Msg::Kind::worker_lost, t.id, wi, gen));
                return;
            } catch (const std::exception&) {
                done.outcome = Outcome::failed;
            }
            done.busy_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            post(std::move(done));
        }
    }

    bool master_has_future_workers(std::size_t mi) const {
        for (const auto& w : ov_->workers)
            if (w.master == mi && !w.placed)
                return true;
        return false;
    }

    void try_dispatch(std::size_t mi) {
        auto& ov = *ov_;
        auto& m = ov.masters[mi];
        if (!m.up || m.bulks.empty())
            return;
        if (m.m.alive_count() == 0) {
            if (!m.members.empty() && !master_has_future_workers(mi))
                fail_master_backlog(mi);
            return;
        }
        const bool deal_all = m.m.policy() == overlay::DispatchPolicy::round_robin;
        if (!deal_all && !m.m.has_idle_worker())
            return;
        do {
            auto bulk = std::move(m.bulks.front());
            m.bulks.pop_front();
            auto who = m.m.assign(bulk.tasks.size());
            for (std::size_t k = 0; k < who.size(); ++k)
                hand_to_worker(m.members[who[k]], std::move(bulk.tasks[k]));
        } while (!m.bulks.empty() && (deal_all || m.m.has_idle_worker()));
    }

    void hand_to_worker(std::size_t wi, OvTask task) {
        auto& w = ov_->workers[wi];
        auto& st = states_[task.pipeline];
        if (st.task_state(task.id) == TaskState::pending) {
            st.mark_scheduled(task.id);
            record(now(), Entity::task, task.id, tr::scheduled, w.res);
        }
        ++task.dispatches;
        w.assigned.push_back(task);
        {
            std::lock_guard lk(w.inbox->m);
            w.inbox->q.push_back(std::move(task));
        }
        w.inbox->cv.notify_one();
    }

    OvTask* find_assigned(WorkerRt& w, const std::string& id) {
        for (auto& t : w.assigned)
            if (t.id == id)
                return &t;
        return nullptr;
    }

    void on_fn_started(const Msg& m) {
        if (!ov_ || ov_->gen != m.gen)
            return;
        auto& w = ov_->workers[m.worker];
        OvTask* t = find_assigned(w, m.task_id);
        if (!t || states_[t->pipeline].task_state(t->id) != TaskState::scheduled)
            return;
        states_[t->pipeline].mark_running(t->id);
        if (!w.busy) {
            record(now(), Entity::worker, w.id, tr::busy, w.res);
            w.busy = true;
        }
        record(now(), Entity::task, t->id, tr::running, w.res);
    }

    void on_fn_done(Msg& m) {
        if (!ov_ || ov_->gen != m.gen)
            return;
        auto& ov = *ov_;
        auto& w = ov.workers[m.worker];
        auto it = std::find_if(w.assigned.begin(), w.assigned.end(), [&](const OvTask& t) { return t.id == m.task_id; });
        if (it == w.assigned.end())
            return;
        const OvTask task = std::move(*it);
        w.assigned.erase(it);
        const std::size_t mi = w.master;
        ov.masters[mi].m.finished(w.slot_in_master, m.busy_s);
        --ov.outstanding;
        const Resources res = w.res;
        if (w.assigned.empty() && w.busy) {
            record(now(), Entity::worker, w.id, tr::idle, w.res);
            w.busy = false;
        }
        if (states_[task.pipeline].task_state(task.id) == TaskState::running)
            complete(task.pipeline, task.id, res, m.outcome, std::move(m.output));
        if (ov_)
            try_dispatch(mi);
    }

    /// Brings a task to running (recording the steps) and fails it.
    void force_fail(const OvTask& t, Resources res) {
        auto& st = states_[t.pipeline];
        TaskState s = st.task_state(t.id);
        if (is_terminal(s))
            return;
        if (s == TaskState::pending) {
            st.mark_scheduled(t.id);
            record(now(), Entity::task, t.id, tr::scheduled, res);
            s = TaskState::scheduled;
        }
        if (s == TaskState::scheduled) {
            st.mark_running(t.id);
            record(now(), Entity::task, t.id, tr::running, res);
        }
        complete(t.pipeline, t.id, res, Outcome::failed, {});
    }

    void on_worker_lost(const Msg& m) {
        if (!ov_ || ov_->gen != m.gen)
            return;
        auto& ov = *ov_;
        auto& w = ov.workers[m.worker];
        w.lost = true;
        w.busy = false;
        if (w.thread.joinable())
            w.thread.join();
        record(now(), Entity::worker, w.id, tr::failed, w.res);
        slots_.release(w.id);
        const std::size_t mi = w.master;
        ov.masters[mi].m.remove_worker(w.slot_in_master);
        const Resources res = w.res;
        std::vector<OvTask> orphans = std::move(w.assigned);
        w.assigned.clear();

        // Each task gets one second chance on another worker of the same
        // master; a task orphaned twice fails.
        std::vector<OvTask> again;
        for (auto& t : orphans) {
            auto& st = states_[t.pipeline];
            const TaskState s = st.task_state(t.id);
            if (is_terminal(s)) {
                --ov.outstanding;
                continue;
            }
            if (t.dispatches >= 2) {
                --ov.outstanding;
                force_fail(t, res);
                if (!ov_)
                    return;
                continue;
            }
            if (s == TaskState::running) {
                st.requeue(t.id);
                record(now(), Entity::task, t.id, tr::pending, res);
            }
            again.push_back(std::move(t));
        }
        std::erase_if(again, [&](const OvTask& t) {
            const bool gone = is_terminal(states_[t.pipeline].task_state(t.id));
            if (gone)
                --ov.outstanding;
            return gone;
        });
        if (!again.empty()) {
            auto& master = ov.masters[mi];
            master.bulks.push_front({ov.next_bulk++, std::move(again)});
            record(now(), Entity::master, master.id, tr::bulk_created);
        }
        try_dispatch(mi);
    }

    /// A master whose workers are all gone fails everything it still holds.
    void fail_master_backlog(std::size_t mi) {
        auto bulks = std::move(ov_->masters[mi].bulks);
        ov_->masters[mi].bulks.clear();
        const Resources res = ov_->masters[mi].res;
        for (auto& b : bulks)
            for (auto& t : b.tasks) {
                if (!ov_)
                    return;
                --ov_->outstanding;
                force_fail(t, res);
            }
    }

    void overlay_withdraw(const std::unordered_set<std::string>& gone) {
        if (!ov_ || gone.empty())
            return;
        auto& ov = *ov_;
        for (auto& m : ov.masters) {
            for (auto& b : m.bulks) {
                const auto before = b.tasks.size();
                std::erase_if(b.tasks, [&](const OvTask& t) { return gone.count(t.id) != 0; });
                ov.outstanding -= before - b.tasks.size();
            }
            std::erase_if(m.bulks, [](const auto& b) { return b.tasks.empty(); });
        }
        for (auto& w : ov.workers) {
            // Only tasks still in the inbox are withdrawn; one the worker
            // has already taken stays assigned until it reports back.
            std::unordered_set<std::string> removed;
            {
                std::lock_guard lk(w.inbox->m);
                std::erase_if(w.inbox->q, [&](const OvTask& t) {
                    if (!gone.count(t.id))
                        return false;
                    removed.insert(t.id);
                    return true;
                });
            }
            if (removed.empty())
                continue;
            std::erase_if(w.assigned, [&](const OvTask& t) { return removed.count(t.id) != 0; });
            ov.masters[w.master].m.withdraw(w.slot_in_master, removed.size());
            ov.outstanding -= removed.size();
        }
    }

    void maybe_shutdown_overlay() {
        if (ov_ && ov_->outstanding == 0)
            shutdown_overlay(tr::done);
    }

    void shutdown_overlay(std::string_view how) {
        auto& ov = *ov_;
        for (auto& w : ov.workers) {
            {
                std::lock_guard lk(w.inbox->m);
                w.inbox->stop = true;
            }
            w.inbox->cv.notify_all();
        }
        for (auto& w : ov.workers) {
            if (w.thread.joinable())
                w.thread.join();
            if (!w.placed)
                continue;
            WorkerSummary s{w.id, ov.masters[w.master].id, 0, 0.0, 0.0};
            if (w.up) {
                const auto& ws = ov.masters[w.master].m.worker(w.slot_in_master);
                s.completed = ws.completed;
                s.busy_time_s = ws.busy_time_s;
                s.idle_time_s = std::max(0.0, (now() - w.up_time) - ws.busy_time_s);
            }
            workers_.push_back(std::move(s));
            if (w.lost)
                continue;
            record(now(), Entity::worker, w.id, how, w.res);
            slots_.release(w.id);
        }
        for (auto& m : ov.masters)
            if (m.placed) {
                record(now(), Entity::master, m.id, how, m.res);
                slots_.release(m.id);
            }
        ready_.erase_if([](const ReadyEntry& e) { return e.owner < 0; });
        ov_.reset();
    }

    // -- walltime -----------------------------------------------------------

    void on_walltime() {
        walltime_hit_ = true;
        std::vector<std::string> ids;
        for (const auto& [id, job] : jobs_)
            ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        for (const auto& id : ids) {
            auto& job = jobs_.at(id);
            record(now(), Entity::task, id, tr::canceled, job.res);
            announced_.erase(id);
            slots_.release(id);
        }
        if (ov_)
            for (auto& w : ov_->workers)
                for (const auto& t : w.assigned)
                    if (states_[t.pipeline].task_state(t.id) == TaskState::running && announced_.erase(t.id))
                        record(now(), Entity::task, t.id, tr::canceled, w.res);
        for (std::size_t i = 0; i < states_.size(); ++i) {
            auto& st = states_[i];
            const bool was_active = started_[i] && !st.finished();
            for (const auto& id : st.cancel())
                if (announced_.erase(id))
                    record(now(), Entity::task, id, tr::canceled);
            if (was_active) {
                record(now(), Entity::stage, stage_entity_id(st.spec(), st.current_stage_index()), tr::canceled);
                record(now(), Entity::pipeline, st.id(), tr::canceled);
            }
        }
        stop_jobs();
        if (ov_)
            shutdown_overlay(tr::canceled);
        const PilotSpec& r = spec_.resource;
        record(now(), Entity::pilot, cfg_.pilot_id, tr::released, {r.nodes, r.total_cpus(), r.total_gpus()});
        done_ = true;
    }

    void stop_jobs() {
        for (auto& [id, job] : jobs_) {
            std::lock_guard lk(job.ctl->m);
            job.ctl->cancel = true;
            if (job.ctl->pid > 0)
                kill(-job.ctl->pid, SIGKILL);
            job.ctl->cv.notify_all();
        }
        for (auto& [id, job] : jobs_)
            if (job.thread.joinable())
                job.thread.join();
        jobs_.clear();
    }

    void stop_everything() {
        stop_jobs();
        if (ov_) {
            for (auto& w : ov_->workers) {
                {
                    std::lock_guard lk(w.inbox->m);
                    w.inbox->stop = true;
                }
                w.inbox->cv.notify_all();
            }
            for (auto& w : ov_->workers)
                if (w.thread.joinable())
                    w.thread.join();
        }
    }

    CampaignSpec spec_;
    const TaskFunctions* functions_;
    CostModel cost_;
    LocalConfig cfg_;
    overlay::MasterConfig ov_cfg_;
    SlotMap slots_;
    TraceSink sink_;
    ReadyQueue ready_;
    std::vector<PipelineState> states_;
    std::vector<bool> started_;
    std::size_t next_pipeline_ = 0;
    std::chrono::steady_clock::time_point t0_;
    bool done_ = false;
    bool walltime_hit_ = false;
    std::unordered_map<std::string, Job> jobs_;
    std::unordered_set<std::string> announced_;
    std::vector<Completion> completions_;
    std::optional<OverlayRt> ov_;
    std::size_t overlay_gen_ = 0;
    std::vector<WorkerSummary> workers_;
    std::mutex mq_mutex_;
    std::condition_variable mq_cv_;
    std::deque<Msg> mq_;
};

inline RunResult run_local(const CampaignSpec& spec, const TaskFunctions* functions = nullptr,
                           const CostModel& cost = CostModel::summit_defaults(), const LocalConfig& cfg = {}) {
    return LocalEngine(spec, functions, cost, cfg).run();
}

} // namespace ensemble
