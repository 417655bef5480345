#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ensemble/pilot/spec.hpp"
#include "ensemble/trace/event.hpp"

namespace ensemble::metrics {

/// Trace reduced to intervals: pilot lifetimes and task running spans.
struct Timeline {
    struct Pilot {
        std::string id;
        double acquired = 0.0;
        double active = 0.0;
        double released = 0.0;
        PilotSpec shape;
    };
    struct Run {
        std::string id;
        double start = 0.0;
        double end = 0.0;
        double node_eq = 0.0;
        Resources res;
        std::string outcome;
    };
    /// +1/-1 changes in the number of tasks waiting (pending or scheduled).
    struct Step {
        double t;
        int delta;
    };

    std::vector<Pilot> pilots;
    std::vector<Run> runs;
    std::vector<Step> waiting;
    double t_min = 0.0;
    double t_max = 0.0;
};

/// Node-equivalents of a running task whose trace resources are totals
/// over its placement.
inline double run_share(const Resources& res, const PilotSpec& shape) {
    const int n = std::max(res.nodes, 1);
    return node_share(Demand{n, res.cpus / n, res.gpus / n}, shape);
}

inline Timeline build_timeline(const std::vector<TraceEvent>& trace) {
    Timeline tl;
    if (trace.empty())
        return tl;
    tl.t_min = trace.front().t;
    tl.t_max = trace.front().t;
    for (const auto& ev : trace) {
        tl.t_min = std::min(tl.t_min, ev.t);
        tl.t_max = std::max(tl.t_max, ev.t);
    }

    struct Open {
        std::string state;
        double since = 0.0;
        Resources res;
    };
    std::unordered_map<std::string, Open> tasks;
    std::unordered_map<std::string, std::size_t> pilot_index;
    PilotSpec shape{1, 1, 0};
    int live_pilots = 0;

    auto close_segment = [&](double t_end) {
        for (auto& [id, o] : tasks) {
            if (o.state == tr::running)
                tl.runs.push_back({id, o.since, t_end, run_share(o.res, shape), o.res, ""});
            if (o.state == tr::pending || o.state == tr::scheduled)
                tl.waiting.push_back({t_end, -1});
        }
        tasks.clear();
    };

    double last_t = tl.t_min;
    for (const auto& ev : trace) {
        if (ev.entity == Entity::pilot) {
            if (ev.transition == tr::acquired) {
                if (live_pilots == 0 && !tasks.empty())
                    close_segment(last_t);
                ++live_pilots;
                int nodes = std::max(ev.res.nodes, 1);
                shape = PilotSpec{nodes, ev.res.cpus / nodes, ev.res.gpus / nodes};
                pilot_index[ev.id] = tl.pilots.size();
                tl.pilots.push_back({ev.id, ev.t, ev.t, -1.0, shape});
            } else if (auto it = pilot_index.find(ev.id); it != pilot_index.end()) {
                auto& p = tl.pilots[it->second];
                if (ev.transition == tr::active)
                    p.active = ev.t;
                else if (ev.transition == tr::released) {
                    p.released = ev.t;
                    --live_pilots;
                    pilot_index.erase(it);
                }
            }
        } else if (ev.entity == Entity::task) {
            auto& o = tasks[ev.id];
            const bool was_waiting = o.state == tr::pending || o.state == tr::scheduled;
            const bool now_waiting = ev.transition == tr::pending || ev.transition == tr::scheduled;
            if (was_waiting != now_waiting)
                tl.waiting.push_back({ev.t, now_waiting ? 1 : -1});
            if (o.state == tr::running && ev.transition != tr::running) {
                tl.runs.push_back({ev.id, o.since, ev.t, run_share(o.res, shape), o.res, ev.transition});
            }
            o.state = ev.transition;
            o.since = ev.t;
            o.res = ev.res;
        }
        last_t = ev.t;
    }
    close_segment(tl.t_max);
    for (auto& p : tl.pilots)
        if (p.released < 0)
            p.released = tl.t_max;
    return tl;
}

inline double overlap(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

struct UtilizationBucket {
    double t0 = 0.0;
    double busy_node_fraction = 0.0;
    double busy_cpu_fraction = 0.0;
    double busy_gpu_fraction = 0.0;
};

struct UtilizationSeries {
    double bucket_width_s = 0.0;
    std::vector<UtilizationBucket> buckets;
};

/// Fraction of available node-seconds covered by running tasks, per
/// bucket. Capacity counts each pilot from the end of its bootstrap to its
/// release. A task covers its dominant-resource share of a node; cpu and
/// gpu columns give the per-slot-class fractions. A non-positive width
/// selects makespan/200.
inline UtilizationSeries utilization(const std::vector<TraceEvent>& trace, double bucket_width_s = 0.0) {
    UtilizationSeries series;
    auto tl = build_timeline(trace);
    if (tl.pilots.empty())
        return series;
    double t0 = tl.pilots.front().active, t1 = tl.pilots.front().released;
    for (const auto& p : tl.pilots) {
        t0 = std::min(t0, p.active);
        t1 = std::max(t1, p.released);
    }
    if (!(t1 > t0))
        return series;
    const double w = bucket_width_s > 0.0 ? bucket_width_s : (t1 - t0) / 200.0;
    const auto n = static_cast<std::size_t>(std::ceil((t1 - t0) / w - 1e-9));
    series.bucket_width_s = w;
    series.buckets.resize(n);
    std::vector<double> cap_nodes(n, 0.0), cap_cpus(n, 0.0), cap_gpus(n, 0.0);
    std::vector<double> busy_nodes(n, 0.0), busy_cpus(n, 0.0), busy_gpus(n, 0.0);

    auto spread = [&](double a, double b, auto&& add) {
        if (!(b > a))
            return;
        auto first = static_cast<std::size_t>(std::max(0.0, std::floor((a - t0) / w)));
        for (std::size_t i = first; i < n; ++i) {
            double b0 = t0 + static_cast<double>(i) * w;
            if (b0 >= b)
                break;
            add(i, overlap(a, b, b0, b0 + w));
        }
    };
    for (const auto& p : tl.pilots)
        spread(p.active, p.released, [&](std::size_t i, double dt) {
            cap_nodes[i] += p.shape.nodes * dt;
            cap_cpus[i] += p.shape.total_cpus() * dt;
            cap_gpus[i] += p.shape.total_gpus() * dt;
        });
    for (const auto& r : tl.runs)
        spread(r.start, r.end, [&](std::size_t i, double dt) {
            busy_nodes[i] += r.node_eq * dt;
            busy_cpus[i] += r.res.cpus * dt;
            busy_gpus[i] += r.res.gpus * dt;
        });
    auto frac = [](double busy, double cap) { return cap > 0.0 ? std::clamp(busy / cap, 0.0, 1.0) : 0.0; };
    for (std::size_t i = 0; i < n; ++i)
        series.buckets[i] = {t0 + static_cast<double>(i) * w, frac(busy_nodes[i], cap_nodes[i]),
                             frac(busy_cpus[i], cap_cpus[i]), frac(busy_gpus[i], cap_gpus[i])};
    return series;
}

struct Throughput {
    double overall = 0.0;
    /// Median of the full windows' rates; the steady-state rate.
    double sustained = 0.0;
    std::size_t completions = 0;
    double first_start = 0.0;
    double last_completion = 0.0;
    double window_s = 0.0;
    std::vector<std::pair<double, double>> windows; // (window start, completions/s)
};

/// Completion rate of the tasks of one stage. Tasks belong to a stage when
/// their id starts with "<stage_tag>.". Absent when the stage has no
/// completion. A non-positive window selects span/50.
inline std::optional<Throughput> stage_throughput(const std::vector<TraceEvent>& trace,
                                                  const std::string& stage_tag, double window_s = 0.0) {
    const std::string prefix = stage_tag + ".";
    std::vector<double> ends;
    double first_start = 0.0;
    bool have_start = false;
    for (const auto& ev : trace) {
        if (ev.entity != Entity::task || ev.id.compare(0, prefix.size(), prefix) != 0)
            continue;
        if (ev.transition == tr::running && (!have_start || ev.t < first_start)) {
            first_start = ev.t;
            have_start = true;
        } else if (ev.transition == tr::done) {
            ends.push_back(ev.t);
        }
    }
    if (ends.empty() || !have_start)
        return std::nullopt;
    std::sort(ends.begin(), ends.end());
    Throughput th;
    th.completions = ends.size();
    th.first_start = first_start;
    th.last_completion = ends.back();
    const double span = th.last_completion - first_start;
    if (!(span > 0.0))
        return std::nullopt;
    th.overall = static_cast<double>(ends.size()) / span;
    th.window_s = window_s > 0.0 ? window_s : span / 50.0;
    const auto n_windows = static_cast<std::size_t>(std::ceil(span / th.window_s - 1e-9));
    std::vector<double> rates;
    std::size_t j = 0;
    for (std::size_t i = 0; i < n_windows; ++i) {
        const double w0 = first_start + static_cast<double>(i) * th.window_s;
        const double w1 = w0 + th.window_s;
        const bool last_window = i + 1 == n_windows;
        std::size_t count = 0;
        while (j < ends.size() && (last_window || ends[j] < w1)) {
            ++count;
            ++j;
        }
        const double width = std::min(w1, th.last_completion) - w0;
        th.windows.emplace_back(w0, static_cast<double>(count) / width);
        if (w1 <= th.last_completion)
            rates.push_back(static_cast<double>(count) / th.window_s);
    }
    if (rates.empty())
        th.sustained = th.overall;
    else {
        std::sort(rates.begin(), rates.end());
        const std::size_t m = rates.size();
        th.sustained = m % 2 ? rates[m / 2] : 0.5 * (rates[m / 2 - 1] + rates[m / 2]);
    }
    return th;
}

/// Unused node-seconds of a run, split by cause:
///  - bootstrap: between pilot acquisition and the agent becoming active;
///  - scheduling: unused capacity while some task is ready but not yet
///    running (pending or scheduled);
///  - idle: everything else (stage barriers with nothing ready, the
///    draining tail).
struct Overhead {
    double makespan_s = 0.0;
    double capacity_node_s = 0.0;
    double busy_node_s = 0.0;
    double total_s = 0.0;
    double bootstrap_s = 0.0;
    double scheduling_s = 0.0;
    double idle_s = 0.0;
    double fraction_of_makespan = 0.0;
    /// Scheduling overhead per finished task, in node-milliseconds.
    double per_task_ms = 0.0;
    std::size_t tasks = 0;
    /// Busy fraction of post-bootstrap capacity.
    double utilization = 0.0;
};

inline Overhead overhead(const std::vector<TraceEvent>& trace) {
    Overhead o;
    auto tl = build_timeline(trace);
    if (tl.pilots.empty())
        return o;

    struct Delta {
        double t;
        int wait;
        double run;
        double cap;
    };
    std::vector<Delta> deltas;
    double first = tl.pilots.front().acquired, last = tl.pilots.front().released;
    double active_cap = 0.0;
    for (const auto& p : tl.pilots) {
        first = std::min(first, p.acquired);
        last = std::max(last, p.released);
        o.capacity_node_s += p.shape.nodes * (p.released - p.acquired);
        o.bootstrap_s += p.shape.nodes * (p.active - p.acquired);
        active_cap += p.shape.nodes * (p.released - p.active);
        deltas.push_back({p.active, 0, 0.0, static_cast<double>(p.shape.nodes)});
        deltas.push_back({p.released, 0, 0.0, -static_cast<double>(p.shape.nodes)});
    }
    for (const auto& r : tl.runs) {
        o.busy_node_s += r.node_eq * (r.end - r.start);
        deltas.push_back({r.start, 0, r.node_eq, 0.0});
        deltas.push_back({r.end, 0, -r.node_eq, 0.0});
        if (r.outcome == tr::done || r.outcome == tr::failed)
            ++o.tasks;
    }
    for (const auto& w : tl.waiting)
        deltas.push_back({w.t, w.delta, 0.0, 0.0});
    std::stable_sort(deltas.begin(), deltas.end(), [](const Delta& a, const Delta& b) { return a.t < b.t; });

    int waiting = 0;
    double running = 0.0, cap = 0.0;
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        waiting += deltas[i].wait;
        running += deltas[i].run;
        cap += deltas[i].cap;
        if (i + 1 < deltas.size() && waiting > 0) {
            const double dt = deltas[i + 1].t - deltas[i].t;
            o.scheduling_s += std::max(0.0, cap - running) * dt;
        }
    }
    o.makespan_s = last - first;
    o.total_s = std::max(0.0, o.capacity_node_s - o.busy_node_s);
    o.idle_s = std::max(0.0, o.total_s - o.bootstrap_s - o.scheduling_s);
    o.fraction_of_makespan = o.capacity_node_s > 0.0 ? o.total_s / o.capacity_node_s : 0.0;
    o.per_task_ms = o.tasks ? 1e3 * o.scheduling_s / static_cast<double>(o.tasks) : 0.0;
    o.utilization = active_cap > 0.0 ? o.busy_node_s / active_cap : 0.0;
    return o;
}

} // namespace ensemble::metrics
