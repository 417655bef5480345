#include <sstream>

#include <gtest/gtest.h>

#include "ensemble/engine/sim.hpp"
#include "ensemble/metrics.hpp"
#include "ensemble/trace/jsonl.hpp"
#include "ensemble/trace/sink.hpp"
#include "support.hpp"

using namespace ensemble;
using test::fixed_tasks;

namespace {

std::vector<TraceEvent> pilot_span(const std::string& id, int nodes, double t0, double t1, double active = -1) {
    return {{t0, Entity::pilot, id, "acquired", {nodes, nodes, 0}},
            {active < 0 ? t0 : active, Entity::pilot, id, "active", {nodes, nodes, 0}},
            {t1, Entity::pilot, id, "released", {nodes, nodes, 0}}};
}

void add_run(std::vector<TraceEvent>& tr, const std::string& id, double start, double end, int nodes = 1) {
    Resources r{nodes, nodes, 0};
    tr.push_back({start, Entity::task, id, "pending", {}});
    tr.push_back({start, Entity::task, id, "scheduled", r});
    tr.push_back({start, Entity::task, id, "running", r});
    tr.push_back({end, Entity::task, id, "done", r});
}

std::vector<TraceEvent> sorted_by_time(std::vector<TraceEvent> tr) {
    std::stable_sort(tr.begin(), tr.end(), [](const TraceEvent& a, const TraceEvent& b) { return a.t < b.t; });
    return tr;
}

EngineConfig on_pilot(const std::string& id) {
    EngineConfig c;
    c.pilot_id = id;
    return c;
}

} // namespace

TEST(Sink, LegalChainAccepted) {
    TraceSink sink;
    sink.record(0, Entity::task, "t", "pending");
    sink.record(0, Entity::task, "t", "scheduled");
    sink.record(0, Entity::task, "t", "running");
    EXPECT_NO_THROW(sink.record(1, Entity::task, "t", "done"));
    EXPECT_EQ(sink.size(), 4u);
}

TEST(Sink, PendingToDoneRejected) {
    TraceSink sink;
    sink.record(0, Entity::task, "t", "pending");
    EXPECT_THROW(sink.record(1, Entity::task, "t", "done"), TraceError);
}

TEST(Sink, FlagPolicyKeepsEvent) {
    TraceSink sink(TraceSink::Policy::flag);
    sink.record(0, Entity::task, "t", "pending");
    sink.record(1, Entity::task, "t", "done");
    EXPECT_EQ(sink.size(), 2u);
    EXPECT_EQ(sink.flagged().size(), 1u);
}

TEST(Sink, BackwardsTimeRejected) {
    TraceSink sink;
    sink.record(5, Entity::task, "t", "pending");
    EXPECT_THROW(sink.record(4, Entity::task, "t", "scheduled"), TraceError);
}

TEST(Sink, MillionEventsRetrievableInOrder) {
    TraceSink sink;
    sink.reserve(1000000);
    for (int i = 0; i < 250000; ++i) {
        const std::string id = "t" + std::to_string(i);
        const double t = i;
        sink.record(t, Entity::task, id, "pending");
        sink.record(t, Entity::task, id, "scheduled");
        sink.record(t, Entity::task, id, "running");
        sink.record(t + 1, Entity::task, id, "done");
    }
    auto ev = sink.snapshot();
    ASSERT_EQ(ev.size(), 1000000u);
    EXPECT_EQ(ev[4].id, "t1");
    EXPECT_EQ(ev.back().transition, "done");
    EXPECT_EQ(ev.back().id, "t249999");
}

TEST(Jsonl, RoundTripAndLineNumbers) {
    auto r = run_executor(test::pilot(2, 2, 0), fixed_tasks("t", 5, 1.5));
    std::stringstream ss;
    write_jsonl(ss, r.trace);
    auto back = read_jsonl(ss);
    EXPECT_EQ(back, r.trace);

    std::stringstream bad;
    write_jsonl(bad, {r.trace[0], r.trace[1]});
    bad << "{\"t\": oops}\n";
    try {
        read_jsonl(bad);
        FAIL() << "corrupt line accepted";
    } catch (const InputError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Utilization, NoTasksAllZero) {
    auto s = metrics::utilization(pilot_span("p", 4, 0, 10), 1.0);
    ASSERT_EQ(s.buckets.size(), 10u);
    for (auto& b : s.buckets)
        EXPECT_EQ(b.busy_node_fraction, 0.0);
}

TEST(Utilization, WholePilotWholeRunIsOne) {
    auto tr = pilot_span("p", 2, 0, 10);
    add_run(tr, "big", 0, 10, 2);
    auto s = metrics::utilization(sorted_by_time(tr), 2.0);
    ASSERT_EQ(s.buckets.size(), 5u);
    for (auto& b : s.buckets)
        EXPECT_DOUBLE_EQ(b.busy_node_fraction, 1.0);
}

TEST(Utilization, OneOfTwoNodesForHalfOfEachBucket) {
    auto tr = pilot_span("p", 2, 0, 4);
    for (int i = 0; i < 4; ++i)
        add_run(tr, "t" + std::to_string(i), i, i + 0.5);
    auto s = metrics::utilization(sorted_by_time(tr), 1.0);
    ASSERT_EQ(s.buckets.size(), 4u);
    for (auto& b : s.buckets)
        EXPECT_DOUBLE_EQ(b.busy_node_fraction, 0.25);
}

TEST(Utilization, DefaultWidthIsMakespanOverTwoHundred) {
    auto r = run_executor(test::pilot(2, 1, 0), fixed_tasks("t", 4, 5.0));
    auto s = metrics::utilization(r.trace);
    EXPECT_EQ(s.buckets.size(), 200u);
    EXPECT_DOUBLE_EQ(s.bucket_width_s, 10.0 / 200.0);
}

TEST(Utilization, BusyIntegralMatchesTaskNodeSeconds) {
    auto r = run_executor(test::pilot(3, 1, 0), fixed_tasks("t", 11, 1.7));
    const double width = 0.25;
    auto s = metrics::utilization(r.trace, width);
    double busy = 0.0;
    for (auto& b : s.buckets)
        busy += b.busy_node_fraction * 3 * width;
    EXPECT_NEAR(busy, 11 * 1.7, 3 * width);
}

TEST(Throughput, UniformCompletions) {
    std::vector<TraceEvent> tr = pilot_span("p", 100, 0, 10);
    for (int i = 0; i < 100; ++i)
        add_run(tr, "S1.l" + std::to_string(i), 0, 0.1 * (i + 1));
    auto th = metrics::stage_throughput(sorted_by_time(tr), "S1", 1.0);
    ASSERT_TRUE(th.has_value());
    EXPECT_DOUBLE_EQ(th->overall, 10.0);
    EXPECT_NEAR(th->sustained, 10.0, 1e-9);
    EXPECT_EQ(th->windows.size(), 10u);
}

TEST(Throughput, EmptyStageIsAbsent) {
    EXPECT_FALSE(metrics::stage_throughput({}, "S1").has_value());
    auto r = run_executor(test::pilot(1, 1, 0), fixed_tasks("t", 2, 1.0));
    EXPECT_FALSE(metrics::stage_throughput(r.trace, "S1").has_value());
}

TEST(Overhead, BackToBackIsBootstrapOnly) {
    EngineConfig cfg;
    cfg.bootstrap_s = 3.0;
    auto r = run_executor(test::pilot(2, 1, 0), fixed_tasks("t", 6, 2.0), cfg);
    auto o = metrics::overhead(r.trace);
    EXPECT_DOUBLE_EQ(o.bootstrap_s, 6.0);
    EXPECT_NEAR(o.total_s, o.bootstrap_s, 1e-9);
    EXPECT_NEAR(o.scheduling_s, 0.0, 1e-9);
    EXPECT_DOUBLE_EQ(o.makespan_s, 9.0);
}

TEST(Overhead, RecoversInjectedSchedulingGap) {
    EngineConfig cfg;
    cfg.sched_latency_s = 0.010;
    auto r = run_executor(test::pilot(1, 1, 0), fixed_tasks("t", 100, 1.0), cfg);
    auto o = metrics::overhead(r.trace);
    EXPECT_NEAR(o.per_task_ms, 10.0, 1.0);
}

TEST(Overhead, PerTaskStableUnderTenfoldTasks) {
    EngineConfig cfg;
    cfg.sched_latency_s = 0.010;
    auto a = metrics::overhead(run_executor(test::pilot(8, 1, 0), fixed_tasks("t", 100, 1.0), cfg).trace);
    auto b = metrics::overhead(run_executor(test::pilot(8, 1, 0), fixed_tasks("t", 1000, 1.0), cfg).trace);
    EXPECT_LT(b.per_task_ms, 2 * a.per_task_ms);
    EXPECT_GT(b.per_task_ms, 0.5 * a.per_task_ms);
}

TEST(MergedPilots, ResourceWeightedUtilizationAndThroughput) {
    auto a = run_executor(test::pilot(2, 1, 0), fixed_tasks("S1.a", 4, 5.0), on_pilot("pilot.a"));
    auto b = run_executor(test::pilot(3, 1, 0), fixed_tasks("S1.b", 2, 10.0), on_pilot("pilot.b"));
    std::vector<TraceEvent> merged = a.trace;
    merged.insert(merged.end(), b.trace.begin(), b.trace.end());

    auto ua = metrics::utilization(a.trace, 1.0), ub = metrics::utilization(b.trace, 1.0);
    auto um = metrics::utilization(merged, 1.0);
    ASSERT_EQ(um.buckets.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
        const double want = (2 * ua.buckets[i].busy_node_fraction + 3 * ub.buckets[i].busy_node_fraction) / 5;
        EXPECT_NEAR(um.buckets[i].busy_node_fraction, want, 1e-12);
        EXPECT_NEAR(um.buckets[i].busy_node_fraction, 0.8, 1e-12);
    }
    auto tm = metrics::stage_throughput(merged, "S1");
    ASSERT_TRUE(tm.has_value());
    EXPECT_NEAR(tm->overall, metrics::stage_throughput(a.trace, "S1")->overall +
                                 metrics::stage_throughput(b.trace, "S1")->overall, 1e-12);
}

TEST(Metrics, PureFunctionsOfTrace) {
    auto r = run_executor(test::pilot(2, 1, 0), fixed_tasks("S1.t", 9, 1.3));
    auto o1 = metrics::overhead(r.trace), o2 = metrics::overhead(r.trace);
    EXPECT_EQ(o1.total_s, o2.total_s);
    EXPECT_EQ(metrics::utilization(r.trace).buckets.size(), metrics::utilization(r.trace).buckets.size());
}
