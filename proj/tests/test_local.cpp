#include <algorithm>
#include <atomic>
#include <chrono>

#include <gtest/gtest.h>

#include "ensemble/engine/local.hpp"
#include "support.hpp"

using namespace ensemble;

namespace {

constexpr unsigned kCores = 4;

LocalConfig cores(unsigned n = kCores) {
    LocalConfig c;
    c.host_cores = n;
    return c;
}

PilotSpec local_pilot(double walltime = 30.0) {
    auto p = test::pilot(1, 4, 0, walltime);
    p.backend = Backend::local;
    return p;
}

TaskDescriptor shell(std::string id, std::string cmd, std::string payload = "") {
    auto t = test::fixed_task(std::move(id), 0);
    t.kind = TaskKind::executable;
    t.entrypoint = std::move(cmd);
    t.payload = std::move(payload);
    return t;
}

TaskDescriptor function(std::string id, std::string name) {
    auto t = test::fixed_task(std::move(id), 0);
    t.kind = TaskKind::function;
    t.entrypoint = std::move(name);
    return t;
}

CampaignSpec one_stage(std::vector<TaskDescriptor> tasks, double walltime = 30.0) {
    auto c = test::campaign({PipelineSpec{"p", {{"s0", std::move(tasks), {}}}}}, local_pilot(walltime));
    c.mode = Backend::local;
    return c;
}

bool has_event(const RunResult& r, const std::string& id, const std::string& transition) {
    return std::any_of(r.trace.begin(), r.trace.end(),
                       [&](const TraceEvent& e) { return e.id == id && e.transition == transition; });
}

} // namespace

TEST(RunShell, PayloadInOutputOutAndExitCode) {
    auto ok = run_shell("tr a-z A-Z", "ligand\n");
    EXPECT_EQ(ok.exit_code, 0);
    EXPECT_EQ(ok.out, "LIGAND\n");
    EXPECT_EQ(run_shell("exit 3", "").exit_code, 3);
}

TEST(LocalExecutable, OutputFlowsToNextStage) {
    PostHook pass{HookKind::identity, 1.0, 0, 1, 5, {}};
    auto c = test::campaign({PipelineSpec{"p", {{"s0", {shell("a", "cat", "A,1\n")}, pass},
                                                {"s1", {shell("b", "cat")}, {}}}}},
                            local_pilot());
    c.mode = Backend::local;
    auto r = run_local(c, nullptr, CostModel::summit_defaults(), cores());
    ASSERT_EQ(r.pipelines[0].status(), PipelineStatus::done);
    EXPECT_EQ(r.pipelines[0].outputs().at("b"), "A,1\n");
}

TEST(LocalExecutable, NonZeroExitFailsPipeline) {
    auto r = run_local(one_stage({shell("bad", "exit 1"), shell("good", "true")}), nullptr,
                       CostModel::summit_defaults(), cores());
    EXPECT_EQ(r.pipelines[0].task_state("bad"), TaskState::failed);
    EXPECT_EQ(r.pipelines[0].status(), PipelineStatus::failed);
}

TEST(LocalExecutable, WalltimeCancelsRunningProcess) {
    const auto start = std::chrono::steady_clock::now();
    auto r = run_local(one_stage({shell("slow", "sleep 20")}, 0.5), nullptr, CostModel::summit_defaults(), cores());
    const double took = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EXPECT_TRUE(r.walltime_exceeded);
    EXPECT_EQ(r.pipelines[0].task_state("slow"), TaskState::canceled);
    EXPECT_TRUE(has_event(r, "slow", "canceled"));
    EXPECT_LT(took, 5.0);
}

TEST(LocalFunction, RunsOnOverlayWorkers) {
    TaskFunctions fns;
    fns.add("echo", [](const TaskDescriptor& t, const TaskContext&) { return t.task_id + "!"; });
    auto r = run_local(one_stage({function("f0", "echo"), function("f1", "echo"), function("f2", "echo")}), &fns,
                       CostModel::summit_defaults(), cores());
    ASSERT_EQ(r.pipelines[0].status(), PipelineStatus::done);
    EXPECT_EQ(r.pipelines[0].outputs().at("f1"), "f1!");
    std::size_t completed = 0;
    for (auto& w : r.workers)
        completed += w.completed;
    EXPECT_EQ(completed, 3u);
}

TEST(LocalFunction, ThrowingFunctionFailsTask) {
    TaskFunctions fns;
    fns.add("boom", [](const TaskDescriptor&, const TaskContext&) -> std::string { throw std::runtime_error("x"); });
    auto r = run_local(one_stage({function("f", "boom")}), &fns, CostModel::summit_defaults(), cores());
    EXPECT_EQ(r.pipelines[0].task_state("f"), TaskState::failed);
}

TEST(LocalFunction, LostWorkerTaskRedispatchedOnce) {
    std::atomic<int> calls{0};
    TaskFunctions fns;
    fns.add("flaky", [&](const TaskDescriptor&, const TaskContext&) -> std::string {
        if (calls++ == 0)
            throw WorkerLost("worker crashed");
        return "ok";
    });
    auto r = run_local(one_stage({function("f", "flaky")}), &fns, CostModel::summit_defaults(), cores());
    EXPECT_EQ(calls.load(), 2);
    EXPECT_EQ(r.pipelines[0].task_state("f"), TaskState::done);
    EXPECT_EQ(r.pipelines[0].outputs().at("f"), "ok");
    auto lost = std::count_if(r.trace.begin(), r.trace.end(), [](const TraceEvent& e) {
        return e.entity == Entity::worker && e.transition == "failed";
    });
    EXPECT_EQ(lost, 1);
}

TEST(LocalFunction, TaskLostTwiceFails) {
    std::atomic<int> calls{0};
    TaskFunctions fns;
    fns.add("doomed", [&](const TaskDescriptor&, const TaskContext&) -> std::string {
        ++calls;
        throw WorkerLost("worker crashed");
    });
    auto r = run_local(one_stage({function("f", "doomed")}), &fns, CostModel::summit_defaults(), cores());
    EXPECT_EQ(calls.load(), 2);
    EXPECT_EQ(r.pipelines[0].task_state("f"), TaskState::failed);
    EXPECT_EQ(r.pipelines[0].status(), PipelineStatus::failed);
}

TEST(LocalPilot, RequestBeyondHostCoresRejected) {
    auto c = one_stage({shell("a", "true")});
    c.resource.cpus_per_node = 16;
    EXPECT_THROW(run_local(c, nullptr, CostModel::summit_defaults(), cores()), CapacityError);
}

TEST(LocalSimulated, SleepsScaledDuration) {
    auto c = one_stage(test::fixed_tasks("t", 4, 0.2));
    auto r = run_local(c, nullptr, CostModel::summit_defaults(), cores());
    ASSERT_EQ(r.pipelines[0].status(), PipelineStatus::done);
    EXPECT_GE(r.end_time, 0.19);
    EXPECT_LT(r.end_time, 2.0);
}
