#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "ensemble/campaign/hooks.hpp"
#include "ensemble/campaign/state.hpp"
#include "ensemble/campaign/validate.hpp"
#include "ensemble/engine/replay.hpp"
#include "ensemble/engine/sim.hpp"
#include "support.hpp"

using namespace ensemble;
using test::fixed_task;
using test::fixed_tasks;

namespace {

PipelineSpec two_stage(const std::string& id = "p") {
    return {id, {{"s0", {fixed_task(id + ".a", 1), fixed_task(id + ".b", 1)}, {}},
                 {"s1", {fixed_task(id + ".c", 1), fixed_task(id + ".d", 1), fixed_task(id + ".e", 1)}, {}}}};
}

void run_to_done(PipelineState& st, const std::string& id, std::string out = "") {
    st.mark_scheduled(id);
    st.mark_running(id);
    st.on_task_complete(id, Outcome::done, std::move(out));
}

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

} // namespace

TEST(ValidateCampaign, WellFormedTwoPipelinesIsClean) {
    auto spec = test::campaign({two_stage("p1"), two_stage("p2")}, test::pilot(2, 4, 0));
    EXPECT_TRUE(validate_campaign(spec).empty());
}

TEST(ValidateCampaign, DuplicateIdAcrossStagesNamedOnce) {
    PipelineSpec p{"p", {{"s0", {fixed_task("t1", 1)}, {}}, {"s1", {fixed_task("t1", 1)}, {}}}};
    auto v = validate_campaign(test::campaign({p}, test::pilot(1, 4, 0)));
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].code, Violation::Code::duplicate_id);
    EXPECT_EQ(v[0].subject, "t1");
}

TEST(ValidateCampaign, EightGpusOnSixGpuNodeIsCapacityViolation) {
    PipelineSpec p{"p", {{"s0", {fixed_task("big", 1, 1, 8)}, {}}}};
    auto v = validate_campaign(test::campaign({p}, test::pilot(1, 42, 6)));
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].code, Violation::Code::exceeds_pilot);
}

TEST(ValidateCampaign, ReportsEveryViolation) {
    auto zero = fixed_task("z", 1, 0, 0);
    auto multi = fixed_task("m", 1, 1, 0, 2);
    multi.kind = TaskKind::function;
    PipelineSpec p{"p", {{"s0", {zero, multi}, {}}, {"empty", {}, {}}}};
    auto v = validate_campaign(test::campaign({p}, test::pilot(4, 4, 0)));
    std::vector<Violation::Code> codes;
    for (auto& x : v)
        codes.push_back(x.code);
    EXPECT_NE(std::find(codes.begin(), codes.end(), Violation::Code::zero_resources), codes.end());
    EXPECT_NE(std::find(codes.begin(), codes.end(), Violation::Code::multi_node_function), codes.end());
    EXPECT_NE(std::find(codes.begin(), codes.end(), Violation::Code::empty_stage), codes.end());
}

TEST(PipelineState, FreshPipelineOffersFirstStage) {
    PipelineState st(two_stage());
    EXPECT_EQ(st.next_ready_tasks(), (std::vector<std::string>{"p.a", "p.b"}));
    EXPECT_EQ(st.task_state("p.c"), TaskState::pending);
}

TEST(PipelineState, BarrierHoldsWhileStageRuns) {
    PipelineState st(two_stage());
    run_to_done(st, "p.a");
    st.mark_scheduled("p.b");
    st.mark_running("p.b");
    EXPECT_TRUE(st.next_ready_tasks().empty());
    EXPECT_EQ(st.current_stage_index(), 0u);
}

TEST(PipelineState, AdvancesAfterLastTaskOfStage) {
    PipelineState st(two_stage());
    run_to_done(st, "p.a");
    st.mark_scheduled("p.b");
    st.mark_running("p.b");
    auto ev = st.on_task_complete("p.b", Outcome::done, "");
    EXPECT_EQ(ev.kind, CompletionEvent::Kind::stage_advanced);
    EXPECT_EQ(st.current_stage_index(), 1u);
    EXPECT_EQ(sorted(st.next_ready_tasks()), (std::vector<std::string>{"p.c", "p.d", "p.e"}));
}

TEST(PipelineState, SingleTaskPipelineFinishes) {
    PipelineState st(PipelineSpec{"p", {{"s", {fixed_task("only", 1)}, {}}}});
    st.mark_scheduled("only");
    st.mark_running("only");
    EXPECT_EQ(st.on_task_complete("only", Outcome::done, "x").kind, CompletionEvent::Kind::pipeline_done);
    EXPECT_EQ(st.status(), PipelineStatus::done);
    EXPECT_EQ(st.outputs().at("only"), "x");
}

TEST(PipelineState, UnknownTaskIsStateMachineError) {
    PipelineState st(two_stage());
    EXPECT_THROW(st.on_task_complete("nope", Outcome::done, ""), StateMachineError);
}

TEST(PipelineState, CompletingPendingTaskIsOrderingError) {
    PipelineState st(two_stage());
    EXPECT_THROW(st.on_task_complete("p.a", Outcome::done, ""), OrderingError);
}

TEST(PipelineState, SecondCompletionIsRejected) {
    PipelineState st(two_stage());
    run_to_done(st, "p.a");
    EXPECT_THROW(st.on_task_complete("p.a", Outcome::done, ""), StateMachineError);
    EXPECT_EQ(st.current_stage_index(), 0u);
}

TEST(PipelineState, FailureCancelsPendingAndFailsPipeline) {
    PipelineState st(two_stage());
    st.mark_scheduled("p.a");
    st.mark_running("p.a");
    auto ev = st.on_task_complete("p.a", Outcome::failed, "");
    EXPECT_EQ(ev.kind, CompletionEvent::Kind::pipeline_failed);
    EXPECT_EQ(st.status(), PipelineStatus::failed);
    EXPECT_EQ(st.task_state("p.b"), TaskState::canceled);
    EXPECT_EQ(st.task_state("p.e"), TaskState::canceled);
}

TEST(PipelineState, TopFractionHookMaterializesTenOfThousand) {
    std::mt19937_64 gen(7);
    std::normal_distribution<double> score;
    std::vector<TaskDescriptor> s0;
    std::vector<double> scores;
    for (int i = 0; i < 1000; ++i) {
        s0.push_back(fixed_task("t" + std::to_string(i), 1));
        scores.push_back(score(gen));
    }
    PostHook hook{HookKind::select_top_fraction, 0.01, 0, 1, 5, {}};
    hook.spawn.push_back({"next", TaskKind::simulated, StageTag::other("x"), 1, 0, 1, {}, "", 1});
    PipelineState st(PipelineSpec{"p", {{"s0", s0, hook}, {"s1", {}, {}}}});
    CompletionEvent last;
    for (int i = 0; i < 1000; ++i) {
        const std::string id = "t" + std::to_string(i);
        st.mark_scheduled(id);
        st.mark_running(id);
        last = st.on_task_complete(id, Outcome::done, encode_item({"L" + std::to_string(i), scores[i], "", {}}));
    }
    EXPECT_EQ(last.kind, CompletionEvent::Kind::stage_advanced);
    ASSERT_EQ(last.materialized, 10u);

    std::vector<std::pair<double, std::string>> oracle;
    for (int i = 0; i < 1000; ++i)
        oracle.emplace_back(scores[i], "L" + std::to_string(i));
    std::sort(oracle.begin(), oracle.end());
    std::vector<std::string> want;
    for (int i = 0; i < 10; ++i)
        want.push_back("s1." + oracle[i].second + ".next");
    EXPECT_EQ(sorted(st.next_ready_tasks()), sorted(want));
}

TEST(PipelineState, ResizeFutureStage) {
    PipelineState st(PipelineSpec{"p", {{"s0", {fixed_task("a", 1)}, {}}, {"s1", fixed_tasks("x", 5, 1), {}}}});
    auto v = st.resize_stage(1, fixed_tasks("y", 25, 1));
    EXPECT_TRUE(v.empty());
    EXPECT_EQ(st.spec().stages[1].tasks.size(), 25u);
    EXPECT_TRUE(st.has_task("y24"));
    EXPECT_FALSE(st.has_task("x0"));
}

TEST(PipelineState, ResizeCurrentStageIsOrderingError) {
    PipelineState st(two_stage());
    EXPECT_THROW(st.resize_stage(0, fixed_tasks("y", 2, 1)), OrderingError);
}

TEST(PipelineState, ResizeWithDuplicateIdIsViolation) {
    PipelineState st(two_stage());
    auto v = st.resize_stage(1, {fixed_task("p.a", 1)});
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0].code, Violation::Code::duplicate_id);
    EXPECT_EQ(st.spec().stages[1].tasks.size(), 3u);
}

TEST(Hooks, OutputsArriveSortedByTaskId) {
    // identity passes records through in the order the hook receives them
    PostHook id{HookKind::identity, 1.0, 0, 1, 5, {}};
    PipelineState st(PipelineSpec{
        "p", {{"s0", {fixed_task("b", 1), fixed_task("a", 1)}, id}, {"s1", {fixed_task("sink", 1)}, {}}}});
    run_to_done(st, "b", "B,1\n");
    run_to_done(st, "a", "A,2\n");
    EXPECT_EQ(st.task("sink").payload, "A,2\nB,1\n");
}

TEST(Hooks, UnparseableOutputFailsPipeline) {
    PostHook top{HookKind::select_top_k, 1.0, 1, 1, 5, {}};
    PipelineState st(PipelineSpec{"p", {{"s0", {fixed_task("a", 1)}, top}, {"s1", {fixed_task("b", 1)}, {}}}});
    st.mark_scheduled("a");
    st.mark_running("a");
    auto ev = st.on_task_complete("a", Outcome::done, "not a record");
    EXPECT_EQ(ev.kind, CompletionEvent::Kind::pipeline_failed);
}

TEST(Replay, TraceReproducesFinalStates) {
    auto p1 = two_stage("p1");
    auto p2 = two_stage("p2");
    p2.stages[0].tasks[0].duration = DurationModel::fixed_seconds(3);
    auto spec = test::campaign({p1, p2}, test::pilot(2, 1, 0));
    auto run = simulate(spec);
    auto states = replay_trace(spec, run.trace, [](const TaskDescriptor&) { return std::string(); });
    ASSERT_EQ(states.size(), run.pipelines.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        EXPECT_TRUE(states[i] == run.pipelines[i]);
}

TEST(Replay, PipelinesAreIndependent) {
    auto alone = simulate(test::campaign({two_stage("p1")}, test::pilot(4, 1, 0)));
    auto both = simulate(test::campaign({two_stage("p1"), two_stage("p2")}, test::pilot(4, 1, 0)));
    auto transitions = [](const std::vector<TraceEvent>& tr) {
        std::vector<std::string> out;
        for (const auto& e : tr)
            if (e.entity == Entity::task && e.id.rfind("p1.", 0) == 0)
                out.push_back(e.id + ":" + e.transition);
        return out;
    };
    EXPECT_EQ(transitions(alone.trace), transitions(both.trace));
}
