#include <algorithm>
#include <map>
#include <numeric>

#include <gtest/gtest.h>

#include "ensemble/engine/sim.hpp"
#include "ensemble/overlay/bulk.hpp"
#include "support.hpp"

using namespace ensemble;
using namespace ensemble::overlay;

namespace {

std::vector<int> iota(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

MasterConfig cpu_overlay(std::size_t masters, std::size_t workers, std::size_t cap, std::size_t bulk = 1024) {
    MasterConfig c;
    c.n_masters = masters;
    c.n_workers = workers;
    c.workers_per_master = cap;
    c.bulk_size = bulk;
    c.worker_cpus = 1;
    c.worker_gpus = 0;
    c.master_cpus = 1;
    return c;
}

std::vector<TaskDescriptor> s1_tasks(std::size_t n) {
    std::vector<TaskDescriptor> out;
    for (std::size_t i = 0; i < n; ++i) {
        auto t = test::fixed_task("S1." + std::to_string(i), 0);
        t.duration = DurationModel::stage_cost(StageTag::Kind::S1);
        out.push_back(t);
    }
    return out;
}

} // namespace

TEST(PartitionBulks, SizesAndOrder) {
    auto b = partition_bulks(iota(10), 4);
    ASSERT_EQ(b.size(), 3u);
    EXPECT_EQ(b[0].tasks.size(), 4u);
    EXPECT_EQ(b[1].tasks.size(), 4u);
    EXPECT_EQ(b[2].tasks, (std::vector<int>{8, 9}));
    EXPECT_EQ(partition_bulks(iota(5), 1).size(), 5u);
    EXPECT_TRUE(partition_bulks(iota(0), 3).empty());
    EXPECT_THROW(partition_bulks(iota(3), 0), ValidationError);
}

TEST(RoundRobin, BinSizes) {
    auto sizes = [](const std::vector<std::vector<int>>& bins) {
        std::vector<std::size_t> s;
        for (auto& b : bins)
            s.push_back(b.size());
        return s;
    };
    EXPECT_EQ(sizes(round_robin_assign(iota(7), 3)), (std::vector<std::size_t>{3, 2, 2}));
    EXPECT_EQ(sizes(round_robin_assign(iota(6), 3)), (std::vector<std::size_t>{2, 2, 2}));
    auto big = sizes(round_robin_assign(iota(10000), 7));
    EXPECT_LE(*std::max_element(big.begin(), big.end()) - *std::min_element(big.begin(), big.end()), 1u);
    auto bins = round_robin_assign(iota(7), 3);
    EXPECT_EQ(bins[1], (std::vector<int>{1, 4}));
}

TEST(Dispatch, SingleWorkerTakesAll) {
    Master m("m0");
    m.add_worker("w0");
    auto a = m.dispatch(Bulk<int>{0, iota(9)});
    EXPECT_EQ(a.at("w0"), iota(9));
}

TEST(Dispatch, TwoIdleWorkersSplitEvenly) {
    Master m("m0");
    m.add_worker("w0");
    m.add_worker("w1");
    auto a = m.dispatch(Bulk<int>{0, iota(4)});
    EXPECT_EQ(a.at("w0").size(), 2u);
    EXPECT_EQ(a.at("w1").size(), 2u);
}

TEST(Dispatch, LeastOutstandingFromUnevenLoad) {
    Master m("m0");
    m.add_worker("w1");
    m.add_worker("w2");
    m.add_worker("w3");
    m.set_outstanding(0, 3);
    m.set_outstanding(2, 1);
    auto who = m.assign(3);
    // Ties go to the lowest index: w2 (0), w2 (1, tied with w3), w3.
    EXPECT_EQ(who, (std::vector<std::size_t>{1, 1, 2}));
    EXPECT_EQ(m.worker(0).outstanding, 3u);
    EXPECT_EQ(m.worker(1).outstanding, 2u);
    EXPECT_EQ(m.worker(2).outstanding, 2u);
}

TEST(Dispatch, NoWorkersIsDispatchError) {
    Master m("m0");
    EXPECT_THROW(m.dispatch(Bulk<int>{0, iota(1)}), DispatchError);
}

TEST(Dispatch, BalancedFromIdleStartAndOrderPreserved) {
    for (int workers : {2, 3, 5, 8}) {
        Master m("m0");
        for (int w = 0; w < workers; ++w)
            m.add_worker("w" + std::to_string(w));
        auto a = m.dispatch(Bulk<int>{0, iota(37)});
        std::size_t lo = 1000, hi = 0, total = 0;
        for (std::size_t w = 0; w < m.size(); ++w) {
            lo = std::min(lo, m.worker(w).outstanding);
            hi = std::max(hi, m.worker(w).outstanding);
            total += m.worker(w).outstanding;
        }
        EXPECT_LE(hi - lo, 1u);
        EXPECT_EQ(total, 37u);
        for (auto& [id, tasks] : a)
            EXPECT_TRUE(std::is_sorted(tasks.begin(), tasks.end()));
    }
}

TEST(Dispatch, RoundRobinIgnoresLoad) {
    Master m("m0", DispatchPolicy::round_robin);
    m.add_worker("w0");
    m.add_worker("w1");
    m.set_outstanding(0, 10);
    EXPECT_EQ(m.assign(4), (std::vector<std::size_t>{0, 1, 0, 1}));
}

TEST(ConfigCheck, CapAndCounts) {
    EXPECT_TRUE(config_violations(cpu_overlay(2, 128, 64)).empty());
    EXPECT_FALSE(config_violations(cpu_overlay(2, 129, 64)).empty());
    auto c = cpu_overlay(1, 1, 1);
    c.bulk_size = 0;
    EXPECT_FALSE(config_violations(c).empty());
}

TEST(RunOverlay, TwoWorkersTenOneSecondTasks) {
    auto r = run_overlay(test::pilot(1, 4, 0), cpu_overlay(1, 2, 64), test::fixed_tasks("f", 10, 1.0));
    ASSERT_EQ(r.completions.size(), 10u);
    double last = 0.0;
    for (auto& c : r.completions)
        last = std::max(last, c.t);
    EXPECT_DOUBLE_EQ(last, 5.0);
    ASSERT_EQ(r.workers.size(), 2u);
    for (auto& w : r.workers) {
        EXPECT_EQ(w.completed, 5u);
        EXPECT_DOUBLE_EQ(w.busy_time_s, 5.0);
    }
}

TEST(RunOverlay, MastersServeCappedWorkerCounts) {
    auto r = run_overlay(test::pilot(4, 40, 0), cpu_overlay(2, 128, 64), test::fixed_tasks("f", 256, 1.0));
    std::map<std::string, int> per_master;
    for (auto& w : r.workers)
        ++per_master[w.master_id];
    ASSERT_EQ(per_master.size(), 2u);
    for (auto& [m, n] : per_master)
        EXPECT_EQ(n, 64);
}

TEST(RunOverlay, MastersAndWorkersArePlacedOnThePilot) {
    auto r = run_overlay(test::pilot(1, 4, 0), cpu_overlay(1, 2, 64), test::fixed_tasks("f", 4, 1.0));
    int masters = 0, workers = 0;
    for (auto& e : r.trace) {
        if (e.transition != "running")
            continue;
        masters += e.entity == Entity::master;
        workers += e.entity == Entity::worker;
    }
    EXPECT_EQ(masters, 1);
    EXPECT_EQ(workers, 2);
}

TEST(RunOverlay, OverlayThatDoesNotFitIsCapacityError) {
    EXPECT_THROW(run_overlay(test::pilot(1, 2, 0), cpu_overlay(1, 4, 64), test::fixed_tasks("f", 4, 1.0)),
                 CapacityError);
}

TEST(RunOverlay, EveryTaskRunsExactlyOnce) {
    auto r = run_overlay(test::pilot(2, 8, 0), cpu_overlay(2, 12, 6, 7), s1_tasks(500), 5);
    std::map<std::string, int> done;
    for (auto& c : r.completions)
        ++done[c.task_id];
    EXPECT_EQ(done.size(), 500u);
    for (auto& [id, n] : done)
        EXPECT_EQ(n, 1);
}

TEST(RunOverlay, ThroughputGrowsWithWorkers) {
    auto rate = [](std::size_t workers) {
        double sum = 0.0;
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            auto r = run_overlay(test::pilot(1, 64, 0), cpu_overlay(1, workers, 64), s1_tasks(400), seed);
            double last = 0.0;
            for (auto& c : r.completions)
                last = std::max(last, c.t);
            sum += 400.0 / last;
        }
        return sum / 20.0;
    };
    const double r2 = rate(2), r4 = rate(4), r8 = rate(8);
    EXPECT_LE(r2, r4);
    EXPECT_LE(r4, r8);
}
