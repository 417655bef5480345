#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "ensemble/analysis.hpp"
#include "ensemble/io/csv.hpp"

using namespace ensemble;
using namespace ensemble::analysis;

namespace {

ScoredSet random_set(std::size_t n, std::uint64_t seed, double noise) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> g;
    std::vector<ScoredEntry> items;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = g(gen);
        items.push_back({"c" + std::to_string(i), t, t + noise * g(gen)});
    }
    return ScoredSet(std::move(items));
}

// Straightforward set intersection, independent of the rank-array trick.
double brute_recall(const ScoredSet& s, std::size_t k, std::size_t delta) {
    auto top = [&](bool predicted, std::size_t m) {
        std::vector<std::pair<double, std::string>> v;
        for (auto& e : s.items())
            v.emplace_back(predicted ? e.predicted_score : e.true_score, e.id);
        std::sort(v.begin(), v.end());
        std::set<std::string> out;
        for (std::size_t i = 0; i < m; ++i)
            out.insert(v[i].second);
        return out;
    };
    auto truth = top(false, k), pred = top(true, delta);
    std::size_t hits = 0;
    for (auto& id : pred)
        hits += truth.count(id);
    return static_cast<double>(hits) / static_cast<double>(k);
}

PointSet random_points(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-5, 5);
    std::vector<double> c(n * dim);
    for (auto& x : c)
        x = u(gen);
    return PointSet(dim, c);
}

double brute_chamfer(const PointSet& a, const PointSet& b) {
    auto one = [](const PointSet& x, const PointSet& y) {
        double sum = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            double best = INFINITY;
            for (std::size_t j = 0; j < y.size(); ++j)
                best = std::min(best, squared_distance(x[i], y[j]));
            sum += best;
        }
        return sum / static_cast<double>(x.size());
    };
    return one(a, b) + one(b, a);
}

} // namespace

TEST(Recall, MatchesBruteForceOnTenRows) {
    ScoredSet s({{"a", 1, 3}, {"b", 2, 1}, {"c", 3, 2}, {"d", 4, 9}, {"e", 5, 4},
                 {"f", 6, 10}, {"g", 7, 5}, {"h", 8, 8}, {"i", 9, 6}, {"j", 10, 7}});
    for (std::size_t k = 1; k <= 10; ++k)
        for (std::size_t d = 1; d <= 10; ++d)
            EXPECT_DOUBLE_EQ(top_k_recall(s, k, d), brute_recall(s, k, d)) << k << "," << d;
    EXPECT_DOUBLE_EQ(top_k_recall(s, 3, 3), 1.0);
    EXPECT_DOUBLE_EQ(top_k_recall(s, 4, 4), 0.75);
}

TEST(Recall, MatchesBruteForceOnRandomSets) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto s = random_set(500, seed, 0.7);
        for (std::size_t k : {1, 5, 50, 500})
            for (std::size_t d : {1, 10, 100, 500})
                EXPECT_DOUBLE_EQ(top_k_recall(s, k, d), brute_recall(s, k, d));
    }
}

TEST(Recall, BoundsChecked) {
    auto s = random_set(10, 1, 1.0);
    EXPECT_THROW(top_k_recall(s, 0, 1), ValidationError);
    EXPECT_THROW(top_k_recall(s, 1, 11), ValidationError);
}

TEST(Res, PerfectPredictorIsMinOfOneAndBudgetOverTop) {
    auto s = random_set(2000, 3, 0.0);
    auto grid = compute_res(s);
    for (std::size_t b = 0; b < grid.budget_fractions.size(); ++b)
        for (std::size_t f = 0; f < grid.top_fractions.size(); ++f) {
            const double delta = static_cast<double>(count_for_fraction(grid.budget_fractions[b], 2000));
            const double k = static_cast<double>(count_for_fraction(grid.top_fractions[f], 2000));
            EXPECT_DOUBLE_EQ(grid.cells[b][f], std::min(1.0, delta / k));
        }
}

TEST(Res, CellsMatchRecall) {
    auto s = random_set(1000, 4, 0.5);
    auto grid = compute_res(s, {0.001, 0.01, 0.1, 0.5, 1.0}, {0.001, 0.01, 0.3});
    for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t f = 0; f < 3; ++f)
            EXPECT_DOUBLE_EQ(grid.cells[b][f],
                             brute_recall(s, count_for_fraction(grid.top_fractions[f], 1000),
                                          count_for_fraction(grid.budget_fractions[b], 1000)));
}

TEST(Res, MonotoneInBudget) {
    auto grid = compute_res(random_set(3000, 5, 1.0));
    for (std::size_t f = 0; f < grid.top_fractions.size(); ++f)
        for (std::size_t b = 1; b < grid.budget_fractions.size(); ++b)
            EXPECT_GE(grid.cells[b][f], grid.cells[b - 1][f]);
}

TEST(Res, InvariantUnderMonotoneTransform) {
    auto s = random_set(1500, 6, 0.8);
    std::vector<ScoredEntry> warped;
    for (auto e : s.items()) {
        e.true_score = std::exp(e.true_score);
        e.predicted_score = 3.0 * e.predicted_score + 7.0;
        warped.push_back(e);
    }
    EXPECT_EQ(compute_res(s).cells, compute_res(ScoredSet(warped)).cells);
}

TEST(Res, RandomPredictorTracksBudget) {
    const std::vector<double> budgets{0.05, 0.2, 0.5}, tops{0.1};
    std::vector<double> mean(3, 0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto g = compute_res(random_set(5000, 100 + seed, 1e6), budgets, tops);
        for (std::size_t b = 0; b < 3; ++b)
            mean[b] += g.cells[b][0] / 20.0;
    }
    for (std::size_t b = 0; b < 3; ++b)
        EXPECT_NEAR(mean[b], budgets[b], 0.02);
}

TEST(Res, AxisValidation) {
    auto s = random_set(10, 1, 1);
    EXPECT_THROW(compute_res(s, {0.0, 1.0}, {1.0}), ValidationError);
    EXPECT_THROW(compute_res(s, {0.5, 0.1}, {1.0}), ValidationError);
    EXPECT_THROW(compute_res(ScoredSet{}, {1.0}, {1.0}), ValidationError);
}

TEST(Res, CountForFraction) {
    EXPECT_EQ(count_for_fraction(0.01, 1000), 10u);
    EXPECT_EQ(count_for_fraction(0.0001, 1000), 1u);
    EXPECT_EQ(count_for_fraction(0.015, 1000), 15u);
    EXPECT_EQ(count_for_fraction(0.0151, 1000), 16u);
    EXPECT_EQ(count_for_fraction(1.0, 7), 7u);
}

TEST(Lof, GridInteriorNearOne) {
    std::vector<double> c;
    for (int x = 0; x < 12; ++x)
        for (int y = 0; y < 12; ++y) {
            c.push_back(x);
            c.push_back(y);
        }
    PointSet grid(2, c);
    auto s = lof(grid, 4);
    for (int x = 2; x < 10; ++x)
        for (int y = 2; y < 10; ++y) {
            const double v = s[static_cast<std::size_t>(x * 12 + y)];
            EXPECT_GE(v, 0.8);
            EXPECT_LE(v, 1.3);
        }
}

TEST(Lof, IsolatedPointStandsOut) {
    std::mt19937_64 gen(2);
    std::normal_distribution<double> g;
    std::vector<double> c;
    for (int i = 0; i < 200; ++i) {
        c.push_back(g(gen));
        c.push_back(g(gen));
        c.push_back(g(gen));
    }
    c.insert(c.end(), {40.0, 40.0, 40.0});
    auto s = lof(PointSet(3, c), 10);
    EXPECT_EQ(select_outliers(s, 1), std::vector<std::size_t>{200});
    EXPECT_GT(s[200], 2.0);
}

TEST(Lof, IdenticalPointsScoreOne) {
    PointSet p(2, std::vector<double>(20, 1.5));
    for (double v : lof(p, 3))
        EXPECT_DOUBLE_EQ(v, 1.0);
}

TEST(Lof, TranslationAndScaleInvariant) {
    auto p = random_points(150, 3, 9);
    std::vector<double> moved = p.coords();
    for (std::size_t i = 0; i < moved.size(); ++i)
        moved[i] = 2.5 * moved[i] + (i % 3 == 0 ? 100.0 : -7.0);
    auto a = lof(p, 8), b = lof(PointSet(3, moved), 8);
    for (std::size_t i = 0; i < a.size(); ++i)
        EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Lof, NeighbourCountValidated) {
    auto p = random_points(5, 2, 1);
    EXPECT_THROW(lof(p, 0), ValidationError);
    EXPECT_THROW(lof(p, 5), ValidationError);
}

TEST(SelectOutliers, OrderAndEdges) {
    std::vector<double> s{1.0, 3.0, 2.0, 3.0};
    EXPECT_EQ(select_outliers(s, 3), (std::vector<std::size_t>{1, 3, 2}));
    EXPECT_TRUE(select_outliers(s, 0).empty());
    EXPECT_EQ(select_outliers(s, 4).size(), 4u);
    EXPECT_THROW(select_outliers(s, 5), ValidationError);
}

TEST(Chamfer, SinglePoints) {
    PointSet a(2, {0, 0}), b(2, {3, 4});
    EXPECT_DOUBLE_EQ(chamfer(a, b), 50.0);
    EXPECT_DOUBLE_EQ(chamfer(a, a), 0.0);
}

TEST(Chamfer, SymmetricAndMatchesBruteForce) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto a = random_points(120, 3, seed), b = random_points(80, 3, seed + 50);
        EXPECT_NEAR(chamfer(a, b), chamfer(b, a), 1e-12);
        EXPECT_NEAR(chamfer(a, b), brute_chamfer(a, b), 1e-9);
    }
}

TEST(Chamfer, InvalidInputs) {
    EXPECT_THROW(chamfer(PointSet(2, {0, 0}), PointSet(3, {0, 0, 0})), InputError);
    EXPECT_THROW(chamfer(PointSet(2, {0, 0}), PointSet{}), InputError);
}

TEST(KdTree, NearestMatchesLinearScan) {
    auto pts = random_points(400, 4, 21);
    KdTree tree(pts);
    auto queries = random_points(100, 4, 22);
    for (std::size_t q = 0; q < queries.size(); ++q) {
        double best = INFINITY;
        for (std::size_t i = 0; i < pts.size(); ++i)
            best = std::min(best, squared_distance(queries[q], pts[i]));
        EXPECT_DOUBLE_EQ(tree.nearest_squared(queries[q]), best);
    }
}

TEST(PointCsv, ParsesWithHeaderAndReportsBadLine) {
    std::istringstream ok("x,y\n1,2\n3,4\n");
    auto p = read_point_set_csv(ok);
    EXPECT_EQ(p.size(), 2u);
    EXPECT_EQ(p.dim(), 2u);
    std::istringstream bad("1,2\n3\n");
    try {
        read_point_set_csv(bad);
        FAIL() << "ragged row accepted";
    } catch (const InputError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
}
