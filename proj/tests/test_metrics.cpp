#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "navlab/metrics.hpp"
#include "test_support.hpp"

using namespace navlab;

namespace {

// Minimum summed cost over every monotone alignment, by exhaustive enumeration.
double brute_dtw(const Trajectory& a, const Trajectory& b) {
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        acc += distance(a.points[i], b.points[j]);
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < a.size()) walk(i + 1, j, acc);
        if (j + 1 < b.size()) walk(i, j + 1, acc);
        if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

// c(i, j) = max(d(i, j), min(c(i−1, j), c(i−1, j−1), c(i, j−1))), unmemoized.
double recursive_frechet(const Trajectory& a, const Trajectory& b, std::size_t i, std::size_t j) {
    const double d = distance(a.points[i], b.points[j]);
    if (i == 0 && j == 0) return d;
    if (i == 0) return std::max(recursive_frechet(a, b, 0, j - 1), d);
    if (j == 0) return std::max(recursive_frechet(a, b, i - 1, 0), d);
    return std::max(std::min({recursive_frechet(a, b, i - 1, j), recursive_frechet(a, b, i - 1, j - 1),
                              recursive_frechet(a, b, i, j - 1)}),
                    d);
}

}  // namespace

TEST(Metrics, DtwMatchesExhaustiveAlignment) {
    SplitMixStream rng(11);
    for (int k = 0; k < 500; ++k) {
        const Trajectory a = fixtures::random_trajectory(rng, 5);
        const Trajectory b = fixtures::random_trajectory(rng, 5);
        EXPECT_NEAR(metrics::dtw(a, b), brute_dtw(a, b), 1e-9);
        const double d_th = 0.25 + rng.uniform();
        EXPECT_NEAR(metrics::ndtw(a, b, d_th), std::exp(-brute_dtw(a, b) / (b.size() * d_th)), 1e-9);
    }
}

TEST(Metrics, FrechetMatchesRecursiveDefinition) {
    SplitMixStream rng(12);
    for (int k = 0; k < 500; ++k) {
        const Trajectory a = fixtures::random_trajectory(rng, 7);
        const Trajectory b = fixtures::random_trajectory(rng, 7);
        EXPECT_NEAR(metrics::discrete_frechet(a, b), recursive_frechet(a, b, a.size() - 1, b.size() - 1), 1e-9);
    }
}

TEST(Metrics, IdenticalPathsScorePerfectly) {
    const Trajectory t{{{0, 0}, {1, 0}, {1, 1}}};
    EXPECT_DOUBLE_EQ(metrics::dtw(t, t), 0.0);
    EXPECT_DOUBLE_EQ(metrics::ndtw(t, t, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(metrics::discrete_frechet(t, t), 0.0);
}

TEST(Metrics, FrechetIsAtLeastEndpointGap) {
    SplitMixStream rng(13);
    for (int k = 0; k < 200; ++k) {
        const Trajectory a = fixtures::random_trajectory(rng, 6);
        const Trajectory b = fixtures::random_trajectory(rng, 6);
        const double f = metrics::discrete_frechet(a, b);
        EXPECT_GE(f + 1e-12, distance(a.points.front(), b.points.front()));
        EXPECT_GE(f + 1e-12, distance(a.back(), b.back()));
        EXPECT_NEAR(f, metrics::discrete_frechet(b, a), 1e-12);
    }
}

TEST(Metrics, SuccessAndOracleUseStrictRadius) {
    const Trajectory t{{{0, 0}, {2, 0}, {4, 0}}};
    auto f = metrics::success_and_oracle(t, {2.0, 0.4}, 0.5);
    EXPECT_EQ(f.sr, 0);
    EXPECT_EQ(f.os, 1);
    f = metrics::success_and_oracle(t, {4.5, 0.0}, 0.5);
    EXPECT_EQ(f.sr, 0);
    f = metrics::success_and_oracle(t, {4.49, 0.0}, 0.5);
    EXPECT_EQ(f.sr, 1);
    EXPECT_EQ(f.os, 1);
}

TEST(Metrics, Spl) {
    EXPECT_DOUBLE_EQ(metrics::spl(0, 3.0, 3.0), 0.0);
    EXPECT_DOUBLE_EQ(metrics::spl(1, 3.0, 6.0), 0.5);
    EXPECT_DOUBLE_EQ(metrics::spl(1, 3.0, 2.0), 1.0);
    EXPECT_DOUBLE_EQ(metrics::spl(1, 0.0, 0.0), 1.0);
}

TEST(Metrics, EvaluateAndAggregate) {
    const Trajectory path{{{0, 0}, {1, 0}, {2, 0}}};
    const Trajectory ref{{{0, 0}, {1, 0}, {2, 0}, {3, 0}}};
    const auto r = metrics::evaluate(path, {3, 0}, 0.5, 3.0, ref, 0.5);
    EXPECT_DOUBLE_EQ(r.ne, 1.0);
    EXPECT_EQ(r.sr, 0);
    EXPECT_DOUBLE_EQ(r.spl, 0.0);
    EXPECT_NEAR(r.ndtw, std::exp(-1.0 / (4 * 0.5)), 1e-12);

    const auto r2 = metrics::evaluate(ref, {3, 0}, 0.5, 3.0, ref, 0.5);
    const auto agg = metrics::aggregate({r, r2});
    EXPECT_EQ(agg.episodes, 2u);
    EXPECT_DOUBLE_EQ(agg.sr, 0.5);
    EXPECT_DOUBLE_EQ(agg.ne, 0.5);
    EXPECT_DOUBLE_EQ(agg.spl, 0.5);
    EXPECT_EQ(metrics::aggregate({}).episodes, 0u);
}

TEST(Metrics, RenderTableHasOneRowPerMethod) {
    metrics::Aggregate a;
    a.sr = 0.5;
    const std::string table = metrics::render_table({{"alpha", a}, {"beta", a}});
    EXPECT_NE(table.find("Method"), std::string::npos);
    EXPECT_NE(table.find("nDTW"), std::string::npos);
    EXPECT_NE(table.find("alpha"), std::string::npos);
    EXPECT_NE(table.find("50.0"), std::string::npos);
    EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 4);
}
