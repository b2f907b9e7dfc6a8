#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "navlab/grpo.hpp"
#include "test_support.hpp"

using namespace navlab;

namespace {

// Mean and population standard deviation by the textbook two-pass formula.
std::pair<double, double> mean_std(std::span<const double> x) {
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return {m, std::sqrt(s / static_cast<double>(x.size()))};
}

grpo::CandidateGroup trace_group(const policy::TracePolicy& m, const policy::ParamVector& old, SplitMixStream& rng,
                                 std::size_t g) {
    grpo::CandidateGroup group;
    for (std::size_t i = 0; i < g; ++i) {
        group.rollouts.push_back(policy::sample_trace_rollout(m, old, rng()));
        group.rewards.push_back(rng.uniform());
        group.old_log_probs.push_back(policy::evaluate_log_probs(m, old, group.rollouts.back()));
    }
    group.advantages = grpo::compute_advantages(group.rewards);
    return group;
}

policy::ParamVector perturbed(const policy::ParamVector& p, SplitMixStream& rng, double scale) {
    policy::ParamVector out = p;
    for (double& v : out.values()) v += scale * (2.0 * rng.uniform() - 1.0);
    return out;
}

}  // namespace

TEST(Grpo, AdvantagesAreStandardized) {
    SplitMixStream rng(51);
    for (int k = 0; k < 1000; ++k) {
        const std::size_t g = 2 + static_cast<std::size_t>(rng.uniform() * 15);
        std::vector<double> r(g);
        for (double& v : r) v = 10.0 * rng.uniform() - 3.0;
        const auto a = grpo::compute_advantages(r);
        const auto [m, s] = mean_std(r);
        const auto [am, as] = mean_std(a);
        EXPECT_LT(std::abs(am), 1e-9);
        EXPECT_LT(std::abs(as - 1.0), 1e-9);
        for (std::size_t i = 0; i < g; ++i) EXPECT_NEAR(a[i], (r[i] - m) / s, 1e-9);
    }
}

TEST(Grpo, EqualRewardsGiveZeroAdvantages) {
    for (double v : {0.0, 1.0, -2.5, 1e6}) {
        const auto a = grpo::compute_advantages(std::vector<double>(8, v));
        for (double x : a) EXPECT_EQ(x, 0.0);
    }
    const auto tiny = grpo::compute_advantages(std::vector<double>{1.0, 1.0 + 1e-12}, 1e-8);
    EXPECT_EQ(tiny[0], 0.0);
}

TEST(Grpo, KlIsZeroAtTheReferenceAndPositiveElsewhere) {
    const policy::TracePolicy m(24, 8, 6);
    SplitMixStream rng(52);
    const auto ref = policy::init_params(m, 1, 1.0);
    grpo::ContextSet ctx;
    ctx.width = m.context_width();
    for (int i = 0; i < 5; ++i) ctx.append(policy::sample_trace_rollout(m, ref, rng()).contexts);
    EXPECT_NEAR(grpo::kl_divergence(m, ref, ref, ctx), 0.0, 1e-15);
    EXPECT_GT(grpo::kl_divergence(m, perturbed(ref, rng, 0.3), ref, ctx), 0.0);
    EXPECT_THROW(grpo::kl_divergence(m, ref, ref, grpo::ContextSet{m.context_width(), {}}), std::invalid_argument);
}

TEST(Grpo, KlMatchesExplicitSum) {
    const policy::Mlp m(3, 4, 5);
    SplitMixStream rng(53);
    const auto p = policy::init_params(m, 2, 1.0);
    const auto q = policy::init_params(m, 3, 1.0);
    grpo::ContextSet ctx{3, {0.1, 0.2, 0.3, -1.0, 0.5, 2.0}};
    double expected = 0.0;
    for (std::size_t c = 0; c < 2; ++c) {
        const auto pp = policy::action_distribution(m, p.values(), ctx.at(c));
        const auto qq = policy::action_distribution(m, q.values(), ctx.at(c));
        for (std::size_t k = 0; k < pp.size(); ++k) expected += pp[k] * std::log(pp[k] / qq[k]) / 2.0;
    }
    EXPECT_NEAR(grpo::kl_divergence(m, p, q, ctx), expected, 1e-12);
}

TEST(Grpo, KlGradientMatchesFiniteDifferences) {
    const policy::TracePolicy m(24, 8, 6);
    SplitMixStream rng(54);
    for (int k = 0; k < 20; ++k) {
        const auto ref = policy::init_params(m, rng(), 1.0);
        const auto p = perturbed(ref, rng, 0.2);
        grpo::ContextSet ctx;
        ctx.width = m.context_width();
        ctx.append(policy::sample_trace_rollout(m, p, rng()).contexts);
        std::vector<double> grad(p.size(), 0.0);
        grpo::kl_divergence(m, p.values(), ref.values(), ctx, grad, 1.0);
        const auto fd = fixtures::central_difference(
            [&](std::span<const double> x) { return grpo::kl_divergence(m, x, ref.values(), ctx); },
            std::vector<double>(p.values().begin(), p.values().end()));
        EXPECT_LT(fixtures::relative_error(grad, fd), 1e-4);
    }
}

TEST(Grpo, ObjectiveGradientMatchesFiniteDifferencesIncludingClipping) {
    const policy::TracePolicy m(24, 8, 6);
    SplitMixStream rng(55);
    grpo::GrpoConfig cfg;
    cfg.kl_beta = 0.05;
    std::size_t clipped = 0;
    for (int k = 0; k < 60; ++k) {
        const auto ref = policy::init_params(m, rng(), 1.0);
        const auto old = perturbed(ref, rng, 0.1);
        const auto group = trace_group(m, old, rng, 4);
        const auto params = perturbed(old, rng, k % 2 ? 0.3 : 0.02);
        const auto obj = grpo::grpo_objective_and_grad(m, params, old, ref, group, cfg);
        clipped += obj.clipped;
        const auto fd = fixtures::central_difference(
            [&](std::span<const double> x) {
                return grpo::grpo_objective_and_grad(m, policy::ParamVector(m.layout(), {x.begin(), x.end()}), old,
                                                     ref, group, cfg)
                    .value;
            },
            std::vector<double>(params.values().begin(), params.values().end()));
        EXPECT_LT(fixtures::relative_error(obj.grad, fd), 1e-4) << "instance " << k;
    }
    EXPECT_GT(clipped, 10u);
}

TEST(Grpo, ObjectiveAtOldParamsIsMeanAdvantageMinusKl) {
    const policy::TracePolicy m(24, 8, 6);
    SplitMixStream rng(56);
    const auto ref = policy::init_params(m, 5, 1.0);
    const auto old = perturbed(ref, rng, 0.1);
    const auto group = trace_group(m, old, rng, 6);
    grpo::GrpoConfig cfg;
    const auto obj = grpo::grpo_objective_and_grad(m, old, old, ref, group, cfg);
    EXPECT_NEAR(obj.surrogate, 0.0, 1e-12);  // advantages sum to zero and every ratio is one
    EXPECT_NEAR(obj.kl, grpo::kl_divergence(m, old, ref, group.probe_contexts()), 1e-12);
    EXPECT_NEAR(obj.value, -cfg.kl_beta * obj.kl, 1e-12);
    EXPECT_EQ(obj.clipped, 0u);
}

TEST(Grpo, BatchObjectiveSumsGroupsAndIsExecutionIndependent) {
    const policy::TracePolicy m(24, 8, 6);
    SplitMixStream rng(57);
    const auto ref = policy::init_params(m, 6, 1.0);
    const auto old = perturbed(ref, rng, 0.1);
    std::vector<grpo::CandidateGroup> groups;
    for (int i = 0; i < 6; ++i) groups.push_back(trace_group(m, old, rng, 4));
    const auto params = perturbed(old, rng, 0.05);
    grpo::GrpoConfig cfg;
    const auto serial = grpo::batch_objective_and_grad(m, params, old, ref, groups, cfg, Exec::Serial);
    const auto parallel = grpo::batch_objective_and_grad(m, params, old, ref, groups, cfg, Exec::Parallel);
    EXPECT_EQ(serial.value, parallel.value);
    EXPECT_EQ(serial.grad, parallel.grad);
    double sum = 0.0;
    for (const auto& g : groups) sum += grpo::grpo_objective_and_grad(m, params, old, ref, g, cfg).value;
    EXPECT_NEAR(serial.value, sum, 1e-12);
}

TEST(Grpo, SingleCandidateGroupsAreRejected) {
    const policy::TracePolicy m(24, 8, 6);
    SplitMixStream rng(58);
    const auto p = policy::init_params(m, 7, 1.0);
    const auto group = trace_group(m, p, rng, 1);
    EXPECT_THROW(grpo::grpo_objective_and_grad(m, p, p, p, group, {}), grpo::DegenerateGroup);
}

TEST(Grpo, ConfigValidation) {
    grpo::GrpoConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.group_size = 1;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.kl_beta = -1.0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Grpo, TrainingIsDeterministicAcrossExecutionModes) {
    const policy::TracePolicy m(24, 12, 8);
    const grpo::TraceFormatTask task(m, 3, 20);
    grpo::GrpoConfig cfg;
    cfg.iterations = 4;
    cfg.group_size = 4;
    cfg.learning_rate = 0.05;
    cfg.seed = 9;
    cfg.eval_every = 2;
    const auto init = policy::init_params(m, 8, 1.0);
    cfg.exec = Exec::Serial;
    const auto a = grpo::train(cfg, task, init);
    cfg.exec = Exec::Parallel;
    const auto b = grpo::train(cfg, task, init);
    EXPECT_EQ(a.final_params, b.final_params);
    ASSERT_EQ(a.rows.size(), 4u);
    EXPECT_FALSE(a.rows[0].heldout.has_value());
    EXPECT_TRUE(a.rows[1].heldout.has_value());
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.rows[i].to_json(), b.rows[i].to_json());
}

TEST(Grpo, SampledGroupsRecordOldLogProbs) {
    const policy::TracePolicy m(24, 12, 8);
    const grpo::TraceFormatTask task(m, 2, 10);
    grpo::GrpoConfig cfg;
    cfg.group_size = 5;
    const auto p = policy::init_params(m, 10, 1.0);
    const auto groups = grpo::sample_groups(task, p, cfg, 3, Exec::Serial);
    ASSERT_EQ(groups.size(), 2u);
    for (const auto& g : groups) {
        ASSERT_EQ(g.size(), 5u);
        for (std::size_t i = 0; i < g.size(); ++i) {
            EXPECT_EQ(g.old_log_probs[i], g.rollouts[i].log_probs);
            EXPECT_EQ(g.rewards[i], trace::format_reward(g.rollouts[i].text));
        }
    }
    EXPECT_NE(grpo::candidate_seed(1, 0, "a", 0), grpo::candidate_seed(1, 0, "a", 1));
    EXPECT_NE(grpo::candidate_seed(1, 0, "a", 0), grpo::candidate_seed(1, 1, "a", 0));
}
