#include <gtest/gtest.h>

#include <cmath>

#include "navlab/fis.hpp"
#include "test_support.hpp"

using namespace navlab;

namespace {

struct Fixture {
    env::Scene scene = fixtures::box_scene();
    env::Episode episode = fixtures::straight_episode(scene, 8);
    policy::FisPolicy model{policy::feature_width(8), 6, 10};
};

}  // namespace

TEST(Fis, SlowScheduleAndLatentAgeOverRandomTriples) {
    Fixture f;
    SplitMixStream rng(61);
    for (int k = 0; k < 200; ++k) {
        fis::FisConfig cfg;
        cfg.n = 1 + static_cast<std::size_t>(rng.uniform() * 6);
        cfg.H = 1 + static_cast<std::size_t>(rng.uniform() * 6);
        cfg.open_loop = rng.uniform() < 0.3;
        const std::size_t budget = 1 + static_cast<std::size_t>(rng.uniform() * 40);
        const auto params = policy::init_params(f.model, rng(), 1.0);
        const auto log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, budget, rng());
        const std::size_t T = log.executed();
        ASSERT_GE(T, 1u);
        ASSERT_LE(T, budget);
        EXPECT_EQ(log.slow_steps.size(), (T + cfg.n - 1) / cfg.n);
        for (std::size_t i = 0; i < log.slow_steps.size(); ++i) EXPECT_EQ(log.slow_steps[i], i * cfg.n);
        for (const auto& s : log.steps) {
            EXPECT_LE(s.latent_step, s.step);
            EXPECT_LE(s.step - s.latent_step, cfg.n - 1);
            EXPECT_EQ(s.latent_step, cfg.n * (s.step / cfg.n));
        }
        EXPECT_DOUBLE_EQ(log.total_cost, cfg.slow_cost * log.slow_steps.size() + cfg.fast_cost * T);
    }
}

TEST(Fis, UnitRatioReproducesTheSingleSystemRollout) {
    Fixture f;
    SplitMixStream rng(62);
    fis::FisConfig cfg;
    cfg.n = 1;
    cfg.H = 1;
    for (int k = 0; k < 30; ++k) {
        const auto params = policy::init_params(f.model, rng(), 1.0);
        const std::uint64_t seed = rng();
        const std::size_t budget = 5 + static_cast<std::size_t>(rng.uniform() * 30);
        const auto log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, budget, seed);
        const auto single = policy::sample_navigation_rollout(f.model, params, f.episode, f.scene, seed, budget);
        EXPECT_EQ(log.rollout.choices, single.choices);
        EXPECT_EQ(log.rollout.contexts, single.contexts);
        EXPECT_EQ(log.rollout.log_probs, single.log_probs);
        EXPECT_EQ(log.trajectory, single.trajectory);
        EXPECT_EQ(log.final_position, single.final_position);
    }
}

TEST(Fis, FastStepsBetweenSlowUpdatesShareOneLatent) {
    Fixture f;
    fis::FisConfig cfg;
    cfg.n = 4;
    const auto params = policy::init_params(f.model, 3, 1.0);
    fis::RunOptions opt;
    opt.forced_actions = std::vector<env::Action>(12, env::Action::TurnLeft);
    const auto log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 12, 0, opt);
    ASSERT_EQ(log.executed(), 12u);
    const std::size_t w = f.model.feature_width();
    for (std::size_t t = 0; t < 12; ++t) {
        const auto ctx = log.rollout.context(t);
        const auto slow_part = ctx.subspan(w);
        const auto anchor = log.rollout.context(4 * (t / 4)).subspan(w);
        EXPECT_TRUE(std::equal(slow_part.begin(), slow_part.end(), anchor.begin())) << t;
    }
    // The latent at step 4 summarizes steps 0..3 only.
    const auto s4 = log.rollout.context(4).subspan(w);
    const auto s0 = log.rollout.context(0).subspan(w);
    EXPECT_FALSE(std::equal(s4.begin(), s4.end(), s0.begin()));
    for (std::size_t i = 0; i < 2 * w; ++i) EXPECT_EQ(s0[i], 0.0);
}

TEST(Fis, OpenLoopChunksReuseTheChunkObservation) {
    Fixture f;
    fis::FisConfig cfg;
    cfg.n = 6;
    cfg.H = 3;
    cfg.open_loop = true;
    const auto params = policy::init_params(f.model, 4, 1.0);
    fis::RunOptions opt;
    opt.forced_actions = std::vector<env::Action>(9, env::Action::Forward);
    opt.stop_on_arrival = false;
    const auto log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 9, 0, opt);
    ASSERT_EQ(log.executed(), 9u);
    for (std::size_t t = 0; t < 9; ++t) EXPECT_EQ(log.steps[t].obs_digest, log.steps[3 * (t / 3)].obs_digest);
    EXPECT_NE(log.steps[0].obs_digest, log.steps[3].obs_digest);
    cfg.open_loop = false;
    const auto closed = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 9, 0, opt);
    EXPECT_NE(closed.steps[0].obs_digest, closed.steps[1].obs_digest);
}

TEST(Fis, ModesChargeTheirCosts) {
    Fixture f;
    const auto params = policy::init_params(f.model, 5, 1.0);
    fis::RunOptions opt;
    opt.forced_actions = std::vector<env::Action>(10, env::Action::TurnRight);
    fis::FisConfig cfg;
    cfg.n = 3;
    cfg.mode = fis::Mode::FastOnly;
    auto log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 10, 0, opt);
    EXPECT_TRUE(log.slow_steps.empty());
    EXPECT_DOUBLE_EQ(log.total_cost, 10.0);
    for (const auto& s : log.steps) EXPECT_EQ(s.latent_step, 0u);

    cfg.mode = fis::Mode::SlowOnly;
    log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 10, 0, opt);
    EXPECT_EQ(log.slow_steps.size(), 10u);
    EXPECT_DOUBLE_EQ(log.total_cost, 10 * 10.0 + 10 * 10.0);

    cfg.mode = fis::Mode::Dual;
    log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 10, 0, opt);
    EXPECT_EQ(log.slow_steps.size(), 4u);
    EXPECT_DOUBLE_EQ(log.total_cost, 4 * 10.0 + 10.0);
}

TEST(Fis, EpisodesEndAtStopArrivalOrBudget) {
    Fixture f;
    const auto params = policy::init_params(f.model, 6, 1.0);
    fis::FisConfig cfg;
    fis::RunOptions opt;
    opt.forced_actions = std::vector<env::Action>{env::Action::Forward, env::Action::Stop, env::Action::Forward};
    auto log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 10, 0, opt);
    EXPECT_EQ(log.ending, fis::Ending::Stop);
    EXPECT_EQ(log.executed(), 2u);

    opt.forced_actions = std::vector<env::Action>(20, env::Action::Forward);
    log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 20, 0, opt);
    EXPECT_EQ(log.ending, fis::Ending::Arrival);
    EXPECT_LT(distance(log.final_position, f.episode.goal), f.episode.success_radius);

    opt.stop_on_arrival = false;
    log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 5, 0, opt);
    EXPECT_EQ(log.ending, fis::Ending::Budget);
    EXPECT_EQ(log.executed(), 5u);

    opt.forced_actions = std::vector<env::Action>(3, env::Action::TurnLeft);
    log = fis::run_episode(f.model, params, f.episode, f.scene, cfg, 10, 0, opt);
    EXPECT_EQ(log.ending, fis::Ending::ForcedExhausted);
}

TEST(Fis, ReplayingTheReferenceScoresPerfectly) {
    Fixture f;
    const auto params = policy::init_params(f.model, 7, 1.0);
    fis::RunOptions opt;
    opt.forced_actions = env::actions_for_path(f.scene, f.episode.start, f.episode.reference_trajectory);
    opt.stop_on_arrival = false;
    const auto log = fis::run_episode(f.model, params, f.episode, f.scene, {}, 40, 0, opt);
    EXPECT_EQ(log.trajectory, f.episode.reference_trajectory);
    EXPECT_EQ(log.ending, fis::Ending::Stop);
}

TEST(Fis, GreedyRunsAreSeedIndependent) {
    Fixture f;
    const auto params = policy::init_params(f.model, 8, 1.0);
    fis::RunOptions opt;
    opt.greedy = true;
    const auto a = fis::run_episode(f.model, params, f.episode, f.scene, {}, 20, 1, opt);
    const auto b = fis::run_episode(f.model, params, f.episode, f.scene, {}, 20, 2, opt);
    EXPECT_EQ(a.rollout.choices, b.rollout.choices);
}

TEST(Fis, ControllerChunksNeverCrossASlowBoundary) {
    Fixture f;
    SplitMixStream rng(63);
    for (int k = 0; k < 50; ++k) {
        fis::FisConfig cfg;
        cfg.n = 1 + static_cast<std::size_t>(rng.uniform() * 5);
        cfg.H = 1 + static_cast<std::size_t>(rng.uniform() * 5);
        const auto params = policy::init_params(f.model, rng(), 1.0);
        fis::Controller ctl(f.model, params, cfg, f.episode.instruction, rng());
        env::Pose pose = f.episode.start;
        std::size_t step = 0;
        while (step < 30 && !ctl.stopped()) {
            const auto obs = env::observe(pose, f.scene, f.episode.goal, step, 30);
            const auto chunk = ctl.on_observation(obs, step);
            ASSERT_FALSE(chunk.actions.empty());
            EXPECT_LE(chunk.actions.size(), std::min(cfg.H, cfg.n - step % cfg.n));
            EXPECT_EQ(chunk.latent_step, cfg.n * (step / cfg.n));
            for (env::Action a : chunk.actions) pose = env::step(pose, a, f.scene).new_pose;
            step += chunk.actions.size();
        }
        for (std::size_t i = 0; i < ctl.slow_steps().size(); ++i) EXPECT_EQ(ctl.slow_steps()[i] % cfg.n, 0u);
        EXPECT_EQ(ctl.slow_steps().size(), (step + cfg.n - 1) / cfg.n);
    }
}

TEST(Fis, ConfigValidation) {
    fis::FisConfig cfg;
    cfg.n = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.H = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    EXPECT_EQ(fis::parse_mode("slow_only"), fis::Mode::SlowOnly);
    EXPECT_FALSE(fis::parse_mode("turbo").has_value());
    cfg = {};
    cfg.mode = fis::Mode::SlowOnly;
    EXPECT_EQ(cfg.effective_n(), 1u);
}
