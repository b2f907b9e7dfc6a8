#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "navlab/env.hpp"
#include "navlab/metrics.hpp"
#include "test_support.hpp"

using namespace navlab;
using env::Action;

namespace {

// Exact Euclidean shortest path through the visibility graph of the start,
// goal and the four obstacle corners.
double visibility_shortest(const env::Scene& scene, Vec2 a, Vec2 b) {
    std::vector<Vec2> nodes{a, b};
    for (const Rect& r : scene.obstacles) {
        for (Vec2 c : {Vec2{r.min_x, r.min_y}, Vec2{r.min_x, r.max_y}, Vec2{r.max_x, r.min_y},
                       Vec2{r.max_x, r.max_y}}) {
            nodes.push_back(c);
        }
    }
    // Segments may run along an obstacle edge but not through its interior.
    auto visible = [&](Vec2 p, Vec2 q) {
        for (int i = 1; i < 200; ++i) {
            const Vec2 s = p + (i / 200.0) * (q - p);
            if (!scene.bounds.contains_closed(s)) return false;
            for (const Rect& r : scene.obstacles) {
                if (r.contains_open(s)) return false;
            }
        }
        return true;
    };
    const std::size_t n = nodes.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<bool> done(n, false);
    dist[0] = 0.0;
    for (std::size_t it = 0; it < n; ++it) {
        std::size_t u = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (!done[i] && (u == n || dist[i] < dist[u])) u = i;
        }
        done[u] = true;
        for (std::size_t v = 0; v < n; ++v) {
            if (!done[v] && visible(nodes[u], nodes[v])) {
                dist[v] = std::min(dist[v], dist[u] + distance(nodes[u], nodes[v]));
            }
        }
    }
    return dist[1];
}

// Depth along a ray by fine marching until leaving bounds or entering an obstacle.
double marched_depth(const env::Scene& scene, env::Pose pose, double rel) {
    const double a = pose.heading + rel;
    const Vec2 dir{std::cos(a), std::sin(a)};
    for (double t = 0.0;; t += 1e-4) {
        const Vec2 p = pose.position + t * dir;
        if (!scene.bounds.contains_closed(p)) return t;
        for (const Rect& r : scene.obstacles) {
            if (r.contains_closed(p)) return t;
        }
    }
}

}  // namespace

TEST(Env, ActionNamesRoundTrip) {
    for (Action a : env::kAllActions) EXPECT_EQ(env::parse_action(env::action_name(a)), a);
    EXPECT_FALSE(env::parse_action("JUMP").has_value());
}

TEST(Env, StepKinematics) {
    const env::Scene s = fixtures::box_scene();
    env::Pose p{{0.5, 0.5}, 0.0};
    auto r = env::step(p, Action::Forward, s);
    EXPECT_FALSE(r.collided);
    EXPECT_NEAR(r.new_pose.position.x, 0.75, 1e-12);
    EXPECT_NEAR(r.new_pose.position.y, 0.5, 1e-12);

    r = env::step(p, Action::TurnRight, s);
    EXPECT_NEAR(r.new_pose.heading, kTwoPi - 15.0 * std::numbers::pi / 180.0, 1e-12);
    r = env::step(p, Action::TurnLeft, s);
    EXPECT_NEAR(r.new_pose.heading, 15.0 * std::numbers::pi / 180.0, 1e-12);
    EXPECT_EQ(r.new_pose.position, p.position);

    r = env::step(p, Action::Stop, s);
    EXPECT_TRUE(r.terminated);
    EXPECT_EQ(r.new_pose.position, p.position);
}

TEST(Env, ForwardIsBlockedByObstaclesAndWalls) {
    const env::Scene s = fixtures::box_scene();
    auto r = env::step({{2.4, 2.0}, 0.0}, Action::Forward, s);
    EXPECT_TRUE(r.collided);
    EXPECT_EQ(r.new_pose.position, (Vec2{2.4, 2.0}));
    r = env::step({{5.9, 2.0}, 0.0}, Action::Forward, s);
    EXPECT_TRUE(r.collided);
    r = env::step({{2.0, 0.5}, 0.0}, Action::Forward, s);
    EXPECT_FALSE(r.collided);
}

TEST(Env, DepthRaysMatchMarching) {
    const env::Scene s = fixtures::box_scene();
    SplitMixStream rng(21);
    for (int k = 0; k < 40; ++k) {
        env::Pose pose{{rng.uniform() * 6.0, rng.uniform() * 4.0}, rng.uniform() * kTwoPi};
        if (!s.is_free(pose.position)) continue;
        const env::Observation o = env::observe(pose, s, {5.0, 3.0}, 3, 10);
        ASSERT_EQ(o.depth_rays.size(), 8u);
        for (int i = 0; i < s.ray_count; ++i) {
            EXPECT_NEAR(o.depth_rays[i], marched_depth(s, pose, env::ray_angle(i, s.ray_count)), 2e-4);
        }
        const Vec2 d = Vec2{5.0, 3.0} - pose.position;
        EXPECT_NEAR(o.goal_distance, norm(d), 1e-12);
        EXPECT_NEAR(o.goal_bearing, wrap_bearing(std::atan2(d.y, d.x) - pose.heading), 1e-12);
        EXPECT_DOUBLE_EQ(o.step_fraction, 0.3);
    }
}

TEST(Env, RayAnglesSpanTheFrontHalfPlane) {
    EXPECT_DOUBLE_EQ(env::ray_angle(0, 16), -std::numbers::pi / 2.0);
    EXPECT_DOUBLE_EQ(env::ray_angle(8, 16), 0.0);
    EXPECT_LT(env::ray_angle(15, 16), std::numbers::pi / 2.0);
}

TEST(Env, ShortestPathMatchesVisibilityGraph) {
    const env::Scene s = fixtures::box_scene();
    SplitMixStream rng(22);
    int detours = 0;
    for (int k = 0; k < 30; ++k) {
        const Vec2 a{0.2 + rng.uniform() * 2.0, 0.2 + rng.uniform() * 3.6};
        const Vec2 b{3.8 + rng.uniform() * 2.0, 0.2 + rng.uniform() * 3.6};
        const double exact = visibility_shortest(s, a, b);
        const double grid = env::shortest_path_length(s, a, b);
        if (exact > distance(a, b) + 1e-9) ++detours;
        // An 8-connected grid overestimates by at most the octile factor plus endpoint snapping.
        EXPECT_GE(grid, exact - 2.0 * env::kDefaultGridCell);
        EXPECT_LE(grid, exact * 1.0824 + 4.0 * env::kDefaultGridCell);
    }
    EXPECT_GT(detours, 5);
}

TEST(Env, ShortestPathIsExactWhenUnobstructed) {
    const env::Scene s = fixtures::box_scene();
    EXPECT_DOUBLE_EQ(env::shortest_path_length(s, {0.5, 0.5}, {5.5, 0.5}), 5.0);
    EXPECT_DOUBLE_EQ(env::shortest_path_length(s, {1.0, 1.0}, {1.0, 1.0}), 0.0);
}

TEST(Env, ShortestPathRaisesWithoutRoute) {
    env::Scene s;
    s.id = "split";
    s.bounds = {0, 0, 4, 2};
    s.obstacles = {{1.9, 0.0, 2.1, 2.0}};
    env::validate_scene(s);
    EXPECT_THROW(env::shortest_path_length(s, {0.5, 1.0}, {3.5, 1.0}), env::NoPathError);
}

TEST(Env, ActionsForPathReplaysTheReference) {
    const env::Scene s = fixtures::box_scene();
    env::Episode e = fixtures::straight_episode(s, 6);
    const auto actions = env::actions_for_path(s, e.start, e.reference_trajectory);
    ASSERT_EQ(actions.size(), 7u);
    EXPECT_EQ(actions.back(), Action::Stop);

    // A turn-then-walk path.
    Trajectory bent{{{0.5, 0.5}, {0.75, 0.5}, {0.75, 0.75}}};
    const auto turns = env::actions_for_path(s, {{0.5, 0.5}, 0.0}, bent);
    const std::vector<Action> expected{Action::Forward,  Action::TurnLeft, Action::TurnLeft, Action::TurnLeft,
                                       Action::TurnLeft, Action::TurnLeft, Action::TurnLeft, Action::Forward,
                                       Action::Stop};
    EXPECT_EQ(turns, expected);

    Trajectory off_lattice{{{0.5, 0.5}, {0.8, 0.5}}};
    EXPECT_THROW(env::actions_for_path(s, {{0.5, 0.5}, 0.0}, off_lattice), env::SceneError);
}

TEST(Env, ValidateSceneRejectsBadGeometry) {
    env::Scene s = fixtures::box_scene();
    s.obstacles.push_back({5.0, 3.0, 7.0, 5.0});
    EXPECT_THROW(env::validate_scene(s), env::SceneError);
    s = fixtures::box_scene();
    s.landmarks.push_back({"ghost", {3.0, 2.0}, "inside the box"});
    EXPECT_THROW(env::validate_scene(s), env::SceneError);
    s = fixtures::box_scene();
    s.ray_count = 0;
    EXPECT_THROW(env::validate_scene(s), env::SceneError);
}

TEST(Env, ValidateEpisode) {
    const env::Scene s = fixtures::box_scene();
    env::Episode e = fixtures::straight_episode(s, 4);
    EXPECT_NO_THROW(env::validate_episode(e, s));
    e.start.position = {3.0, 2.0};
    EXPECT_THROW(env::validate_episode(e, s), env::SceneError);
    e = fixtures::straight_episode(s, 4);
    e.task_kind = env::TaskKind::QuestionAnswer;
    EXPECT_THROW(env::validate_episode(e, s), env::SceneError);
}

TEST(Env, NarrationUsesTraceWords) {
    env::Observation o;
    o.depth_rays = {3.0, 3.0, 0.3, 3.0};
    o.goal_bearing = 0.5;
    o.goal_distance = 0.5;
    EXPECT_EQ(env::narrate(o, 0.25), "goal left near wall ahead");
    o.goal_bearing = 0.0;
    o.goal_distance = 3.0;
    o.depth_rays[2] = 2.0;
    EXPECT_EQ(env::narrate(o, 0.25), "goal ahead far path clear");
    EXPECT_EQ(env::narrate_decision(Action::TurnRight), "so turn right");
}

TEST(Env, BundledEpisodesReplayPerfectly) {
    const env::SceneLibrary scenes = fixtures::bundled_scenes();
    for (const char* suite : {"nav_suite.jsonl", "nav_heldout.jsonl", "synth_suite.jsonl"}) {
        for (const env::Episode& e : env::load_episodes(fixtures::data_dir() / "episodes" / suite, scenes)) {
            const env::Scene& s = scenes.get(e.scene_id);
            env::Pose pose = e.start;
            Trajectory walked{{pose.position}};
            for (Action a : env::actions_for_path(s, e.start, e.reference_trajectory)) {
                const auto r = env::step(pose, a, s);
                ASSERT_FALSE(r.collided) << e.id;
                if (r.new_pose.position != pose.position) walked.points.push_back(r.new_pose.position);
                pose = r.new_pose;
            }
            EXPECT_LT(distance(pose.position, e.goal), e.success_radius) << e.id;
            EXPECT_NEAR(metrics::dtw(walked, e.reference_trajectory), 0.0, 1e-9) << e.id;
        }
    }
}
