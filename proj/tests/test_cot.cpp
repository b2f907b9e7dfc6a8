#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "navlab/cot_engine.hpp"
#include "navlab/trace_format.hpp"
#include "test_support.hpp"

using namespace navlab;

namespace {

struct Suite {
    env::SceneLibrary scenes = fixtures::bundled_scenes();
    std::vector<env::Episode> episodes =
        env::load_episodes(fixtures::data_dir() / "episodes" / "synth_suite.jsonl", scenes);
};

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("navlab_cot_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Recount from the corruption schedule: one record per reference action, a
// record is corrupted when its uniform draw falls below the rate, and every
// uncorrupted mock response is kept.
cot::SynthesisStats recount(const Suite& s, double rate, std::uint64_t seed) {
    cot::SynthesisStats st;
    for (const env::Episode& e : s.episodes) {
        const auto& scene = s.scenes.get(e.scene_id);
        std::size_t turns = 0;
        env::Pose pose = e.start;
        for (std::size_t i = 1; i < e.reference_trajectory.size(); ++i) {
            const Vec2 d = e.reference_trajectory.points[i] - pose.position;
            const double delta = wrap_bearing(std::atan2(d.y, d.x) - pose.heading);
            turns += static_cast<std::size_t>(std::lround(std::abs(delta) / scene.kinematics.turn_angle));
            pose.heading = wrap_heading(std::atan2(d.y, d.x));
            pose.position = e.reference_trajectory.points[i];
        }
        const std::size_t records = turns + (e.reference_trajectory.size() - 1) + 1;  // turns, steps, STOP
        for (std::size_t t = 0; t < records; ++t) {
            ++st.raw;
            if (uniform_at(seed, {fnv1a64(e.id), t, 0}) < rate) {
                ++st.rule_rejected;
            } else {
                ++st.kept;
            }
        }
    }
    return st;
}

}  // namespace

TEST(Cot, EveryMutationIsCaughtByTheRuleFilter) {
    cot::RawRecord rec;
    rec.prompt.feasible_actions = {"FORWARD", "TURN_LEFT", "TURN_RIGHT", "STOP"};
    for (std::size_t m = 0; m < cot::kMutationCount; ++m) {
        rec.raw_response = cot::apply_mutation("goal ahead far path clear so go", env::Action::Forward,
                                               static_cast<cot::Mutation>(m));
        const auto out = cot::rule_filter(rec);
        EXPECT_FALSE(out.kept) << cot::mutation_name(static_cast<cot::Mutation>(m));
        EXPECT_EQ(out.stage, cot::Stage::Rule);
        EXPECT_TRUE(out.reason.has_value());
    }
    rec.raw_response = "<think>goal ahead so go</think><action>FORWARD</action>";
    EXPECT_TRUE(cot::rule_filter(rec).kept);
    rec.prompt.feasible_actions = {"TURN_LEFT", "TURN_RIGHT", "STOP"};
    EXPECT_FALSE(cot::rule_filter(rec).kept);
    rec.raw_response = "Here: <think>goal ahead so go</think><action>STOP</action> done";
    EXPECT_TRUE(cot::rule_filter(rec).kept);
}

TEST(Cot, FeasibilityFilterRejectsCollisionsAndDrift) {
    const env::Scene s = fixtures::box_scene();
    const env::Episode e = fixtures::straight_episode(s, 6, "drift", 2.0);
    cot::RawRecord rec;
    rec.episode_id = e.id;
    rec.pose = {{2.25, 2.0}, 0.0};
    rec.raw_response = "<think>go</think><action>FORWARD</action>";
    EXPECT_EQ(cot::feasibility_filter(rec, e, s, 0.5).stage, cot::Stage::Feasibility);  // into the box
    rec.pose = {{0.5, 2.0}, std::numbers::pi / 2.0};
    EXPECT_TRUE(cot::feasibility_filter(rec, e, s, 0.5).kept);
    EXPECT_FALSE(cot::feasibility_filter(rec, e, s, 0.1).kept);  // leaves the reference corridor
}

TEST(Cot, FeasibleActionsFollowTheCentreRay) {
    env::Observation o;
    o.depth_rays = {1.0, 1.0, 0.2, 1.0};
    auto f = cot::feasible_actions(o, 0.25);
    EXPECT_EQ(std::count(f.begin(), f.end(), env::Action::Forward), 0);
    o.depth_rays[2] = 0.3;
    f = cot::feasible_actions(o, 0.25);
    EXPECT_EQ(std::count(f.begin(), f.end(), env::Action::Forward), 1);
    EXPECT_EQ(std::count(f.begin(), f.end(), env::Action::Stop), 1);
}

TEST(Cot, OracleActionStopsInsideTheRadius) {
    env::Observation o;
    o.depth_rays = {3.0, 3.0, 3.0, 3.0};
    o.goal_distance = 0.3;
    const std::vector<env::Action> all(env::kAllActions.begin(), env::kAllActions.end());
    EXPECT_EQ(cot::oracle_action(o, all, 0.25, 0.5), env::Action::Stop);
    o.goal_distance = 3.0;
    o.goal_bearing = 0.0;
    EXPECT_EQ(cot::oracle_action(o, all, 0.25, 0.5), env::Action::Forward);
    o.goal_bearing = 2.0;
    EXPECT_EQ(cot::oracle_action(o, all, 0.25, 0.5), env::Action::TurnLeft);
    o.goal_bearing = -2.0;
    EXPECT_EQ(cot::oracle_action(o, all, 0.25, 0.5), env::Action::TurnRight);
}

TEST(Cot, SynthesisStatsMatchAnIndependentRecount) {
    const Suite s;
    const auto dir = temp_dir("recount");
    for (double rate : {0.0, 0.3, 1.0}) {
        for (std::uint64_t seed : {0u, 5u}) {
            cot::MockGenerator gen({rate, seed});
            const auto stats = cot::synthesize_dataset(s.episodes, s.scenes, gen, dir / "d.jsonl");
            EXPECT_EQ(stats, recount(s, rate, seed)) << "rate " << rate << " seed " << seed;
            EXPECT_EQ(stats.raw, stats.rule_rejected + stats.feasibility_rejected + stats.kept);
            const auto kept = cot::load_dataset(dir / "d.jsonl");
            ASSERT_EQ(kept.size(), stats.kept);
            for (const cot::RawRecord& r : kept) {
                ASSERT_TRUE(r.trace.has_value());
                EXPECT_DOUBLE_EQ(trace::format_reward(*r.trace), 1.0);
                const env::Episode* ep = nullptr;
                for (const auto& e : s.episodes) {
                    if (e.id == r.episode_id) ep = &e;
                }
                ASSERT_NE(ep, nullptr);
                cot::RawRecord strict = r;
                strict.raw_response = *r.trace;
                EXPECT_TRUE(cot::rule_filter(strict).kept);
                EXPECT_TRUE(cot::feasibility_filter(strict, *ep, s.scenes.get(r.scene_id), 0.5).kept);
            }
        }
    }
    std::filesystem::remove_all(dir);
}

TEST(Cot, SynthesisIsExecutionIndependent) {
    const Suite s;
    const auto dir = temp_dir("exec");
    cot::MockGenerator gen({0.3, 1});
    cot::SynthesisOptions opt;
    opt.exec = Exec::Serial;
    opt.rejected_path = dir / "rej_serial.jsonl";
    cot::synthesize_dataset(s.episodes, s.scenes, gen, dir / "serial.jsonl", opt);
    opt.exec = Exec::Parallel;
    opt.rejected_path = dir / "rej_parallel.jsonl";
    cot::synthesize_dataset(s.episodes, s.scenes, gen, dir / "parallel.jsonl", opt);
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    EXPECT_EQ(slurp(dir / "serial.jsonl"), slurp(dir / "parallel.jsonl"));
    EXPECT_EQ(slurp(dir / "rej_serial.jsonl"), slurp(dir / "rej_parallel.jsonl"));
    EXPECT_FALSE(slurp(dir / "rej_serial.jsonl").empty());
    std::filesystem::remove_all(dir);
}

TEST(Cot, RecordsRoundTripThroughJson) {
    cot::RawRecord r;
    r.scene_id = "s";
    r.episode_id = "e";
    r.step_index = 3;
    r.pose = {{1.0, 2.0}, 0.5};
    r.observation.depth_rays = {1.0, 2.0};
    r.observation.goal_bearing = -0.25;
    r.prompt = {"walk", "rays", {"STOP"}, std::string(trace::kFormatSpec)};
    r.raw_response = "<think>x</think><action>STOP</action>";
    r.trace = r.raw_response;
    EXPECT_EQ(nlohmann::json(r).get<cot::RawRecord>(), r);
}

TEST(Cot, GeneratorEndpointParsing) {
    const auto mock = nlohmann::json{{"kind", "mock"}, {"corruption_rate", 0.25}, {"seed", 4}}.get<cot::GeneratorEndpoint>();
    EXPECT_EQ(mock.kind, cot::GeneratorEndpoint::Kind::Mock);
    EXPECT_DOUBLE_EQ(mock.mock.corruption_rate, 0.25);
    EXPECT_THROW((nlohmann::json{{"kind", "mock"}, {"corruption_rate", 1.5}}.get<cot::GeneratorEndpoint>()),
                 std::invalid_argument);
    EXPECT_THROW((nlohmann::json{{"kind", "carrier-pigeon"}}.get<cot::GeneratorEndpoint>()), std::invalid_argument);
}

TEST(Cot, HttpGeneratorAgainstTheLoopbackStub) {
    const Suite s;
    const auto dir = temp_dir("http");
    cot::HttpSettings fields;
    cot::StubGeneratorServer stub({0.3, 2}, fields);
    stub.start();
    cot::HttpSettings http = fields;
    http.base_url = stub.base_url();
    const cot::HttpGenerator remote(http);
    const cot::MockGenerator local({0.3, 2});
    const std::vector<env::Episode> few(s.episodes.begin(), s.episodes.begin() + 3);
    const auto a = cot::synthesize_dataset(few, s.scenes, remote, dir / "remote.jsonl");
    const auto b = cot::synthesize_dataset(few, s.scenes, local, dir / "local.jsonl");
    EXPECT_EQ(a.raw, b.raw);
    EXPECT_EQ(stub.requests(), a.raw);
    EXPECT_GT(a.kept, 0u);
    stub.stop();

    http.base_url = "http://127.0.0.1:1";
    http.retries = 0;
    http.timeout_seconds = 0.5;
    const cot::HttpGenerator dead(http);
    EXPECT_THROW(cot::synthesize_dataset(few, s.scenes, dead, dir / "dead.jsonl"), cot::GeneratorUnavailable);
    std::filesystem::remove_all(dir);
}
