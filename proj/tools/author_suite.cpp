// Regenerates the bundled scenes and episode suites under data/.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "navlab/env.hpp"
#include "navlab/random.hpp"
#include "navlab/scene_io.hpp"

namespace fs = std::filesystem;
using namespace navlab;

namespace {

env::Scene make_scene(std::string id, Rect bounds, std::vector<Rect> obstacles, std::vector<env::Landmark> landmarks) {
    env::Scene s;
    s.id = std::move(id);
    s.bounds = bounds;
    s.obstacles = std::move(obstacles);
    s.landmarks = std::move(landmarks);
    env::validate_scene(s);
    return s;
}

std::vector<env::Scene> author_scenes() {
    std::vector<env::Scene> out;
    out.push_back(make_scene("open_room_a", {0, 0, 8, 8}, {{3.0, 3.0, 4.5, 4.0}},
                             {{"table", {3.75, 4.5}, "a wooden table in the middle of the room"},
                              {"window", {7.6, 6.0}, "a tall window on the east wall"},
                              {"plant", {0.6, 7.4}, "a green plant in the north west corner"},
                              {"door", {4.0, 0.3}, "the white door on the south wall"}}));
    out.push_back(make_scene("open_room_b", {0, 0, 10, 7}, {{1.0, 5.0, 3.0, 6.0}, {6.0, 2.0, 7.5, 3.0}},
                             {{"sofa", {2.0, 4.6}, "a grey sofa against the north wall"},
                              {"desk", {6.75, 3.4}, "a black desk with a lamp"},
                              {"shelf", {9.6, 0.6}, "a book shelf in the corner"}}));
    out.push_back(make_scene("meeting_room", {0, 0, 9, 6}, {{3.0, 2.5, 6.0, 3.5}},
                             {{"table", {4.5, 2.2}, "the long meeting table"},
                              {"screen", {8.6, 3.0}, "a large screen on the east wall"},
                              {"whiteboard", {0.4, 3.0}, "a whiteboard on the west wall"}}));
    out.push_back(make_scene("lounge", {0, 0, 8, 8},
                             {{1.0, 1.0, 3.0, 1.8}, {5.0, 5.8, 7.0, 6.6}, {3.5, 3.5, 4.5, 4.5}},
                             {{"sofa", {2.0, 2.2}, "a blue sofa near the entrance"},
                              {"armchair", {6.0, 5.4}, "a red armchair by the fireplace"},
                              {"coffee_table", {4.0, 3.1}, "a low coffee table with magazines"},
                              {"lamp", {7.5, 0.5}, "a floor lamp in the corner"}}));
    out.push_back(make_scene("corridor_a", {0, 0, 14, 2.5}, {{5.0, 0.0, 6.0, 0.4}, {9.0, 2.1, 10.0, 2.5}},
                             {{"bench", {5.5, 0.7}, "a metal bench along the south wall"},
                              {"door", {13.7, 1.25}, "the glass door at the end of the corridor"},
                              {"extinguisher", {9.5, 1.8}, "a red fire extinguisher"}}));
    out.push_back(make_scene("corridor_b", {0, 0, 10, 10}, {{2.5, 2.5, 10.0, 10.0}},
                             {{"elevator", {1.25, 9.6}, "the elevator at the north end"},
                              {"printer", {9.6, 1.25}, "a printer at the east end"},
                              {"plant", {1.25, 1.25}, "a potted plant at the corner"}}));
    out.push_back(make_scene("cluttered_a", {0, 0, 8, 8},
                             {{1.0, 1.0, 1.6, 1.6},
                              {2.5, 4.0, 3.1, 4.6},
                              {4.5, 1.5, 5.1, 2.1},
                              {6.0, 4.5, 6.6, 5.1},
                              {3.8, 6.2, 4.4, 6.8},
                              {1.2, 6.0, 1.8, 6.6}},
                             {{"box", {1.3, 2.0}, "a cardboard box on the floor"},
                              {"chair", {5.6, 6.5}, "a plastic chair"},
                              {"bin", {7.5, 0.5}, "a recycling bin"},
                              {"crate", {2.8, 3.6}, "a wooden crate"}}));
    out.push_back(make_scene("cluttered_b", {0, 0, 10, 8},
                             {{1.5, 2.0, 2.1, 2.6},
                              {3.5, 5.0, 4.1, 5.6},
                              {5.0, 2.5, 5.6, 3.1},
                              {7.0, 5.5, 7.6, 6.1},
                              {8.0, 1.5, 8.6, 2.1},
                              {2.0, 6.5, 2.6, 7.1},
                              {6.0, 0.5, 6.6, 1.1}},
                             {{"cart", {4.5, 4.0}, "a trolley cart"},
                              {"cabinet", {9.6, 4.0}, "a steel cabinet on the east wall"},
                              {"bucket", {0.5, 0.5}, "a yellow bucket"}}));
    out.push_back(make_scene("storage", {0, 0, 7, 7},
                             {{1.0, 1.5, 1.4, 5.5}, {3.0, 1.5, 3.4, 5.5}, {5.0, 1.5, 5.4, 5.5}},
                             {{"shelf", {2.2, 3.5}, "the aisle between the first shelves"},
                              {"ladder", {6.5, 6.5}, "a step ladder"},
                              {"boxes", {4.2, 0.6}, "a stack of boxes"}}));
    out.push_back(make_scene("office", {0, 0, 9, 9},
                             {{1.0, 1.0, 2.5, 1.8}, {6.5, 1.0, 8.0, 1.8}, {1.0, 7.2, 2.5, 8.0}, {6.5, 7.2, 8.0, 8.0}},
                             {{"desk", {1.75, 2.2}, "a desk with two monitors"},
                              {"printer", {4.5, 8.6}, "the shared printer"},
                              {"couch", {7.25, 6.8}, "a small couch"},
                              {"kitchen", {8.5, 4.5}, "the kitchenette"}}));
    return out;
}

// Every point of the disc of radius `clearance` around p is free (sampled).
bool clear_around(const env::Scene& s, Vec2 p, double clearance) {
    if (!s.is_free(p)) return false;
    for (int k = 0; k < 16; ++k) {
        const double a = k * kTwoPi / 16.0;
        if (!s.is_free(p + clearance * Vec2{std::cos(a), std::sin(a)})) return false;
    }
    return true;
}

const env::Landmark& nearest_landmark(const env::Scene& s, Vec2 p) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < s.landmarks.size(); ++i) {
        if (distance(s.landmarks[i].position, p) < distance(s.landmarks[best].position, p)) best = i;
    }
    return s.landmarks[best];
}

std::string pretty(std::string category) {
    for (char& c : category) {
        if (c == '_') c = ' ';
    }
    return category;
}

struct EpisodeSpec {
    std::size_t min_steps = 6;
    std::size_t max_steps = 14;
    int max_turn = 4;  // initial heading offset in turn increments
    double clearance = 0.3;
    double success_radius = 0.5;
};

// Straight, unobstructed reference from a lattice start along a 15°-multiple heading.
env::Episode author_episode(const env::Scene& s, SplitMixStream& rng, const std::string& id, const EpisodeSpec& spec) {
    const double turn = s.kinematics.turn_angle;
    const double step = s.kinematics.forward_step;
    for (int attempt = 0; attempt < 100000; ++attempt) {
        const auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)); };
        const int nx = static_cast<int>(std::floor((s.bounds.width() - 1.0) / step));
        const int ny = static_cast<int>(std::floor((s.bounds.height() - 1.0) / step));
        const Vec2 start{s.bounds.min_x + 0.5 + step * static_cast<double>(pick(static_cast<std::size_t>(nx) + 1)),
                         s.bounds.min_y + 0.5 + step * static_cast<double>(pick(static_cast<std::size_t>(ny) + 1))};
        const int dir = static_cast<int>(pick(24));
        const std::size_t steps = spec.min_steps + pick(spec.max_steps - spec.min_steps + 1);
        const int offset = static_cast<int>(pick(static_cast<std::size_t>(2 * spec.max_turn + 1))) - spec.max_turn;
        if (!clear_around(s, start, spec.clearance)) continue;

        env::Pose pose{start, wrap_heading(dir * turn)};
        Trajectory ref;
        ref.points.push_back(start);
        bool ok = true;
        for (std::size_t k = 0; k < steps && ok; ++k) {
            const env::StepResult r = env::step(pose, env::Action::Forward, s);
            ok = !r.collided && clear_around(s, r.new_pose.position, spec.clearance);
            pose = r.new_pose;
            ref.points.push_back(pose.position);
        }
        if (!ok) continue;

        env::Episode e;
        e.id = id;
        e.scene_id = s.id;
        e.start = env::Pose{start, wrap_heading((dir + offset) * turn)};
        e.goal = ref.back();
        e.reference_trajectory = ref;
        e.success_radius = spec.success_radius;
        const env::Landmark& lm = nearest_landmark(s, e.goal);
        const char* lead = offset > 0 ? "turn right" : offset < 0 ? "turn left" : "go straight";
        e.instruction = std::string(lead) + " and walk toward the " + pretty(lm.category) + ", " + lm.description +
                        ", stopping after about " + std::to_string(static_cast<int>(std::lround(steps * step))) +
                        " meters";
        env::validate_episode(e, s);
        return e;
    }
    throw std::runtime_error("could not place an episode in " + s.id);
}

env::Episode author_question(const env::Scene& s, SplitMixStream& rng, const std::string& id) {
    EpisodeSpec spec;
    spec.min_steps = 3;
    spec.max_steps = 6;
    env::Episode e = author_episode(s, rng, id, spec);
    const env::Landmark& lm = nearest_landmark(s, e.goal);
    e.task_kind = env::TaskKind::QuestionAnswer;
    e.instruction = "walk forward and name the object closest to where you stop";
    e.ground_truth_answer = pretty(lm.category);
    return e;
}

std::vector<env::Episode> author_suite(const std::vector<const env::Scene*>& scenes, std::size_t per_scene,
                                       const std::string& prefix, std::uint64_t seed, const EpisodeSpec& spec) {
    std::vector<env::Episode> out;
    SplitMixStream rng(seed);
    for (const env::Scene* s : scenes) {
        for (std::size_t i = 0; i < per_scene; ++i) {
            out.push_back(author_episode(*s, rng, prefix + "-" + s->id + "-" + std::to_string(i), spec));
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regenerate the bundled scenes and episode suites"};
    std::string out_dir = "data";
    std::uint64_t seed = 2024;
    app.add_option("--out", out_dir, "output data directory");
    app.add_option("--seed", seed, "authoring seed");
    CLI11_PARSE(app, argc, argv);

    try {
        const fs::path root(out_dir);
        fs::create_directories(root / "scenes");
        fs::create_directories(root / "episodes");
        const std::vector<env::Scene> scenes = author_scenes();
        for (const env::Scene& s : scenes) env::save_scene(s, root / "scenes" / (s.id + ".json"));
        const auto by_id = [&](const std::string& id) -> const env::Scene* {
            for (const env::Scene& s : scenes) {
                if (s.id == id) return &s;
            }
            throw std::runtime_error("unknown scene " + id);
        };

        const std::vector<const env::Scene*> nav = {by_id("open_room_a"), by_id("lounge"), by_id("corridor_a"),
                                                    by_id("cluttered_a")};
        const std::vector<const env::Scene*> synth = {by_id("open_room_b"), by_id("meeting_room"),
                                                      by_id("corridor_b"), by_id("cluttered_b"), by_id("storage"),
                                                      by_id("office")};
        EpisodeSpec spec;
        env::save_episodes(author_suite(nav, 6, "nav", mix_seed(seed, {1}), spec), root / "episodes" / "nav_suite.jsonl");
        env::save_episodes(author_suite(nav, 4, "heldout", mix_seed(seed, {2}), spec),
                           root / "episodes" / "nav_heldout.jsonl");
        env::save_episodes(author_suite(synth, 3, "synth", mix_seed(seed, {3}), spec),
                           root / "episodes" / "synth_suite.jsonl");

        std::vector<env::Episode> qa;
        SplitMixStream rng(mix_seed(seed, {4}));
        for (const env::Scene& s : scenes) qa.push_back(author_question(s, rng, "qa-" + s.id));
        env::save_episodes(qa, root / "episodes" / "qa_suite.jsonl");
        std::cout << "wrote " << scenes.size() << " scenes to " << root.string() << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
