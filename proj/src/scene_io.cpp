#include "navlab/scene_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace navlab {

using nlohmann::json;

void to_json(json& j, const Vec2& v) { j = json{{"x", v.x}, {"y", v.y}}; }
void from_json(const json& j, Vec2& v) {
    v.x = j.at("x").get<double>();
    v.y = j.at("y").get<double>();
}

void to_json(json& j, const Rect& r) {
    j = json{{"min_x", r.min_x}, {"min_y", r.min_y}, {"max_x", r.max_x}, {"max_y", r.max_y}};
}
void from_json(const json& j, Rect& r) {
    r.min_x = j.at("min_x").get<double>();
    r.min_y = j.at("min_y").get<double>();
    r.max_x = j.at("max_x").get<double>();
    r.max_y = j.at("max_y").get<double>();
}

void to_json(json& j, const Trajectory& t) { j = t.points; }
void from_json(const json& j, Trajectory& t) { t.points = j.get<std::vector<Vec2>>(); }

namespace env {

std::string_view task_kind_name(TaskKind k) {
    return k == TaskKind::Navigation ? "navigation" : "question_answer";
}

void to_json(json& j, const Scene& s) {
    json landmarks = json::array();
    for (const Landmark& lm : s.landmarks) {
        landmarks.push_back({{"category", lm.category}, {"position", lm.position}, {"description", lm.description}});
    }
    j = json{{"id", s.id},
             {"bounds", s.bounds},
             {"obstacles", s.obstacles},
             {"landmarks", landmarks},
             {"kinematics",
              {{"forward_step", s.kinematics.forward_step}, {"turn_angle", s.kinematics.turn_angle}}},
             {"ray_count", s.ray_count}};
    if (s.max_range) j["max_range"] = *s.max_range;
}

void from_json(const json& j, Scene& s) {
    s.id = j.at("id").get<std::string>();
    s.bounds = j.at("bounds").get<Rect>();
    s.obstacles = j.value("obstacles", std::vector<Rect>{});
    s.landmarks.clear();
    for (const json& lm : j.value("landmarks", json::array())) {
        s.landmarks.push_back({lm.at("category").get<std::string>(), lm.at("position").get<Vec2>(),
                               lm.value("description", std::string{})});
    }
    s.kinematics = Kinematics{};
    if (j.contains("kinematics")) {
        const json& k = j.at("kinematics");
        s.kinematics.forward_step = k.value("forward_step", s.kinematics.forward_step);
        s.kinematics.turn_angle = k.value("turn_angle", s.kinematics.turn_angle);
    }
    s.ray_count = j.value("ray_count", 16);
    s.max_range.reset();
    if (j.contains("max_range") && !j.at("max_range").is_null()) s.max_range = j.at("max_range").get<double>();
}

void to_json(json& j, const Pose& p) { j = json{{"position", p.position}, {"heading", p.heading}}; }
void from_json(const json& j, Pose& p) {
    p.position = j.at("position").get<Vec2>();
    p.heading = wrap_heading(j.at("heading").get<double>());
}

void to_json(json& j, const Episode& e) {
    j = json{{"id", e.id},
             {"scene_id", e.scene_id},
             {"start", e.start},
             {"instruction", e.instruction},
             {"goal", e.goal},
             {"reference_trajectory", e.reference_trajectory},
             {"success_radius", e.success_radius},
             {"task_kind", task_kind_name(e.task_kind)}};
    if (e.ground_truth_answer) j["ground_truth_answer"] = *e.ground_truth_answer;
}

void from_json(const json& j, Episode& e) {
    e.id = j.at("id").get<std::string>();
    e.scene_id = j.at("scene_id").get<std::string>();
    e.start = j.at("start").get<Pose>();
    e.instruction = j.at("instruction").get<std::string>();
    e.goal = j.at("goal").get<Vec2>();
    e.reference_trajectory = j.at("reference_trajectory").get<Trajectory>();
    e.success_radius = j.value("success_radius", 0.5);
    const std::string kind = j.value("task_kind", std::string{"navigation"});
    if (kind == "navigation") {
        e.task_kind = TaskKind::Navigation;
    } else if (kind == "question_answer") {
        e.task_kind = TaskKind::QuestionAnswer;
    } else {
        throw SceneError("episode " + e.id + ": unknown task_kind '" + kind + "'");
    }
    e.ground_truth_answer.reset();
    if (j.contains("ground_truth_answer") && !j.at("ground_truth_answer").is_null()) {
        e.ground_truth_answer = j.at("ground_truth_answer").get<std::string>();
    }
}

void to_json(json& j, const Observation& o) {
    j = json{{"depth_rays", o.depth_rays},
             {"goal_bearing", o.goal_bearing},
             {"goal_distance", o.goal_distance},
             {"step_fraction", o.step_fraction}};
}

void from_json(const json& j, Observation& o) {
    o.depth_rays = j.at("depth_rays").get<std::vector<double>>();
    o.goal_bearing = j.at("goal_bearing").get<double>();
    o.goal_distance = j.at("goal_distance").get<double>();
    o.step_fraction = j.at("step_fraction").get<double>();
}

void SceneLibrary::add(Scene scene) {
    validate_scene(scene);
    std::string id = scene.id;
    scenes_.insert_or_assign(std::move(id), std::move(scene));
}

const Scene& SceneLibrary::get(const std::string& id) const {
    auto it = scenes_.find(id);
    if (it == scenes_.end()) throw SceneError("unknown scene '" + id + "'");
    return it->second;
}

std::vector<std::string> SceneLibrary::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : scenes_) out.push_back(id);
    return out;
}

SceneLibrary SceneLibrary::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw SceneError("scene directory not found: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    SceneLibrary lib;
    for (const auto& f : files) lib.add(load_scene(f));
    return lib;
}

Scene load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SceneError("cannot open scene file " + path.string());
    try {
        return json::parse(in).get<Scene>();
    } catch (const json::exception& e) {
        throw SceneError("malformed scene file " + path.string() + ": " + e.what());
    }
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw SceneError("cannot write scene file " + path.string());
    out << json(scene).dump(2) << '\n';
}

std::vector<Episode> load_episodes_unchecked(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SceneError("cannot open episode file " + path.string());
    std::vector<Episode> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        try {
            out.push_back(json::parse(line).get<Episode>());
        } catch (const json::exception& e) {
            throw SceneError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<Episode> load_episodes(const std::filesystem::path& path, const SceneLibrary& scenes) {
    auto episodes = load_episodes_unchecked(path);
    for (const Episode& e : episodes) validate_episode(e, scenes.get(e.scene_id));
    return episodes;
}

void save_episodes(const std::vector<Episode>& episodes, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw SceneError("cannot write episode file " + path.string());
    for (const Episode& e : episodes) out << json(e).dump() << '\n';
}

}  // namespace env
}  // namespace navlab
