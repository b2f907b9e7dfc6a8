#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/env.hpp"

namespace navlab {

void to_json(nlohmann::json& j, const Vec2& v);
void from_json(const nlohmann::json& j, Vec2& v);
void to_json(nlohmann::json& j, const Rect& r);
void from_json(const nlohmann::json& j, Rect& r);
void to_json(nlohmann::json& j, const Trajectory& t);
void from_json(const nlohmann::json& j, Trajectory& t);

namespace env {

void to_json(nlohmann::json& j, const Scene& s);
void from_json(const nlohmann::json& j, Scene& s);
void to_json(nlohmann::json& j, const Pose& p);
void from_json(const nlohmann::json& j, Pose& p);
void to_json(nlohmann::json& j, const Episode& e);
void from_json(const nlohmann::json& j, Episode& e);
void to_json(nlohmann::json& j, const Observation& o);
void from_json(const nlohmann::json& j, Observation& o);

std::string_view task_kind_name(TaskKind k);

// Scenes keyed by id.
class SceneLibrary {
public:
    void add(Scene scene);
    const Scene& get(const std::string& id) const;
    bool contains(const std::string& id) const { return scenes_.count(id) != 0; }
    std::size_t size() const { return scenes_.size(); }
    std::vector<std::string> ids() const;

    // Loads every *.json file in `dir` (sorted by name) and validates it.
    static SceneLibrary load_directory(const std::filesystem::path& dir);

private:
    std::map<std::string, Scene> scenes_;
};

Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

// JSONL episode suites. Loading validates every episode against its scene.
std::vector<Episode> load_episodes(const std::filesystem::path& path, const SceneLibrary& scenes);
std::vector<Episode> load_episodes_unchecked(const std::filesystem::path& path);
void save_episodes(const std::vector<Episode>& episodes, const std::filesystem::path& path);

}  // namespace env
}  // namespace navlab
