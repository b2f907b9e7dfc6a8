#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "navlab/geometry.hpp"
#include "navlab/trajectory.hpp"

namespace navlab::env {

enum class Action : std::uint8_t { Forward = 0, TurnLeft = 1, TurnRight = 2, Stop = 3 };

inline constexpr std::size_t kActionCount = 4;
inline constexpr std::array<Action, kActionCount> kAllActions = {
    Action::Forward, Action::TurnLeft, Action::TurnRight, Action::Stop};

std::string_view action_name(Action a);
std::optional<Action> parse_action(std::string_view name);

struct Landmark {
    std::string category;
    Vec2 position;
    std::string description;
};

struct Kinematics {
    double forward_step = 0.25;
    double turn_angle = 15.0 * std::numbers::pi / 180.0;
};

struct Scene {
    std::string id;
    Rect bounds;
    std::vector<Rect> obstacles;
    std::vector<Landmark> landmarks;
    Kinematics kinematics;
    int ray_count = 16;
    std::optional<double> max_range;  // defaults to the bounds diagonal

    double sensor_range() const;
    bool is_free(Vec2 p) const;  // inside bounds and outside every obstacle
};

struct Pose {
    Vec2 position;
    double heading = 0.0;  // [0, 2π)

    friend bool operator==(const Pose&, const Pose&) = default;
};

enum class TaskKind : std::uint8_t { Navigation, QuestionAnswer };

struct Episode {
    std::string id;
    std::string scene_id;
    Pose start;
    std::string instruction;
    Vec2 goal;
    Trajectory reference_trajectory;
    double success_radius = 0.5;
    TaskKind task_kind = TaskKind::Navigation;
    std::optional<std::string> ground_truth_answer;
};

struct Observation {
    std::vector<double> depth_rays;
    double goal_bearing = 0.0;
    double goal_distance = 0.0;
    double step_fraction = 0.0;

    std::size_t width() const { return depth_rays.size() + 3; }
    std::vector<double> flatten() const;
    friend bool operator==(const Observation&, const Observation&) = default;
};

struct StepResult {
    Pose new_pose;
    bool collided = false;
    bool terminated = false;
};

class SceneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoPathError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Throws SceneError when bounds, obstacles, or landmarks break the scene invariants.
void validate_scene(const Scene& scene);
void validate_episode(const Episode& episode, const Scene& scene);

// Kinematic transition. FORWARD is blocked (position unchanged, collided=true)
// when the swept segment touches an obstacle or leaves the bounds.
StepResult step(const Pose& pose, Action action, const Scene& scene);

Observation observe(const Pose& pose, const Scene& scene, Vec2 goal, std::size_t step_index,
                    std::size_t budget);

// Angle of the i-th depth ray relative to the agent heading.
double ray_angle(int index, int ray_count);

inline constexpr double kDefaultGridCell = 0.05;

struct GridPath {
    double length = 0.0;
    std::vector<Vec2> waypoints;  // a, cell centres, b
};

// Shortest obstacle-avoiding route on an 8-connected grid (A*); the exact
// Euclidean distance when the straight segment is unobstructed.
double shortest_path_length(const Scene& scene, Vec2 a, Vec2 b, double cell = kDefaultGridCell);
GridPath shortest_grid_path(const Scene& scene, Vec2 a, Vec2 b, double cell = kDefaultGridCell);

bool segment_is_free(const Scene& scene, Vec2 a, Vec2 b);

// Recovers the action sequence that reproduces `path` from `start` (turns in
// whole multiples of the scene turn angle, then FORWARD), terminated by STOP.
// Throws SceneError when a segment is not reachable by the kinematics.
std::vector<Action> actions_for_path(const Scene& scene, const Pose& start, const Trajectory& path);

// Short textual summary of an observation built only from the trace vocabulary.
std::string narrate(const Observation& obs, double forward_step);

// Trailing clause naming the decision ("so go", "so turn left", ...).
std::string_view narrate_decision(Action a);

}  // namespace navlab::env
