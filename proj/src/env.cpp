#include "navlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

namespace navlab::env {

namespace {

constexpr std::array<std::string_view, kActionCount> kActionNames = {"FORWARD", "TURN_LEFT",
                                                                     "TURN_RIGHT", "STOP"};

struct Grid {
    Vec2 origin;
    double cell = kDefaultGridCell;
    int nx = 0;
    int ny = 0;
    std::vector<std::uint8_t> blocked;

    Vec2 centre(int i, int j) const {
        return {origin.x + (i + 0.5) * cell, origin.y + (j + 0.5) * cell};
    }
    int index(int i, int j) const { return j * nx + i; }
};

Grid build_grid(const Scene& scene, double cell) {
    Grid g;
    g.origin = {scene.bounds.min_x, scene.bounds.min_y};
    g.cell = cell;
    g.nx = std::max(1, static_cast<int>(std::ceil(scene.bounds.width() / cell - 1e-9)));
    g.ny = std::max(1, static_cast<int>(std::ceil(scene.bounds.height() / cell - 1e-9)));
    g.blocked.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
    for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
            const Vec2 c = g.centre(i, j);
            bool hit = !scene.bounds.contains_closed(c);
            for (const Rect& r : scene.obstacles) {
                if (r.contains_closed(c)) {
                    hit = true;
                    break;
                }
            }
            g.blocked[g.index(i, j)] = hit ? 1 : 0;
        }
    }
    return g;
}

// Nearest unblocked cell to p (the containing cell when it is free).
int snap_to_grid(const Grid& g, Vec2 p) {
    const int i = std::clamp(static_cast<int>(std::floor((p.x - g.origin.x) / g.cell)), 0, g.nx - 1);
    const int j = std::clamp(static_cast<int>(std::floor((p.y - g.origin.y) / g.cell)), 0, g.ny - 1);
    if (!g.blocked[g.index(i, j)]) return g.index(i, j);
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int jj = 0; jj < g.ny; ++jj) {
        for (int ii = 0; ii < g.nx; ++ii) {
            if (g.blocked[g.index(ii, jj)]) continue;
            const double d = distance(g.centre(ii, jj), p);
            if (d < best_d) {
                best_d = d;
                best = g.index(ii, jj);
            }
        }
    }
    return best;
}

}  // namespace

std::string_view action_name(Action a) { return kActionNames[static_cast<std::size_t>(a)]; }

std::optional<Action> parse_action(std::string_view name) {
    for (Action a : kAllActions) {
        if (action_name(a) == name) return a;
    }
    return std::nullopt;
}

double Scene::sensor_range() const {
    if (max_range) return *max_range;
    return std::hypot(bounds.width(), bounds.height());
}

bool Scene::is_free(Vec2 p) const {
    if (!bounds.contains_closed(p)) return false;
    return std::none_of(obstacles.begin(), obstacles.end(),
                        [&](const Rect& r) { return r.contains_closed(p); });
}

std::vector<double> Observation::flatten() const {
    std::vector<double> out(depth_rays);
    out.push_back(goal_bearing);
    out.push_back(goal_distance);
    out.push_back(step_fraction);
    return out;
}

void validate_scene(const Scene& scene) {
    if (!(scene.bounds.area() > 0.0)) throw SceneError("scene " + scene.id + ": bounds have no area");
    if (scene.ray_count < 1) throw SceneError("scene " + scene.id + ": ray_count must be positive");
    if (!(scene.kinematics.forward_step > 0.0) || !(scene.kinematics.turn_angle > 0.0)) {
        throw SceneError("scene " + scene.id + ": kinematics must be positive");
    }
    if (scene.max_range && !(*scene.max_range > 0.0)) {
        throw SceneError("scene " + scene.id + ": max_range must be positive");
    }
    for (const Rect& r : scene.obstacles) {
        if (!(r.area() > 0.0) || r.width() <= 0.0 || r.height() <= 0.0) {
            throw SceneError("scene " + scene.id + ": obstacle with non-positive area");
        }
        if (r.min_x < scene.bounds.min_x || r.max_x > scene.bounds.max_x ||
            r.min_y < scene.bounds.min_y || r.max_y > scene.bounds.max_y) {
            throw SceneError("scene " + scene.id + ": obstacle outside bounds");
        }
    }
    for (const Landmark& lm : scene.landmarks) {
        if (!scene.is_free(lm.position)) {
            throw SceneError("scene " + scene.id + ": landmark '" + lm.category +
                             "' is outside bounds or inside an obstacle");
        }
    }
}

void validate_episode(const Episode& episode, const Scene& scene) {
    const std::string where = "episode " + episode.id + ": ";
    if (!(episode.success_radius > 0.0)) throw SceneError(where + "success_radius must be positive");
    if (!scene.is_free(episode.start.position)) throw SceneError(where + "start is not free");
    if (episode.task_kind == TaskKind::QuestionAnswer &&
        (!episode.ground_truth_answer || episode.ground_truth_answer->empty())) {
        throw SceneError(where + "question_answer episode without ground_truth_answer");
    }
    const Trajectory& ref = episode.reference_trajectory;
    if (ref.empty()) throw SceneError(where + "empty reference trajectory");
    if (distance(ref.points.front(), episode.start.position) >= episode.success_radius) {
        throw SceneError(where + "reference does not start at the start pose");
    }
    if (distance(ref.back(), episode.goal) >= episode.success_radius) {
        throw SceneError(where + "reference does not end near the goal");
    }
}

StepResult step(const Pose& pose, Action action, const Scene& scene) {
    StepResult out{pose, false, false};
    switch (action) {
        case Action::Forward: {
            const Vec2 dir{std::cos(pose.heading), std::sin(pose.heading)};
            const Vec2 target = pose.position + scene.kinematics.forward_step * dir;
            bool blocked = !scene.bounds.contains_closed(target);
            for (std::size_t k = 0; !blocked && k < scene.obstacles.size(); ++k) {
                blocked = segment_hits_rect(pose.position, target, scene.obstacles[k]);
            }
            if (blocked) {
                out.collided = true;
            } else {
                out.new_pose.position = target;
            }
            break;
        }
        case Action::TurnLeft:
            out.new_pose.heading = wrap_heading(pose.heading + scene.kinematics.turn_angle);
            break;
        case Action::TurnRight:
            out.new_pose.heading = wrap_heading(pose.heading - scene.kinematics.turn_angle);
            break;
        case Action::Stop:
            out.terminated = true;
            break;
    }
    return out;
}

double ray_angle(int index, int ray_count) {
    return -std::numbers::pi / 2.0 + index * std::numbers::pi / ray_count;
}

Observation observe(const Pose& pose, const Scene& scene, Vec2 goal, std::size_t step_index,
                    std::size_t budget) {
    Observation obs;
    const double range = scene.sensor_range();
    obs.depth_rays.resize(static_cast<std::size_t>(scene.ray_count));
    for (int i = 0; i < scene.ray_count; ++i) {
        const double a = pose.heading + ray_angle(i, scene.ray_count);
        const Vec2 dir{std::cos(a), std::sin(a)};
        double t = ray_exit_distance(pose.position, dir, scene.bounds);
        for (const Rect& r : scene.obstacles) {
            if (auto hit = ray_rect_distance(pose.position, dir, r)) t = std::min(t, *hit);
        }
        obs.depth_rays[static_cast<std::size_t>(i)] = std::min(t, range);
    }
    const Vec2 to_goal = goal - pose.position;
    obs.goal_distance = norm(to_goal);
    obs.goal_bearing =
        obs.goal_distance > 0.0 ? wrap_bearing(std::atan2(to_goal.y, to_goal.x) - pose.heading) : 0.0;
    obs.step_fraction =
        budget == 0 ? 1.0 : std::min(1.0, static_cast<double>(step_index) / static_cast<double>(budget));
    return obs;
}

bool segment_is_free(const Scene& scene, Vec2 a, Vec2 b) {
    if (!scene.bounds.contains_closed(a) || !scene.bounds.contains_closed(b)) return false;
    return std::none_of(scene.obstacles.begin(), scene.obstacles.end(),
                        [&](const Rect& r) { return segment_hits_rect(a, b, r); });
}

GridPath shortest_grid_path(const Scene& scene, Vec2 a, Vec2 b, double cell) {
    if (a == b) return {0.0, {a}};
    if (segment_is_free(scene, a, b)) return {distance(a, b), {a, b}};

    const Grid g = build_grid(scene, cell);
    const int src = snap_to_grid(g, a);
    const int dst = snap_to_grid(g, b);
    if (src < 0 || dst < 0) throw NoPathError("no free grid cell near an endpoint");

    const std::size_t n = g.blocked.size();
    std::vector<double> cost(n, std::numeric_limits<double>::infinity());
    std::vector<int> parent(n, -1);
    std::vector<std::uint8_t> closed(n, 0);
    const int di = dst % g.nx;
    const int dj = dst / g.nx;
    auto heuristic = [&](int idx) {
        const int dx = std::abs(idx % g.nx - di);
        const int dy = std::abs(idx / g.nx - dj);
        return cell * (std::max(dx, dy) + (std::numbers::sqrt2 - 1.0) * std::min(dx, dy));
    };

    using Entry = std::pair<double, int>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    cost[src] = 0.0;
    open.emplace(heuristic(src), src);
    while (!open.empty()) {
        const int cur = open.top().second;
        open.pop();
        if (closed[cur]) continue;
        closed[cur] = 1;
        if (cur == dst) break;
        const int ci = cur % g.nx;
        const int cj = cur / g.nx;
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const int ni = ci + dx;
                const int nj = cj + dy;
                if (ni < 0 || nj < 0 || ni >= g.nx || nj >= g.ny) continue;
                const int nb = g.index(ni, nj);
                if (g.blocked[nb] || closed[nb]) continue;
                if (dx != 0 && dy != 0 &&
                    (g.blocked[g.index(ci + dx, cj)] || g.blocked[g.index(ci, cj + dy)])) {
                    continue;  // no corner cutting
                }
                const double step_cost = (dx != 0 && dy != 0) ? std::numbers::sqrt2 * cell : cell;
                const double c = cost[cur] + step_cost;
                if (c < cost[nb]) {
                    cost[nb] = c;
                    parent[nb] = cur;
                    open.emplace(c + heuristic(nb), nb);
                }
            }
        }
    }
    if (!std::isfinite(cost[dst])) throw NoPathError("grid search found no route");

    GridPath path;
    std::vector<Vec2> cells;
    for (int cur = dst; cur != -1; cur = parent[cur]) {
        cells.push_back(g.centre(cur % g.nx, cur / g.nx));
    }
    std::reverse(cells.begin(), cells.end());
    path.waypoints.push_back(a);
    path.waypoints.insert(path.waypoints.end(), cells.begin(), cells.end());
    path.waypoints.push_back(b);
    path.length = distance(a, cells.front()) + cost[dst] + distance(cells.back(), b);
    return path;
}

double shortest_path_length(const Scene& scene, Vec2 a, Vec2 b, double cell) {
    return shortest_grid_path(scene, a, b, cell).length;
}

std::vector<Action> actions_for_path(const Scene& scene, const Pose& start, const Trajectory& path) {
    constexpr double kTol = 1e-6;
    std::vector<Action> actions;
    Pose pose = start;
    const double turn = scene.kinematics.turn_angle;
    for (std::size_t i = 0; i < path.points.size(); ++i) {
        const Vec2 target = path.points[i];
        if (distance(target, pose.position) < kTol) continue;
        const Vec2 d = target - pose.position;
        if (std::abs(norm(d) - scene.kinematics.forward_step) > kTol) {
            throw SceneError("path segment " + std::to_string(i) + " is not one forward step");
        }
        const double delta = wrap_bearing(std::atan2(d.y, d.x) - pose.heading);
        const long k = std::lround(delta / turn);
        if (std::abs(delta - k * turn) > kTol) {
            throw SceneError("path segment " + std::to_string(i) + " is not on the turn lattice");
        }
        const Action t = k > 0 ? Action::TurnLeft : Action::TurnRight;
        for (long j = 0; j < std::abs(k); ++j) {
            actions.push_back(t);
            pose = step(pose, t, scene).new_pose;
        }
        const StepResult r = step(pose, Action::Forward, scene);
        if (r.collided || distance(r.new_pose.position, target) > kTol) {
            throw SceneError("path segment " + std::to_string(i) + " is not executable");
        }
        actions.push_back(Action::Forward);
        pose = r.new_pose;
    }
    actions.push_back(Action::Stop);
    return actions;
}

std::string narrate(const Observation& obs, double forward_step) {
    std::ostringstream out;
    constexpr double kAheadCone = 10.0 * std::numbers::pi / 180.0;
    out << "goal ";
    if (std::abs(obs.goal_bearing) <= kAheadCone) {
        out << "ahead";
    } else {
        out << (obs.goal_bearing > 0.0 ? "left" : "right");
    }
    out << (obs.goal_distance < 1.0 ? " near" : " far");
    const double centre = obs.depth_rays.empty() ? 0.0 : obs.depth_rays[obs.depth_rays.size() / 2];
    out << (centre <= 2.0 * forward_step ? " wall ahead" : " path clear");
    return out.str();
}

std::string_view narrate_decision(Action a) {
    switch (a) {
        case Action::Forward: return "so go";
        case Action::TurnLeft: return "so turn left";
        case Action::TurnRight: return "so turn right";
        case Action::Stop: return "so stop";
    }
    return "so stop";
}

}  // namespace navlab::env
