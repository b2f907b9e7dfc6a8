#pragma once

#include <algorithm>
#include <vector>

#include "navlab/geometry.hpp"

namespace navlab {

// Ordered 2D positions visited by an agent.
struct Trajectory {
    std::vector<Vec2> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
    const Vec2& back() const { return points.back(); }

    double path_length() const {
        double total = 0.0;
        for (std::size_t i = 1; i < points.size(); ++i) {
            total += distance(points[i - 1], points[i]);
        }
        return total;
    }

    // Minimum distance from p to the polyline through the points.
    double distance_to_polyline(Vec2 p) const {
        if (points.size() == 1) return distance(p, points.front());
        double best = distance(p, points.front());
        for (std::size_t i = 1; i < points.size(); ++i) {
            best = std::min(best, point_segment_distance(p, points[i - 1], points[i]));
        }
        return best;
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

}  // namespace navlab
