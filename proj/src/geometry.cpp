#include "navlab/geometry.hpp"

#include <algorithm>
#include <limits>

namespace navlab {

bool segment_hits_rect(Vec2 a, Vec2 b, const Rect& r) {
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    double t0 = 0.0;
    double t1 = 1.0;
    const double p[4] = {-dx, dx, -dy, dy};
    const double q[4] = {a.x - r.min_x, r.max_x - a.x, a.y - r.min_y, r.max_y - a.y};
    for (int i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) return false;
            continue;
        }
        const double t = q[i] / p[i];
        if (p[i] < 0.0) {
            t0 = std::max(t0, t);
        } else {
            t1 = std::min(t1, t);
        }
        if (t0 > t1) return false;
    }
    return true;
}

std::optional<double> ray_rect_distance(Vec2 origin, Vec2 dir, const Rect& r) {
    double t_near = 0.0;
    double t_far = std::numeric_limits<double>::infinity();
    const double o[2] = {origin.x, origin.y};
    const double d[2] = {dir.x, dir.y};
    const double lo[2] = {r.min_x, r.min_y};
    const double hi[2] = {r.max_x, r.max_y};
    for (int k = 0; k < 2; ++k) {
        if (d[k] == 0.0) {
            if (o[k] < lo[k] || o[k] > hi[k]) return std::nullopt;
            continue;
        }
        double ta = (lo[k] - o[k]) / d[k];
        double tb = (hi[k] - o[k]) / d[k];
        if (ta > tb) std::swap(ta, tb);
        t_near = std::max(t_near, ta);
        t_far = std::min(t_far, tb);
        if (t_near > t_far) return std::nullopt;
    }
    return t_near;
}

double ray_exit_distance(Vec2 origin, Vec2 dir, const Rect& bounds) {
    double t = std::numeric_limits<double>::infinity();
    if (dir.x > 0.0) t = std::min(t, (bounds.max_x - origin.x) / dir.x);
    if (dir.x < 0.0) t = std::min(t, (bounds.min_x - origin.x) / dir.x);
    if (dir.y > 0.0) t = std::min(t, (bounds.max_y - origin.y) / dir.y);
    if (dir.y < 0.0) t = std::min(t, (bounds.min_y - origin.y) / dir.y);
    return std::max(t, 0.0);
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = squared_norm(ab);
    if (len2 == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
    return distance(p, a + t * ab);
}

}  // namespace navlab
