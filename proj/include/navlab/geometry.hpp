#pragma once

#include <cmath>
#include <numbers>
#include <optional>

namespace navlab {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double squared_norm(Vec2 a) { return a.x * a.x + a.y * a.y; }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

// Axis-aligned rectangle; treated as closed for collision purposes.
struct Rect {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    double area() const { return width() * height(); }
    bool contains_closed(Vec2 p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
    bool contains_open(Vec2 p) const {
        return p.x > min_x && p.x < max_x && p.y > min_y && p.y < max_y;
    }
    friend bool operator==(const Rect&, const Rect&) = default;
};

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Maps any angle into [0, 2π).
inline double wrap_heading(double a) {
    double r = std::fmod(a, kTwoPi);
    if (r < 0.0) r += kTwoPi;
    if (r >= kTwoPi) r = 0.0;
    return r;
}

// Maps any angle into (−π, π].
inline double wrap_bearing(double a) {
    double r = std::remainder(a, kTwoPi);
    if (r <= -std::numbers::pi) r += kTwoPi;
    return r;
}

// True when the closed segment [a, b] touches the closed rectangle (Liang–Barsky).
bool segment_hits_rect(Vec2 a, Vec2 b, const Rect& r);

// Distance t >= 0 along the unit direction `dir` from `origin` to the first
// point of the closed rectangle, or nullopt if the ray misses it.
std::optional<double> ray_rect_distance(Vec2 origin, Vec2 dir, const Rect& r);

// Distance from `origin` along `dir` to the boundary of `bounds`, for an
// origin inside the bounds.
double ray_exit_distance(Vec2 origin, Vec2 dir, const Rect& bounds);

// Minimum distance from a point to a segment.
double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);

}  // namespace navlab
