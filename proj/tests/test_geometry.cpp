#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "navlab/geometry.hpp"
#include "navlab/random.hpp"

using namespace navlab;

namespace {

double rect_distance(Vec2 p, const Rect& r) {
    const double dx = std::max({r.min_x - p.x, 0.0, p.x - r.max_x});
    const double dy = std::max({r.min_y - p.y, 0.0, p.y - r.max_y});
    return std::hypot(dx, dy);
}

// Smallest distance from sampled points on the segment to the rectangle.
double sampled_clearance(Vec2 a, Vec2 b, const Rect& r, int samples = 4000) {
    double best = rect_distance(a, r);
    for (int i = 1; i <= samples; ++i) {
        const double t = static_cast<double>(i) / samples;
        best = std::min(best, rect_distance(a + t * (b - a), r));
    }
    return best;
}

}  // namespace

TEST(Geometry, WrapHeadingAndBearing) {
    EXPECT_NEAR(wrap_heading(-0.5), kTwoPi - 0.5, 1e-12);
    EXPECT_NEAR(wrap_heading(kTwoPi + 0.25), 0.25, 1e-12);
    EXPECT_DOUBLE_EQ(wrap_heading(0.0), 0.0);
    EXPECT_NEAR(wrap_bearing(std::numbers::pi + 0.1), -std::numbers::pi + 0.1, 1e-12);
    EXPECT_NEAR(wrap_bearing(-std::numbers::pi), std::numbers::pi, 1e-12);
    SplitMixStream rng(3);
    for (int i = 0; i < 1000; ++i) {
        const double a = (rng.uniform() - 0.5) * 40.0;
        const double h = wrap_heading(a);
        const double b = wrap_bearing(a);
        EXPECT_GE(h, 0.0);
        EXPECT_LT(h, kTwoPi);
        EXPECT_GT(b, -std::numbers::pi);
        EXPECT_LE(b, std::numbers::pi);
        EXPECT_NEAR(std::cos(h), std::cos(a), 1e-9);
        EXPECT_NEAR(std::sin(b), std::sin(a), 1e-9);
    }
}

TEST(Geometry, SegmentHitsRectAgreesWithSampling) {
    SplitMixStream rng(4);
    const Rect r{2.0, 2.0, 3.0, 4.0};
    int hits = 0;
    for (int i = 0; i < 2000; ++i) {
        const Vec2 a{rng.uniform() * 6.0, rng.uniform() * 6.0};
        const Vec2 b{rng.uniform() * 6.0, rng.uniform() * 6.0};
        const double clearance = sampled_clearance(a, b, r);
        if (clearance > 1e-9 && clearance < 1e-2) continue;  // grazing cases are below sampling resolution
        const bool expected = clearance <= 1e-9;
        EXPECT_EQ(segment_hits_rect(a, b, r), expected) << a.x << "," << a.y << " -> " << b.x << "," << b.y;
        hits += expected;
    }
    EXPECT_GT(hits, 100);
}

TEST(Geometry, SegmentTouchingEdgeCounts) {
    const Rect r{1.0, 1.0, 2.0, 2.0};
    EXPECT_TRUE(segment_hits_rect({0.0, 1.0}, {3.0, 1.0}, r));
    EXPECT_TRUE(segment_hits_rect({0.0, 0.0}, {1.0, 1.0}, r));
    EXPECT_FALSE(segment_hits_rect({0.0, 0.0}, {0.99, 0.99}, r));
    EXPECT_TRUE(segment_hits_rect({1.5, 1.5}, {1.5, 1.5}, r));
}

TEST(Geometry, RayDistanceMatchesMarching) {
    SplitMixStream rng(5);
    const Rect r{2.0, 2.0, 3.0, 4.0};
    for (int i = 0; i < 500; ++i) {
        const Vec2 o{rng.uniform() * 6.0, rng.uniform() * 6.0};
        if (r.contains_closed(o)) continue;
        const double ang = rng.uniform() * kTwoPi;
        const Vec2 dir{std::cos(ang), std::sin(ang)};
        const auto got = ray_rect_distance(o, dir, r);
        std::optional<double> marched;
        for (double t = 0.0; t < 12.0; t += 1e-4) {
            if (r.contains_closed(o + t * dir)) {
                marched = t;
                break;
            }
        }
        if (marched) {
            ASSERT_TRUE(got.has_value());
            EXPECT_NEAR(*got, *marched, 2e-4);
        } else if (got) {
            EXPECT_LT(sampled_clearance(o, o + (*got + 1.0) * dir, r), 1e-3);  // grazing hit
        }
    }
}

TEST(Geometry, RayExitDistanceInsideBounds) {
    const Rect b{0.0, 0.0, 4.0, 2.0};
    EXPECT_NEAR(ray_exit_distance({1.0, 1.0}, {1.0, 0.0}, b), 3.0, 1e-12);
    EXPECT_NEAR(ray_exit_distance({1.0, 1.0}, {0.0, -1.0}, b), 1.0, 1e-12);
    const double s = std::sqrt(0.5);
    EXPECT_NEAR(ray_exit_distance({1.0, 1.0}, {s, s}, b), std::sqrt(2.0), 1e-12);
}

TEST(Geometry, PointSegmentDistance) {
    EXPECT_DOUBLE_EQ(point_segment_distance({0.5, 1.0}, {0.0, 0.0}, {1.0, 0.0}), 1.0);
    EXPECT_DOUBLE_EQ(point_segment_distance({2.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}), 1.0);
    EXPECT_DOUBLE_EQ(point_segment_distance({3.0, 4.0}, {0.0, 0.0}, {0.0, 0.0}), 5.0);
}
