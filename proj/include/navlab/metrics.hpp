#pragma once

#include <string>
#include <vector>

#include "navlab/trajectory.hpp"

namespace navlab::metrics {

struct SuccessFlags {
    int sr = 0;
    int os = 0;
};

struct MetricReport {
    double ne = 0.0;
    int sr = 0;
    int os = 0;
    double spl = 0.0;
    double ndtw = 0.0;
};

double navigation_error(Vec2 final_position, Vec2 goal);

SuccessFlags success_and_oracle(const Trajectory& traj, Vec2 goal, double radius);

// sr · shortest / max(shortest, actual); 1 for a successful zero-length episode.
double spl(int sr, double shortest, double actual);

// Dynamic time warping with Euclidean point cost and steps {match, insert, delete}.
double dtw(const Trajectory& a, const Trajectory& b);

// exp(−dtw / (|ref| · d_th)), |ref| the number of reference points.
double ndtw(const Trajectory& pred, const Trajectory& ref, double d_th);

double discrete_frechet(const Trajectory& a, const Trajectory& b);

MetricReport evaluate(const Trajectory& traj, Vec2 goal, double radius, double shortest,
                      const Trajectory& reference, double d_th);

struct Aggregate {
    std::size_t episodes = 0;
    double ne = 0.0;
    double os = 0.0;
    double sr = 0.0;
    double spl = 0.0;
    double ndtw = 0.0;
};

Aggregate aggregate(const std::vector<MetricReport>& reports);

// Plain-text table with columns NE, OS, SR, SPL, nDTW (rates in percent).
std::string render_table(const std::vector<std::pair<std::string, Aggregate>>& rows);

}  // namespace navlab::metrics
