#include "navlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace navlab::metrics {

double navigation_error(Vec2 final_position, Vec2 goal) { return distance(final_position, goal); }

SuccessFlags success_and_oracle(const Trajectory& traj, Vec2 goal, double radius) {
    SuccessFlags out;
    if (traj.empty()) return out;
    out.sr = distance(traj.back(), goal) < radius ? 1 : 0;
    out.os = std::any_of(traj.points.begin(), traj.points.end(),
                         [&](Vec2 p) { return distance(p, goal) < radius; })
                 ? 1
                 : 0;
    return out;
}

double spl(int sr, double shortest, double actual) {
    if (sr == 0) return 0.0;
    const double denom = std::max(shortest, actual);
    if (denom == 0.0) return 1.0;
    return shortest / denom;
}

double dtw(const Trajectory& a, const Trajectory& b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> prev(m + 1, inf);
    std::vector<double> cur(m + 1, inf);
    prev[0] = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double cost = distance(a.points[i - 1], b.points[j - 1]);
            cur[j] = cost + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double ndtw(const Trajectory& pred, const Trajectory& ref, double d_th) {
    return std::exp(-dtw(pred, ref) / (static_cast<double>(ref.size()) * d_th));
}

double discrete_frechet(const Trajectory& a, const Trajectory& b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    std::vector<double> ca(n * m);
    auto at = [&](std::size_t i, std::size_t j) -> double& { return ca[i * m + j]; };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = distance(a.points[i], b.points[j]);
            if (i == 0 && j == 0) {
                at(i, j) = d;
            } else if (i == 0) {
                at(i, j) = std::max(at(0, j - 1), d);
            } else if (j == 0) {
                at(i, j) = std::max(at(i - 1, 0), d);
            } else {
                at(i, j) = std::max(std::min({at(i - 1, j), at(i - 1, j - 1), at(i, j - 1)}), d);
            }
        }
    }
    return at(n - 1, m - 1);
}

MetricReport evaluate(const Trajectory& traj, Vec2 goal, double radius, double shortest,
                      const Trajectory& reference, double d_th) {
    MetricReport r;
    const SuccessFlags f = success_and_oracle(traj, goal, radius);
    r.ne = navigation_error(traj.back(), goal);
    r.sr = f.sr;
    r.os = f.os;
    r.spl = spl(f.sr, shortest, traj.path_length());
    r.ndtw = ndtw(traj, reference, d_th);
    return r;
}

Aggregate aggregate(const std::vector<MetricReport>& reports) {
    Aggregate a;
    a.episodes = reports.size();
    if (reports.empty()) return a;
    for (const MetricReport& r : reports) {
        a.ne += r.ne;
        a.os += r.os;
        a.sr += r.sr;
        a.spl += r.spl;
        a.ndtw += r.ndtw;
    }
    const double n = static_cast<double>(reports.size());
    a.ne /= n;
    a.os /= n;
    a.sr /= n;
    a.spl /= n;
    a.ndtw /= n;
    return a;
}

std::string render_table(const std::vector<std::pair<std::string, Aggregate>>& rows) {
    std::size_t name_width = 6;
    for (const auto& [name, _] : rows) name_width = std::max(name_width, name.size());
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-*s | %6s | %6s | %6s | %6s | %6s\n", static_cast<int>(name_width),
                  "Method", "NE", "OS", "SR", "SPL", "nDTW");
    out += buf;
    out += std::string(name_width, '-') + "-+--------+--------+--------+--------+-------\n";
    for (const auto& [name, a] : rows) {
        std::snprintf(buf, sizeof buf, "%-*s | %6.2f | %6.1f | %6.1f | %6.1f | %6.1f\n",
                      static_cast<int>(name_width), name.c_str(), a.ne, 100.0 * a.os, 100.0 * a.sr,
                      100.0 * a.spl, 100.0 * a.ndtw);
        out += buf;
    }
    return out;
}

}  // namespace navlab::metrics
