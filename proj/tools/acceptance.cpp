// Acceptance checks: prints one PASS/FAIL line per criterion with its measured values and runtime.
// Usage: acceptance [criterion ...]   (default: all ten)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "navlab/cli.hpp"
#include "navlab/cot_engine.hpp"
#include "navlab/fis.hpp"
#include "navlab/grpo.hpp"
#include "navlab/metrics.hpp"
#include "navlab/policy.hpp"
#include "navlab/random.hpp"
#include "navlab/serve.hpp"
#include "navlab/trace_format.hpp"

namespace fs = std::filesystem;
using namespace navlab;

namespace {

const fs::path kSource = NAVLAB_SOURCE_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

cli::RunConfig default_config() { return cli::load_config(kSource / "configs" / "default.json", {}); }

Trajectory random_trajectory(SplitMixStream& rng, std::size_t max_points) {
    Trajectory t;
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_points));
    for (std::size_t i = 0; i < std::min(n, max_points); ++i) t.points.push_back({4.0 * rng.uniform(), 4.0 * rng.uniform()});
    return t;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + h;
        const double up = f(x);
        x[i] = keep - h;
        const double down = f(x);
        x[i] = keep;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double relative_error(std::span<const double> a, std::span<const double> b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

// ---- 1: metric oracles -----------------------------------------------------------

double brute_dtw(const Trajectory& a, const Trajectory& b) {
    double best = std::numeric_limits<double>::infinity();
    std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t i, std::size_t j, double acc) {
        acc += distance(a.points[i], b.points[j]);
        if (i + 1 == a.size() && j + 1 == b.size()) {
            best = std::min(best, acc);
            return;
        }
        if (i + 1 < a.size()) walk(i + 1, j, acc);
        if (j + 1 < b.size()) walk(i, j + 1, acc);
        if (i + 1 < a.size() && j + 1 < b.size()) walk(i + 1, j + 1, acc);
    };
    walk(0, 0, 0.0);
    return best;
}

double recursive_frechet(const Trajectory& a, const Trajectory& b, std::size_t i, std::size_t j) {
    const double d = distance(a.points[i], b.points[j]);
    if (i == 0 && j == 0) return d;
    if (i == 0) return std::max(recursive_frechet(a, b, 0, j - 1), d);
    if (j == 0) return std::max(recursive_frechet(a, b, i - 1, 0), d);
    return std::max(std::min({recursive_frechet(a, b, i - 1, j), recursive_frechet(a, b, i - 1, j - 1),
                              recursive_frechet(a, b, i, j - 1)}),
                    d);
}

Outcome metric_oracles() {
    SplitMixStream rng(1001);
    double worst_dtw = 0.0, worst_ndtw = 0.0, worst_frechet = 0.0;
    for (int k = 0; k < 500; ++k) {
        const Trajectory a = random_trajectory(rng, 5), b = random_trajectory(rng, 5);
        const double brute = brute_dtw(a, b);
        const double d_th = 0.25 + rng.uniform();
        worst_dtw = std::max(worst_dtw, std::abs(metrics::dtw(a, b) - brute));
        worst_ndtw = std::max(worst_ndtw, std::abs(metrics::ndtw(a, b, d_th) -
                                                   std::exp(-brute / (static_cast<double>(b.size()) * d_th))));
    }
    for (int k = 0; k < 500; ++k) {
        const Trajectory a = random_trajectory(rng, 7), b = random_trajectory(rng, 7);
        worst_frechet = std::max(worst_frechet, std::abs(metrics::discrete_frechet(a, b) -
                                                         recursive_frechet(a, b, a.size() - 1, b.size() - 1)));
    }
    return {worst_dtw < 1e-9 && worst_ndtw < 1e-9 && worst_frechet < 1e-9,
            fmt("max |d| dtw %.2e ndtw %.2e frechet %.2e", worst_dtw, worst_ndtw, worst_frechet)};
}

// ---- 2: advantage standardization --------------------------------------------------

Outcome advantages() {
    SplitMixStream rng(1002);
    double worst_mean = 0.0, worst_std = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const std::size_t g = 2 + static_cast<std::size_t>(rng.uniform() * 15);
        std::vector<double> r(g);
        for (double& v : r) v = 10.0 * rng.uniform() - 3.0;
        const std::vector<double> a = grpo::compute_advantages(r);
        double m = 0.0;
        for (double v : a) m += v / static_cast<double>(g);
        double s = 0.0;
        for (double v : a) s += (v - m) * (v - m) / static_cast<double>(g);
        worst_mean = std::max(worst_mean, std::abs(m));
        worst_std = std::max(worst_std, std::abs(std::sqrt(s) - 1.0));
    }
    bool zeros = true;
    for (double v : {0.0, 1.0, -2.5, 1e6}) {
        for (double a : grpo::compute_advantages(std::vector<double>(8, v))) zeros = zeros && a == 0.0;
    }
    return {worst_mean < 1e-9 && worst_std < 1e-9 && zeros,
            fmt("max |mean| %.2e max |std-1| %.2e", worst_mean, worst_std) +
                (zeros ? ", equal groups zero" : ", equal groups NOT zero")};
}

// ---- 3: gradients --------------------------------------------------------------------

policy::ParamVector perturbed(const policy::ParamVector& p, SplitMixStream& rng, double scale) {
    policy::ParamVector out = p;
    for (double& v : out.values()) v += scale * (2.0 * rng.uniform() - 1.0);
    return out;
}

Outcome gradients() {
    SplitMixStream rng(1003);
    std::size_t instances = 0, clipped = 0;
    double worst = 0.0;
    const policy::TracePolicy trace(24, 8, 6);
    const policy::FisPolicy nav(policy::feature_width(6), 4, 6);
    const policy::Mlp mlp(5, 7, 4);
    for (const policy::Model* m : std::initializer_list<const policy::Model*>{&mlp, &nav, &trace}) {
        for (int k = 0; k < 40; ++k) {
            const policy::ParamVector params = policy::init_params(*m, rng(), 1.0);
            std::vector<double> ctx(m->context_width());
            for (double& x : ctx) x = 2.0 * rng.uniform() - 1.0;
            const std::size_t choice = static_cast<std::size_t>(rng.uniform() * m->num_choices());
            std::vector<double> grad(params.size(), 0.0);
            policy::log_prob_and_grad(*m, params.values(), ctx, choice, 1.0, grad);
            const auto fd = central_difference(
                [&](std::span<const double> p) { return policy::log_prob_and_grad(*m, p, ctx, choice, 1.0, {}); },
                {params.values().begin(), params.values().end()});
            worst = std::max(worst, relative_error(grad, fd));
            ++instances;
        }
    }
    grpo::GrpoConfig cfg;
    cfg.kl_beta = 0.05;
    for (int k = 0; k < 60; ++k) {
        const auto ref = policy::init_params(trace, rng(), 1.0);
        const auto old = perturbed(ref, rng, 0.1);
        grpo::CandidateGroup group;
        for (int i = 0; i < 4; ++i) {
            group.rollouts.push_back(policy::sample_trace_rollout(trace, old, rng()));
            group.rewards.push_back(rng.uniform());
            group.old_log_probs.push_back(policy::evaluate_log_probs(trace, old, group.rollouts.back()));
        }
        group.advantages = grpo::compute_advantages(group.rewards);
        const auto params = perturbed(old, rng, k % 2 ? 0.3 : 0.02);
        const grpo::Objective obj = grpo::grpo_objective_and_grad(trace, params, old, ref, group, cfg);
        clipped += obj.clipped;
        const auto fd = central_difference(
            [&](std::span<const double> x) {
                return grpo::grpo_objective_and_grad(trace, policy::ParamVector(trace.layout(), {x.begin(), x.end()}),
                                                     old, ref, group, cfg)
                    .value;
            },
            {params.values().begin(), params.values().end()});
        worst = std::max(worst, relative_error(obj.grad, fd));
        ++instances;
    }
    return {worst < 1e-4 && instances >= 150 && clipped > 0,
            fmt("%.0f instances, max rel err %.2e, %.0f clipped candidates", static_cast<double>(instances), worst,
                static_cast<double>(clipped))};
}

// ---- 4: format learning ---------------------------------------------------------------

Outcome format_learning() {
    const cli::RunConfig cfg = default_config();
    const cli::Workspace ws = cli::load_workspace(cfg);
    const fs::path dir = fs::temp_directory_path() / "navlab_acceptance_c4";
    fs::create_directories(dir);
    const auto records = cli::synthesize_records(cfg, ws, dir / "dataset.jsonl");
    const policy::ParamVector init = cli::cold_start_trace(cfg, records, cli::init_seed(cfg, 0));
    const policy::TracePolicy model = cli::trace_model(cfg);
    const grpo::TraceFormatTask task(model, cfg.trace.prompts_per_iteration, cfg.trace.eval_samples,
                                     cfg.trace.eval_seed);
    grpo::GrpoConfig g = cfg.grpo;
    g.iterations = 300;
    g.learning_rate = cfg.trace.learning_rate;
    g.eval_every = 10;
    g.seed = mix_seed(cfg.seed, {fnv1a64("trace")});
    const double start = task.evaluate(init, Exec::Parallel);
    std::optional<std::size_t> reached;
    double final_rate = start;
    grpo::train(g, task, init, [&](const grpo::IterationRow& r) {
        if (!r.heldout) return;
        final_rate = *r.heldout;
        if (!reached && *r.heldout >= 0.95) reached = r.iteration + 1;
    });
    fs::remove_all(dir);
    return {reached.has_value() && model.num_choices() <= 24,
            fmt("well-formed %.1f%% at init, %.1f%% after 300 iterations", 100.0 * start, 100.0 * final_rate) +
                (reached ? ", >=95% at iteration " + std::to_string(*reached) : ", never reached 95%")};
}

// ---- 5: navigation improvement and reward decomposition --------------------------------

Outcome navigation_improvement() {
    const cli::RunConfig cfg = default_config();
    const cli::Workspace ws = cli::load_workspace(cfg);
    const fs::path dir = fs::temp_directory_path() / "navlab_acceptance_c5";
    fs::create_directories(dir);
    const auto records = cli::synthesize_records(cfg, ws, dir / "dataset.jsonl");
    const std::vector<cli::GridRow> grid = cli::reward_grid(cfg, ws, records);
    fs::remove_all(dir);
    const cli::GridRow& full = grid[7];
    double best_single = 0.0;
    for (std::size_t mask : {1u, 2u, 4u}) best_single = std::max(best_single, grid[mask].sr);
    const double gain = full.sr - full.cold_sr;
    return {gain >= 0.30 && full.sr >= best_single,
            fmt("cold SR %.3f, full SR %.3f (gain %+.3f), best single-reward SR %.3f", full.cold_sr, full.sr, gain,
                best_single)};
}

// ---- 6: beta sweep -----------------------------------------------------------------------

Outcome beta_monotone() {
    const cli::RunConfig cfg = default_config();
    const cli::Workspace ws = cli::load_workspace(cfg);
    const fs::path dir = fs::temp_directory_path() / "navlab_acceptance_c6";
    fs::create_directories(dir);
    const auto records = cli::synthesize_records(cfg, ws, dir / "dataset.jsonl");
    fs::remove_all(dir);
    const std::vector<cli::BetaRow> rows =
        cli::beta_sweep(cfg, cli::cold_start_trace(cfg, records, cli::init_seed(cfg, 0)));
    bool monotone = true;
    std::ostringstream kl;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (i > 0 && rows[i].final_kl > rows[i - 1].final_kl) monotone = false;
        kl << (i ? " " : "") << fmt("%.4f", rows[i].final_kl);
    }
    const bool betas = rows.size() == 5 && rows[0].beta == 0.005 && rows[4].beta == 0.05;
    return {monotone && betas && cfg.grpo.kl_beta == 0.02,
            "final KL over beta {0.005,0.01,0.02,0.03,0.05}: " + kl.str() +
                (monotone ? " (non-increasing)" : " (NOT monotone)") + fmt(", default beta %.3f", cfg.grpo.kl_beta)};
}

// ---- 7: FiS scheduling -------------------------------------------------------------------

Outcome fis_schedule() {
    const env::SceneLibrary scenes = env::SceneLibrary::load_directory(kSource / "data" / "scenes");
    const std::vector<env::Episode> suite = env::load_episodes(kSource / "data" / "episodes" / "nav_suite.jsonl", scenes);
    const policy::FisPolicy model(policy::feature_width(16), 8, 16);
    SplitMixStream rng(1007);
    std::size_t count_errors = 0, age_errors = 0, replay_errors = 0;
    for (int k = 0; k < 200; ++k) {
        fis::FisConfig cfg;
        cfg.n = 1 + static_cast<std::size_t>(rng.uniform() * 6);
        cfg.H = 1 + static_cast<std::size_t>(rng.uniform() * 6);
        const std::size_t budget = 1 + static_cast<std::size_t>(rng.uniform() * 40);
        const env::Episode& e = suite[rng() % suite.size()];
        const auto params = policy::init_params(model, rng(), 1.0);
        const fis::EpisodeLog log = fis::run_episode(model, params, e, scenes.get(e.scene_id), cfg, budget, rng());
        const std::size_t t = log.executed();
        if (log.slow_steps.size() != (t + cfg.n - 1) / cfg.n) ++count_errors;
        for (const auto& s : log.steps) {
            if (s.latent_step > s.step || s.step - s.latent_step > cfg.n - 1) ++age_errors;
        }
    }
    fis::FisConfig unit;
    unit.n = 1;
    unit.H = 1;
    for (int k = 0; k < 50; ++k) {
        const env::Episode& e = suite[rng() % suite.size()];
        const auto params = policy::init_params(model, rng(), 1.0);
        const std::uint64_t seed = rng();
        const auto log = fis::run_episode(model, params, e, scenes.get(e.scene_id), unit, 40, seed);
        const auto single = policy::sample_navigation_rollout(model, params, e, scenes.get(e.scene_id), seed, 40);
        if (log.rollout.choices != single.choices || log.rollout.contexts != single.contexts ||
            log.trajectory != single.trajectory) {
            ++replay_errors;
        }
    }
    return {count_errors == 0 && age_errors == 0 && replay_errors == 0,
            fmt("200 triples: %.0f count mismatches, %.0f stale latents; n=H=1: %.0f/50 rollouts differ",
                static_cast<double>(count_errors), static_cast<double>(age_errors),
                static_cast<double>(replay_errors))};
}

// ---- 8: CoT pipeline ---------------------------------------------------------------------

Outcome cot_pipeline() {
    const env::SceneLibrary scenes = env::SceneLibrary::load_directory(kSource / "data" / "scenes");
    const std::vector<env::Episode> suite =
        env::load_episodes(kSource / "data" / "episodes" / "synth_suite.jsonl", scenes);
    const fs::path dir = fs::temp_directory_path() / "navlab_acceptance_c8";
    fs::create_directories(dir);
    bool ok = true;
    std::ostringstream detail;
    for (double rate : {0.0, 0.3, 1.0}) {
        cot::SynthesisStats expect;
        for (const env::Episode& e : suite) {
            const auto& scene = scenes.get(e.scene_id);
            std::size_t turns = 0;
            env::Pose pose = e.start;
            for (std::size_t i = 1; i < e.reference_trajectory.size(); ++i) {
                const Vec2 d = e.reference_trajectory.points[i] - pose.position;
                const double delta = wrap_bearing(std::atan2(d.y, d.x) - pose.heading);
                turns += static_cast<std::size_t>(std::lround(std::abs(delta) / scene.kinematics.turn_angle));
                pose.heading = wrap_heading(std::atan2(d.y, d.x));
                pose.position = e.reference_trajectory.points[i];
            }
            const std::size_t records = turns + e.reference_trajectory.size();
            for (std::size_t t = 0; t < records; ++t) {
                ++expect.raw;
                if (uniform_at(0, {fnv1a64(e.id), t, 0}) < rate) {
                    ++expect.rule_rejected;
                } else {
                    ++expect.kept;
                }
            }
        }
        const cot::MockGenerator gen({rate, 0});
        const cot::SynthesisStats got = cot::synthesize_dataset(suite, scenes, gen, dir / "d.jsonl");
        std::size_t refail = 0;
        for (const cot::RawRecord& r : cot::load_dataset(dir / "d.jsonl")) {
            const env::Episode* ep = nullptr;
            for (const env::Episode& e : suite) {
                if (e.id == r.episode_id) ep = &e;
            }
            cot::RawRecord strict = r;
            strict.raw_response = r.trace.value_or("");
            if (!ep || !r.trace || trace::format_reward(*r.trace) != 1.0 || !cot::rule_filter(strict).kept ||
                !cot::feasibility_filter(strict, *ep, scenes.get(r.scene_id), cot::kDefaultToleranceSteps).kept) {
                ++refail;
            }
        }
        const bool match = got == expect;
        ok = ok && match && refail == 0;
        detail << (rate > 0.0 ? "; " : "") << "rate " << rate << ": " << got.kept << "/" << got.raw << " kept"
               << (match ? "" : " (recount differs)") << ", " << refail << " re-check failures";
    }
    fs::remove_all(dir);
    return {ok, detail.str()};
}

// ---- 9: protocol -------------------------------------------------------------------------

Outcome protocol() {
    SplitMixStream rng(1009);
    std::size_t mismatches = 0;
    for (int k = 0; k < 10000; ++k) {
        serve::ObservationFrame f;
        f.session_id = "s" + std::to_string(rng() % 100000);
        f.step = rng() >> static_cast<int>(rng.uniform() * 64);
        const std::size_t rays = 1 + rng() % 24;
        for (std::size_t i = 0; i < rays; ++i) f.observation.depth_rays.push_back(std::ldexp(rng.uniform(), static_cast<int>(rng() % 20) - 10));
        f.observation.goal_bearing = 6.0 * rng.uniform() - 3.0;
        f.observation.goal_distance = 10.0 * rng.uniform();
        f.observation.step_fraction = rng.uniform();
        f.client_send_time = static_cast<std::int64_t>(rng() >> 1);
        if (rng.uniform() < 0.3) f.instruction = "instruction " + std::to_string(rng());
        const std::string bytes = serve::encode(f);
        serve::FrameReader reader;
        reader.feed(bytes);
        const auto payload = reader.next();
        if (!payload || !(serve::decode_observation(*payload) == f) || serve::encode(serve::decode_observation(*payload)) != bytes) {
            ++mismatches;
        }
    }

    const env::SceneLibrary scenes = env::SceneLibrary::load_directory(kSource / "data" / "scenes");
    const std::vector<env::Episode> suite = env::load_episodes(kSource / "data" / "episodes" / "nav_suite.jsonl", scenes);
    const policy::FisPolicy model(policy::feature_width(16), 16, 32);
    const policy::ParamVector params = policy::init_params(model, 99, 1.0);
    serve::ServerConfig sc;
    sc.seed = 5;

    std::size_t typed = 0;
    bool alive = false;
    {
        serve::Server server(model, params, sc);
        serve::Client client("127.0.0.1", server.start());
        const std::vector<std::string> bad{"{", "[]", R"({"session_id":"a"})",
                                           R"({"session_id":"a","step":0,"observation":{"depth_rays":[-1],"goal_bearing":0,"goal_distance":1,"step_fraction":0},"client_send_time":0})"};
        for (const std::string& p : bad) {
            client.send_raw(serve::encode_frame(p));
            const serve::Response r = client.read_response();
            if (std::holds_alternative<serve::ErrorFrame>(r) &&
                std::get<serve::ErrorFrame>(r).kind == serve::ErrorKind::Malformed) {
                ++typed;
            }
        }
        const env::Episode& e = suite.front();
        alive = !serve::run_remote_episode(client, e, scenes.get(e.scene_id), 20, "after-errors").actions.empty();
    }

    auto strip = [](serve::RemoteEpisodeLog log) {
        log.samples.clear();
        return serve::to_json(log);
    };
    const env::Episode& e1 = suite[0];
    const env::Episode& e2 = suite[suite.size() / 2];
    nlohmann::json seq1, seq2, con1, con2;
    {
        serve::Server server(model, params, sc);
        serve::Client c("127.0.0.1", server.start());
        seq1 = strip(serve::run_remote_episode(c, e1, scenes.get(e1.scene_id), 40, "alpha"));
    }
    {
        serve::Server server(model, params, sc);
        serve::Client c("127.0.0.1", server.start());
        seq2 = strip(serve::run_remote_episode(c, e2, scenes.get(e2.scene_id), 40, "beta"));
    }
    {
        serve::Server server(model, params, sc);
        const int port = server.start();
        std::thread t1([&] {
            serve::Client c("127.0.0.1", port);
            con1 = strip(serve::run_remote_episode(c, e1, scenes.get(e1.scene_id), 40, "alpha"));
        });
        std::thread t2([&] {
            serve::Client c("127.0.0.1", port);
            con2 = strip(serve::run_remote_episode(c, e2, scenes.get(e2.scene_id), 40, "beta"));
        });
        t1.join();
        t2.join();
    }
    const bool isolated = con1 == seq1 && con2 == seq2;
    return {mismatches == 0 && typed == 4 && alive && isolated,
            fmt("10000 frames, %.0f mismatches; %.0f/4 malformed frames typed", static_cast<double>(mismatches),
                static_cast<double>(typed)) +
                (alive ? ", connection kept" : ", connection LOST") +
                (isolated ? ", concurrent == sequential" : ", concurrent sessions DIFFER")};
}

// ---- 10: perfect replay --------------------------------------------------------------------

Outcome perfect_replay() {
    const cli::RunConfig cfg = default_config();
    const cli::Workspace ws = cli::load_workspace(cfg);
    const policy::FisPolicy model = cli::navigation_model(cfg, ws.scenes);
    const policy::ParamVector zero(model.layout(), std::vector<double>(model.layout().size(), 0.0));
    std::size_t episodes = 0, failures = 0;
    double worst = 0.0;
    for (const char* name : {"nav_suite.jsonl", "nav_heldout.jsonl", "synth_suite.jsonl", "qa_suite.jsonl"}) {
        const auto suite = env::load_episodes(kSource / "data" / "episodes" / name, ws.scenes);
        const auto evals = cli::evaluate_suite(model, zero, suite, ws.scenes, cfg, true, Exec::Parallel);
        for (std::size_t i = 0; i < suite.size(); ++i) {
            const metrics::MetricReport& r = evals[i].report;
            const double radius = suite[i].success_radius;
            ++episodes;
            worst = std::max({worst, std::abs(r.spl - 1.0), std::abs(r.ndtw - 1.0)});
            if (r.sr != 1 || std::abs(r.spl - 1.0) > 1e-9 || std::abs(r.ndtw - 1.0) > 1e-9 || !(r.ne < radius)) {
                ++failures;
            }
        }
    }
    return {failures == 0, fmt("%.0f episodes, %.0f not perfect, max |SPL-1|,|nDTW-1| %.1e",
                               static_cast<double>(episodes), static_cast<double>(failures), worst)};
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all{
        {1, "metric oracles", 30, metric_oracles},
        {2, "advantage standardization", 5, advantages},
        {3, "gradient correctness", 60, gradients},
        {4, "format learning", 120, format_learning},
        {5, "navigation improvement", 900, navigation_improvement},
        {6, "beta sweep", 600, beta_monotone},
        {7, "FiS scheduling", 30, fis_schedule},
        {8, "CoT pipeline", 60, cot_pipeline},
        {9, "protocol conformance", 60, protocol},
        {10, "perfect replay", 10, perfect_replay},
    };
    std::set<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.insert(std::stoi(argv[i]));
    int failed = 0;
    for (const Criterion& c : all) {
        if (!wanted.empty() && !wanted.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_seconds;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::printf("[%s] %2d %-26s %7.1fs (limit %4.0fs)  %s%s\n", pass ? "PASS" : "FAIL", c.id, c.name, secs,
                    c.limit_seconds, o.detail.c_str(), in_time ? "" : "  [over time limit]");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
