#include "navlab/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "navlab/coldstart.hpp"
#include "navlab/parallel.hpp"
#include "navlab/random.hpp"

namespace navlab::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::atomic<bool> g_stop{false};

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

// Keys of `actual` must exist in `schema`, recursively for objects.
void check_keys(const json& actual, const json& schema, const std::string& where) {
    for (auto it = actual.begin(); it != actual.end(); ++it) {
        const std::string key = where.empty() ? it.key() : where + "." + it.key();
        if (!schema.contains(it.key())) throw ConfigError("unknown config key " + key);
        const json& s = schema.at(it.key());
        if (s.is_object() && !s.empty()) {
            if (!it->is_object()) throw ConfigError(key + " must be an object");
            check_keys(*it, s, key);
        }
    }
}

template <class T>
T get(const json& j, const char* key, const std::string& section) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(section + "." + key + ": " + e.what());
    }
}

fs::path existing(const std::string& p, const char* what) {
    fs::path path(p);
    if (!fs::exists(path)) throw ConfigError(std::string(what) + " does not exist: " + p);
    return path;
}

const char* flag(bool b) { return b ? "x" : "-"; }

}  // namespace

json default_config_json() {
    return {
        {"output_dir", "runs"},
        {"scenes", "data/scenes"},
        {"suites",
         {{"synth", "data/episodes/synth_suite.jsonl"},
          {"train", "data/episodes/nav_suite.jsonl"},
          {"eval", "data/episodes/nav_suite.jsonl"}}},
        {"budget", 40},
        {"hidden", 32},
        {"ndtw_threshold", 0.5},
        {"workers", 0},
        {"reward",
         {{"k_path", 1.0},
          {"k_end", 1.0},
          {"path_metric", "frechet"},
          {"enabled", {"format", "understanding", "navigation"}}}},
        {"grpo",
         {{"group_size", 8},
          {"clip_eps", 0.2},
          {"kl_beta", 0.02},
          {"learning_rate", 0.01},
          {"iterations", 100},
          {"degenerate_std_floor", 1e-8},
          {"eval_every", 10}}},
        {"fis",
         {{"n", 3},
          {"H", 3},
          {"latent_width", 16},
          {"slow_cost", 10.0},
          {"fast_cost", 1.0},
          {"open_loop", false},
          {"mode", "dual"}}},
        {"generator",
         {{"kind", "mock"},
          {"corruption_rate", 0.3},
          {"seed", 0},
          {"base_url", ""},
          {"path", "/generate"},
          {"timeout_seconds", 5.0},
          {"retries", 2},
          {"fields", json::object()}}},
        {"synthesis", {{"tolerance_steps", cot::kDefaultToleranceSteps}}},
        {"coldstart",
         {{"nav_epochs", 50}, {"nav_learning_rate", 0.1}, {"trace_epochs", 6}, {"trace_learning_rate", 0.2}}},
        {"trace",
         {{"hidden", 32},
          {"prompts_per_iteration", 16},
          {"eval_samples", 200},
          {"eval_seed", 7},
          {"iterations", 300},
          {"learning_rate", 0.05}}},
        {"ablate",
         {{"seeds", {0, 1, 2, 3, 4}},
          {"grid_iterations", 100},
          {"betas", {0.005, 0.01, 0.02, 0.03, 0.05}},
          {"beta_iterations", 300},
          {"beta_replicates", 4},
          {"probe_samples", 200}}},
        {"serve",
         {{"host", "127.0.0.1"}, {"port", 7070}, {"delay_ms", 0.0}, {"greedy", true}, {"timeout_ms", 5000.0}}},
    };
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    json* node = &config;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw ConfigError("empty key segment in override " + assignment);
        if (dot == std::string::npos) {
            (*node)[part] = value;
            break;
        }
        json& next = (*node)[part];
        if (next.is_null()) next = json::object();
        if (!next.is_object()) throw ConfigError("override path crosses a non-object at " + part);
        node = &next;
        start = dot + 1;
    }
}

RunConfig parse_config(const json& merged) {
    if (!merged.is_object()) throw ConfigError("config must be a JSON object");
    json schema = default_config_json();
    schema["seed"] = 0;
    check_keys(merged, schema, "");
    if (!merged.contains("seed") || !merged.at("seed").is_number_integer()) {
        throw ConfigError("config must set an integer seed");
    }

    RunConfig c;
    c.source = merged;
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.output_dir = get<std::string>(merged, "output_dir", "config");
    c.scenes_dir = existing(get<std::string>(merged, "scenes", "config"), "scenes directory");
    const json& suites = merged.at("suites");
    c.synth_suite = existing(get<std::string>(suites, "synth", "suites"), "synthesis suite");
    c.train_suite = existing(get<std::string>(suites, "train", "suites"), "training suite");
    c.eval_suite = existing(get<std::string>(suites, "eval", "suites"), "evaluation suite");
    c.budget = get<std::size_t>(merged, "budget", "config");
    c.hidden = get<std::size_t>(merged, "hidden", "config");
    c.ndtw_threshold = get<double>(merged, "ndtw_threshold", "config");
    c.workers = get<int>(merged, "workers", "config");
    if (c.budget < 1 || c.hidden < 1 || !(c.ndtw_threshold > 0.0) || c.workers < 0) {
        throw ConfigError("budget, hidden and ndtw_threshold must be positive; workers non-negative");
    }

    const json& r = merged.at("reward");
    c.reward.k_path = get<double>(r, "k_path", "reward");
    c.reward.k_end = get<double>(r, "k_end", "reward");
    const auto metric = rewards::parse_path_metric(get<std::string>(r, "path_metric", "reward"));
    if (!metric) throw ConfigError("reward.path_metric must be frechet or dtw");
    c.reward.path_metric = *metric;
    c.reward.enabled.clear();
    for (const std::string& g : get<std::vector<std::string>>(r, "enabled", "reward")) {
        const auto group = rewards::parse_group(g);
        if (!group) throw ConfigError("unknown reward group " + g);
        c.reward.enabled.insert(*group);
    }

    const json& g = merged.at("grpo");
    c.grpo.group_size = get<std::size_t>(g, "group_size", "grpo");
    c.grpo.clip_eps = get<double>(g, "clip_eps", "grpo");
    c.grpo.kl_beta = get<double>(g, "kl_beta", "grpo");
    c.grpo.learning_rate = get<double>(g, "learning_rate", "grpo");
    c.grpo.iterations = get<std::size_t>(g, "iterations", "grpo");
    c.grpo.degenerate_std_floor = get<double>(g, "degenerate_std_floor", "grpo");
    c.grpo.eval_every = get<std::size_t>(g, "eval_every", "grpo");
    c.grpo.seed = c.seed;

    const json& f = merged.at("fis");
    c.fis.n = get<std::size_t>(f, "n", "fis");
    c.fis.H = get<std::size_t>(f, "H", "fis");
    c.fis.latent_width = get<std::size_t>(f, "latent_width", "fis");
    c.fis.slow_cost = get<double>(f, "slow_cost", "fis");
    c.fis.fast_cost = get<double>(f, "fast_cost", "fis");
    c.fis.open_loop = get<bool>(f, "open_loop", "fis");
    const auto mode = fis::parse_mode(get<std::string>(f, "mode", "fis"));
    if (!mode) throw ConfigError("fis.mode must be dual, slow_only or fast_only");
    c.fis.mode = *mode;

    try {
        c.reward.validate();
        c.grpo.validate();
        c.fis.validate();
        c.generator = merged.at("generator").get<cot::GeneratorEndpoint>();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    c.tolerance_steps = get<double>(merged.at("synthesis"), "tolerance_steps", "synthesis");
    if (!(c.tolerance_steps > 0.0)) throw ConfigError("synthesis.tolerance_steps must be positive");

    const json& cs = merged.at("coldstart");
    c.coldstart.nav_epochs = get<std::size_t>(cs, "nav_epochs", "coldstart");
    c.coldstart.nav_learning_rate = get<double>(cs, "nav_learning_rate", "coldstart");
    c.coldstart.trace_epochs = get<std::size_t>(cs, "trace_epochs", "coldstart");
    c.coldstart.trace_learning_rate = get<double>(cs, "trace_learning_rate", "coldstart");

    const json& t = merged.at("trace");
    c.trace.hidden = get<std::size_t>(t, "hidden", "trace");
    c.trace.prompts_per_iteration = get<std::size_t>(t, "prompts_per_iteration", "trace");
    c.trace.eval_samples = get<std::size_t>(t, "eval_samples", "trace");
    c.trace.eval_seed = get<std::uint64_t>(t, "eval_seed", "trace");
    c.trace.iterations = get<std::size_t>(t, "iterations", "trace");
    c.trace.learning_rate = get<double>(t, "learning_rate", "trace");
    if (c.trace.prompts_per_iteration < 1 || c.trace.eval_samples < 1 || c.trace.hidden < 1) {
        throw ConfigError("trace sizes must be positive");
    }

    const json& a = merged.at("ablate");
    c.ablate.seeds = get<std::vector<std::uint64_t>>(a, "seeds", "ablate");
    c.ablate.grid_iterations = get<std::size_t>(a, "grid_iterations", "ablate");
    c.ablate.betas = get<std::vector<double>>(a, "betas", "ablate");
    c.ablate.beta_iterations = get<std::size_t>(a, "beta_iterations", "ablate");
    c.ablate.beta_replicates = get<std::size_t>(a, "beta_replicates", "ablate");
    c.ablate.probe_samples = get<std::size_t>(a, "probe_samples", "ablate");
    if (c.ablate.seeds.empty() || c.ablate.betas.empty() || c.ablate.probe_samples < 1 ||
        c.ablate.beta_replicates < 1) {
        throw ConfigError("ablate needs seeds, betas and a positive probe size");
    }
    for (double b : c.ablate.betas) {
        if (!(b >= 0.0)) throw ConfigError("ablate.betas must be non-negative");
    }

    const json& s = merged.at("serve");
    c.serve.host = get<std::string>(s, "host", "serve");
    c.serve.port = get<int>(s, "port", "serve");
    c.serve.delay_ms = get<double>(s, "delay_ms", "serve");
    c.serve.greedy = get<bool>(s, "greedy", "serve");
    c.serve.timeout_ms = get<double>(s, "timeout_ms", "serve");
    if (c.serve.port < 0 || c.serve.port > 65535 || c.serve.delay_ms < 0.0 || !(c.serve.timeout_ms > 0.0)) {
        throw ConfigError("serve port, delay or timeout out of range");
    }
    return c;
}

RunConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
    json merged = default_config_json();
    if (file) {
        std::string text;
        try {
            text = read_file(*file);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
        json user = json::parse(text, nullptr, false);
        if (user.is_discarded() || !user.is_object()) throw ConfigError("config is not a JSON object: " + file->string());
        merged.merge_patch(user);
    }
    for (const std::string& o : overrides) apply_override(merged, o);
    return parse_config(merged);
}

std::string config_hash(const json& config) { return hex64(fnv1a64(config.dump())); }

fs::path output_root(const RunConfig& cfg) {
    if (const char* env = std::getenv("NAVLAB_OUTPUT_ROOT"); env != nullptr && *env != '\0') return fs::path(env);
    return cfg.output_dir;
}

void write_manifest(const fs::path& run_dir, const std::string& command, const RunConfig& cfg, const json& inputs,
                    const json& outputs) {
    json digests = json::object();
    for (auto it = inputs.begin(); it != inputs.end(); ++it) {
        if (!it->is_string()) continue;
        const fs::path p(it->get<std::string>());
        if (fs::is_regular_file(p)) digests[it.key()] = hex64(fnv1a64(read_file(p)));
    }
    json out_digests = json::object();
    for (const json& o : outputs) {
        const fs::path p = run_dir / o.get<std::string>();
        if (fs::is_regular_file(p)) out_digests[o.get<std::string>()] = hex64(fnv1a64(read_file(p)));
    }
    const json manifest{{"command", command},
                        {"config_hash", config_hash(cfg.source)},
                        {"seed", cfg.seed},
                        {"config", cfg.source},
                        {"inputs", inputs},
                        {"input_digests", digests},
                        {"outputs", out_digests}};
    write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
}

Workspace load_workspace(const RunConfig& cfg) {
    Workspace ws;
    ws.scenes = env::SceneLibrary::load_directory(cfg.scenes_dir);
    ws.synth = env::load_episodes(cfg.synth_suite, ws.scenes);
    ws.train = env::load_episodes(cfg.train_suite, ws.scenes);
    ws.eval = env::load_episodes(cfg.eval_suite, ws.scenes);
    if (ws.synth.empty() || ws.train.empty() || ws.eval.empty()) throw ConfigError("episode suites must be non-empty");
    return ws;
}

policy::FisPolicy navigation_model(const RunConfig& cfg, const env::SceneLibrary& scenes) {
    int rays = -1;
    for (const std::string& id : scenes.ids()) {
        const int r = scenes.get(id).ray_count;
        if (rays >= 0 && r != rays) throw ConfigError("scenes disagree on the ray count");
        rays = r;
    }
    if (rays <= 0) throw ConfigError("no scenes loaded");
    return policy::FisPolicy(policy::feature_width(rays), cfg.fis.latent_width, cfg.hidden);
}

policy::TracePolicy trace_model(const RunConfig& cfg) {
    return policy::TracePolicy(policy::Vocabulary::standard().size(), policy::kTraceMaxLen, cfg.trace.hidden);
}

std::uint64_t init_seed(const RunConfig& cfg, std::uint64_t s) { return mix_seed(cfg.seed, {fnv1a64("init"), s}); }

std::vector<EpisodeEval> evaluate_suite(const policy::FisPolicy& model, const policy::ParamVector& params,
                                        const std::vector<env::Episode>& suite, const env::SceneLibrary& scenes,
                                        const RunConfig& cfg, bool replay, Exec exec) {
    std::vector<EpisodeEval> out(suite.size());
    for_each_index(exec, suite.size(), [&](std::size_t i) {
        const env::Episode& e = suite[i];
        const env::Scene& scene = scenes.get(e.scene_id);
        fis::RunOptions options;
        std::size_t budget = cfg.budget;
        if (replay) {
            options.forced_actions = env::actions_for_path(scene, e.start, e.reference_trajectory);
            options.stop_on_arrival = false;
            budget = std::max(budget, options.forced_actions->size());
        } else {
            options.greedy = true;
        }
        out[i].log = fis::run_episode(model, params, e, scene, cfg.fis, budget, 0, options);
        const double shortest = env::shortest_path_length(scene, e.start.position, e.goal);
        out[i].report = metrics::evaluate(out[i].log.trajectory, e.goal, e.success_radius, shortest,
                                          e.reference_trajectory, cfg.ndtw_threshold);
    });
    return out;
}

metrics::Aggregate aggregate(const std::vector<EpisodeEval>& evals) {
    std::vector<metrics::MetricReport> reports;
    for (const EpisodeEval& e : evals) reports.push_back(e.report);
    return metrics::aggregate(reports);
}

std::vector<cot::RawRecord> synthesize_records(const RunConfig& cfg, const Workspace& ws, const fs::path& path,
                                               cot::SynthesisStats* stats) {
    const std::unique_ptr<cot::Generator> gen = cot::make_generator(cfg.generator);
    cot::SynthesisOptions options;
    options.tolerance_steps = cfg.tolerance_steps;
    const cot::SynthesisStats s = cot::synthesize_dataset(ws.synth, ws.scenes, *gen, path, options);
    if (stats) *stats = s;
    return cot::load_dataset(path);
}

policy::ParamVector cold_start_navigation(const RunConfig& cfg, const Workspace& ws,
                                          const std::vector<cot::RawRecord>& records, std::uint64_t seed,
                                          std::vector<double>* nll) {
    const policy::FisPolicy model = navigation_model(cfg, ws.scenes);
    const std::vector<policy::Sequence> seqs =
        coldstart::navigation_sequences(model, records, ws.synth, ws.scenes, cfg.fis, cfg.budget);
    if (seqs.empty()) throw std::runtime_error("no kept records match the synthesis suite");
    coldstart::SftRun run = coldstart::supervised_train(model, policy::init_params(model, seed), seqs,
                                                        cfg.coldstart.nav_epochs, cfg.coldstart.nav_learning_rate);
    if (nll) *nll = run.nll;
    return std::move(run.params);
}

policy::ParamVector cold_start_trace(const RunConfig& cfg, const std::vector<cot::RawRecord>& records,
                                     std::uint64_t seed, std::vector<double>* nll) {
    const policy::TracePolicy model = trace_model(cfg);
    const std::vector<policy::Sequence> seqs = coldstart::trace_sequences(model, records);
    if (seqs.empty()) throw std::runtime_error("no kept traces fit the trace policy");
    coldstart::SftRun run = coldstart::supervised_train(model, policy::init_params(model, seed), seqs,
                                                        cfg.coldstart.trace_epochs, cfg.coldstart.trace_learning_rate);
    if (nll) *nll = run.nll;
    return std::move(run.params);
}

std::vector<GridRow> reward_grid(const RunConfig& cfg, const Workspace& ws, const std::vector<cot::RawRecord>& records) {
    const policy::FisPolicy model = navigation_model(cfg, ws.scenes);
    const std::size_t seeds = cfg.ablate.seeds.size();
    std::vector<policy::ParamVector> cold;
    std::vector<double> cold_sr;
    for (std::uint64_t s : cfg.ablate.seeds) {
        cold.push_back(cold_start_navigation(cfg, ws, records, init_seed(cfg, s)));
        cold_sr.push_back(aggregate(evaluate_suite(model, cold.back(), ws.eval, ws.scenes, cfg, false, Exec::Parallel)).sr);
    }
    double cold_mean = 0.0;
    for (double v : cold_sr) cold_mean += v / static_cast<double>(seeds);

    std::vector<GridRow> rows;
    for (int mask = 0; mask < 8; ++mask) {
        GridRow row;
        row.format = (mask & 4) != 0;
        row.understanding = (mask & 2) != 0;
        row.navigation = (mask & 1) != 0;
        row.cold_sr = cold_mean;
        rewards::RewardConfig rc = cfg.reward;
        rc.enabled.clear();
        if (row.format) rc.enabled.insert(rewards::RewardGroup::Format);
        if (row.understanding) rc.enabled.insert(rewards::RewardGroup::Understanding);
        if (row.navigation) rc.enabled.insert(rewards::RewardGroup::Navigation);
        const grpo::NavigationTask task(model, ws.train, ws.scenes, rc, cfg.fis, cfg.budget);
        for (std::size_t k = 0; k < seeds; ++k) {
            grpo::GrpoConfig g = cfg.grpo;
            g.iterations = cfg.ablate.grid_iterations;
            g.eval_every = 0;
            g.seed = mix_seed(cfg.seed, {fnv1a64("grid"), cfg.ablate.seeds[k]});
            const grpo::TrainReport rep = grpo::train(g, task, cold[k]);
            const metrics::Aggregate a =
                aggregate(evaluate_suite(model, rep.final_params, ws.eval, ws.scenes, cfg, false, Exec::Parallel));
            row.seed_sr.push_back(a.sr);
            row.sr += a.sr / static_cast<double>(seeds);
            row.spl += a.spl / static_cast<double>(seeds);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string render_reward_grid(const std::vector<GridRow>& rows) {
    std::string out = "Format | Understanding | Navigation |   SR   |  SPL\n";
    out += "-------+---------------+------------+--------+-------\n";
    char buf[128];
    for (const GridRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%6s | %13s | %10s | %6.1f | %5.1f\n", flag(r.format), flag(r.understanding),
                      flag(r.navigation), 100.0 * r.sr, 100.0 * r.spl);
        out += buf;
    }
    if (!rows.empty()) {
        std::snprintf(buf, sizeof buf, "cold start SR %.1f\n", 100.0 * rows.front().cold_sr);
        out += buf;
    }
    return out;
}

std::string reward_grid_csv(const std::vector<GridRow>& rows) {
    std::string out = "format,understanding,navigation,sr,spl,cold_sr\n";
    char buf[160];
    for (const GridRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.6f,%.6f,%.6f\n", r.format, r.understanding, r.navigation, r.sr,
                      r.spl, r.cold_sr);
        out += buf;
    }
    return out;
}

std::vector<BetaRow> beta_sweep(const RunConfig& cfg, const policy::ParamVector& trace_init) {
    const policy::TracePolicy model = trace_model(cfg);
    const grpo::TraceFormatTask task(model, cfg.trace.prompts_per_iteration, cfg.trace.eval_samples,
                                     cfg.trace.eval_seed);
    grpo::ContextSet probe;
    probe.width = model.context_width();
    for (std::size_t i = 0; i < cfg.ablate.probe_samples; ++i) {
        const policy::Rollout r =
            policy::sample_trace_rollout(model, trace_init, mix_seed(cfg.seed, {fnv1a64("probe"), i}));
        probe.append(r.contexts);
    }
    std::vector<BetaRow> rows;
    const double inv_r = 1.0 / static_cast<double>(cfg.ablate.beta_replicates);
    for (double beta : cfg.ablate.betas) {
        BetaRow row;
        row.beta = beta;
        for (std::size_t rep_i = 0; rep_i < cfg.ablate.beta_replicates; ++rep_i) {
            grpo::GrpoConfig g = cfg.grpo;
            g.kl_beta = beta;
            g.iterations = cfg.ablate.beta_iterations;
            g.learning_rate = cfg.trace.learning_rate;
            g.eval_every = 0;
            g.seed = mix_seed(cfg.seed, {fnv1a64("beta"), rep_i});
            double tail = 0.0;
            std::size_t tail_n = 0;
            const grpo::TrainReport rep = grpo::train(g, task, trace_init, [&](const grpo::IterationRow& r) {
                if (2 * r.iteration >= g.iterations) {
                    tail += r.mean_kl;
                    ++tail_n;
                }
            });
            row.final_kl += inv_r * grpo::kl_divergence(model, rep.final_params, trace_init, probe);
            row.mean_kl += inv_r * (tail_n ? tail / static_cast<double>(tail_n) : 0.0);
            row.well_formed += inv_r * task.evaluate(rep.final_params, Exec::Parallel);
        }
        rows.push_back(row);
    }
    return rows;
}

std::string render_beta_table(const std::vector<BetaRow>& rows) {
    std::string out = "  beta  | final KL | mean KL | well-formed\n";
    out += "--------+----------+---------+------------\n";
    char buf[128];
    for (const BetaRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%7.3f | %8.4f | %7.4f | %10.1f\n", r.beta, r.final_kl, r.mean_kl,
                      100.0 * r.well_formed);
        out += buf;
    }
    return out;
}

std::string beta_table_csv(const std::vector<BetaRow>& rows) {
    std::string out = "beta,final_kl,mean_kl,well_formed\n";
    char buf[128];
    for (const BetaRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6g,%.6f,%.6f,%.6f\n", r.beta, r.final_kl, r.mean_kl, r.well_formed);
        out += buf;
    }
    return out;
}

// ---- commands ------------------------------------------------------------------

cot::SynthesisStats cmd_synth(const RunConfig& cfg, const fs::path& run_dir) {
    const Workspace ws = load_workspace(cfg);
    fs::create_directories(run_dir);
    const std::unique_ptr<cot::Generator> gen = cot::make_generator(cfg.generator);
    cot::SynthesisOptions options;
    options.tolerance_steps = cfg.tolerance_steps;
    options.rejected_path = run_dir / "rejected.jsonl";
    const cot::SynthesisStats stats = cot::synthesize_dataset(ws.synth, ws.scenes, *gen, run_dir / "dataset.jsonl", options);
    write_file(run_dir / "stats.json", cot::to_json(stats).dump(2) + "\n");
    char buf[256];
    std::snprintf(buf, sizeof buf, "   raw | rule rejected | feasibility rejected |  kept\n%6zu | %13zu | %20zu | %5zu\n",
                  stats.raw, stats.rule_rejected, stats.feasibility_rejected, stats.kept);
    write_file(run_dir / "synthesis.txt", buf);
    write_manifest(run_dir, "synth", cfg, {{"synth_suite", cfg.synth_suite.string()}},
                   {"dataset.jsonl", "rejected.jsonl", "stats.json", "synthesis.txt"});
    return stats;
}

ColdStartOutputs cmd_coldstart(const RunConfig& cfg, const fs::path& dataset, const fs::path& run_dir) {
    if (!fs::exists(dataset)) throw ConfigError("dataset does not exist: " + dataset.string());
    const Workspace ws = load_workspace(cfg);
    const std::vector<cot::RawRecord> records = cot::load_dataset(dataset);
    fs::create_directories(run_dir);
    std::vector<double> nav_nll, trace_nll;
    const policy::ParamVector nav = cold_start_navigation(cfg, ws, records, init_seed(cfg, 0), &nav_nll);
    const policy::ParamVector trace = cold_start_trace(cfg, records, init_seed(cfg, 0), &trace_nll);
    ColdStartOutputs out;
    out.nav_checkpoint = run_dir / "nav_cold.ckpt";
    out.trace_checkpoint = run_dir / "trace_cold.ckpt";
    out.nav_nll = nav_nll.empty() ? 0.0 : nav_nll.back();
    out.trace_nll = trace_nll.empty() ? 0.0 : trace_nll.back();
    const policy::FisPolicy nm = navigation_model(cfg, ws.scenes);
    policy::save_checkpoint(out.nav_checkpoint, nm, nav, {{"stage", "coldstart"}, {"config_hash", config_hash(cfg.source)}});
    policy::save_checkpoint(out.trace_checkpoint, trace_model(cfg), trace,
                            {{"stage", "coldstart"}, {"config_hash", config_hash(cfg.source)}});
    std::string curve = "epoch,nav_nll,trace_nll\n";
    const std::size_t epochs = std::max(nav_nll.size(), trace_nll.size());
    char buf[128];
    for (std::size_t e = 0; e < epochs; ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%s,%s\n", e,
                      e < nav_nll.size() ? std::to_string(nav_nll[e]).c_str() : "",
                      e < trace_nll.size() ? std::to_string(trace_nll[e]).c_str() : "");
        curve += buf;
    }
    write_file(run_dir / "sft_curve.csv", curve);
    const metrics::Aggregate a = aggregate(evaluate_suite(nm, nav, ws.eval, ws.scenes, cfg, false, Exec::Parallel));
    write_file(run_dir / "coldstart.txt", metrics::render_table({{"cold start", a}}));
    write_manifest(run_dir, "coldstart", cfg, {{"dataset", dataset.string()}},
                   {"nav_cold.ckpt", "trace_cold.ckpt", "sft_curve.csv", "coldstart.txt"});
    return out;
}

namespace {

policy::ParamVector load_matching(const fs::path& path, const policy::Model& model) {
    if (!fs::exists(path)) throw ConfigError("checkpoint does not exist: " + path.string());
    policy::Checkpoint ck = policy::load_checkpoint(path);
    if (ck.params.layout() != model.layout()) {
        throw ConfigError("checkpoint " + path.string() + " does not match the configured model");
    }
    return std::move(ck.params);
}

}  // namespace

grpo::TrainReport cmd_train(const RunConfig& cfg, const fs::path& init_checkpoint, TaskKind kind,
                            const fs::path& run_dir) {
    fs::create_directories(run_dir);
    std::unique_ptr<grpo::Task> task;
    std::unique_ptr<policy::Model> model;
    grpo::GrpoConfig g = cfg.grpo;
    std::string name;
    if (kind == TaskKind::Navigation) {
        const Workspace ws = load_workspace(cfg);
        auto m = std::make_unique<policy::FisPolicy>(navigation_model(cfg, ws.scenes));
        task = std::make_unique<grpo::NavigationTask>(*m, ws.train, ws.scenes, cfg.reward, cfg.fis, cfg.budget, ws.eval);
        model = std::move(m);
        name = "nav";
    } else {
        auto m = std::make_unique<policy::TracePolicy>(trace_model(cfg));
        task = std::make_unique<grpo::TraceFormatTask>(*m, cfg.trace.prompts_per_iteration, cfg.trace.eval_samples,
                                                       cfg.trace.eval_seed);
        g.iterations = cfg.trace.iterations;
        g.learning_rate = cfg.trace.learning_rate;
        model = std::move(m);
        name = "trace";
    }
    const policy::ParamVector init = load_matching(init_checkpoint, *model);
    std::ofstream log(run_dir / "train_log.jsonl");
    if (!log) throw std::runtime_error("cannot write " + (run_dir / "train_log.jsonl").string());
    grpo::TrainReport rep = grpo::train(g, *task, init, [&](const grpo::IterationRow& r) {
        log << r.to_json().dump() << '\n';
    });
    log.close();
    const fs::path ckpt = run_dir / (name + "_rl.ckpt");
    policy::save_checkpoint(ckpt, *model, rep.final_params,
                            {{"stage", "grpo"}, {"config_hash", config_hash(cfg.source)}});
    rep.checkpoint = ckpt.string();

    std::string table = "iteration | mean reward | mean KL | surrogate | degenerate | held-out\n";
    char buf[160];
    for (const grpo::IterationRow& r : rep.rows) {
        if (!r.heldout && r.iteration + 1 != rep.rows.size()) continue;
        std::snprintf(buf, sizeof buf, "%9zu | %11.4f | %7.4f | %9.4f | %10zu | %s\n", r.iteration, r.mean_reward,
                      r.mean_kl, r.surrogate, r.degenerate_groups,
                      r.heldout ? std::to_string(*r.heldout).c_str() : "");
        table += buf;
    }
    write_file(run_dir / "training.txt", table);
    write_manifest(run_dir, "train", cfg, {{"init_checkpoint", init_checkpoint.string()}, {"task", name}},
                   {"train_log.jsonl", name + "_rl.ckpt", "training.txt"});
    return rep;
}

std::string cmd_eval(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& suite_path,
                     bool replay, const fs::path& run_dir) {
    if (!fs::exists(suite_path)) throw ConfigError("suite does not exist: " + suite_path.string());
    if (!replay && !checkpoint) throw ConfigError("eval needs a checkpoint unless --replay is given");
    const Workspace ws = load_workspace(cfg);
    const std::vector<env::Episode> suite = env::load_episodes(suite_path, ws.scenes);
    const policy::FisPolicy model = navigation_model(cfg, ws.scenes);
    const policy::ParamVector params =
        checkpoint ? load_matching(*checkpoint, model)
                   : policy::ParamVector(model.layout(), std::vector<double>(model.layout().size(), 0.0));
    fs::create_directories(run_dir);
    const std::vector<EpisodeEval> evals = evaluate_suite(model, params, suite, ws.scenes, cfg, replay, Exec::Parallel);
    std::vector<std::pair<std::string, metrics::Aggregate>> rows;
    std::ofstream out(run_dir / "episodes.jsonl");
    for (std::size_t i = 0; i < suite.size(); ++i) {
        rows.emplace_back(suite[i].id, metrics::aggregate({evals[i].report}));
        json j = fis::to_json(evals[i].log);
        j["metrics"] = {{"ne", evals[i].report.ne},
                        {"sr", evals[i].report.sr},
                        {"os", evals[i].report.os},
                        {"spl", evals[i].report.spl},
                        {"ndtw", evals[i].report.ndtw}};
        out << j.dump() << '\n';
    }
    out.close();
    rows.emplace_back(replay ? "mean (reference replay)" : "mean", aggregate(evals));
    const std::string table = metrics::render_table(rows);
    write_file(run_dir / "metrics.txt", table);
    json inputs{{"suite", suite_path.string()}, {"replay", replay}};
    if (checkpoint) inputs["checkpoint"] = checkpoint->string();
    write_manifest(run_dir, "eval", cfg, inputs, {"episodes.jsonl", "metrics.txt"});
    return table;
}

AblationTables cmd_ablate(const RunConfig& cfg, const fs::path& run_dir) {
    const Workspace ws = load_workspace(cfg);
    fs::create_directories(run_dir);
    const std::vector<cot::RawRecord> records = synthesize_records(cfg, ws, run_dir / "dataset.jsonl");
    AblationTables t;
    t.grid = reward_grid(cfg, ws, records);
    t.beta = beta_sweep(cfg, cold_start_trace(cfg, records, init_seed(cfg, 0)));
    t.grid_text = render_reward_grid(t.grid);
    t.beta_text = render_beta_table(t.beta);
    write_file(run_dir / "reward_grid.txt", t.grid_text);
    write_file(run_dir / "reward_grid.csv", reward_grid_csv(t.grid));
    write_file(run_dir / "beta_sweep.txt", t.beta_text);
    write_file(run_dir / "beta_sweep.csv", beta_table_csv(t.beta));
    write_manifest(run_dir, "ablate", cfg, {{"synth_suite", cfg.synth_suite.string()}},
                   {"dataset.jsonl", "reward_grid.txt", "reward_grid.csv", "beta_sweep.txt", "beta_sweep.csv"});
    return t;
}

void request_stop() { g_stop.store(true); }

namespace {

serve::ServerConfig server_config(const RunConfig& cfg, const fis::FisConfig& fis_cfg, int port) {
    serve::ServerConfig sc;
    sc.host = cfg.serve.host;
    sc.port = port;
    sc.fis = fis_cfg;
    sc.seed = cfg.seed;
    sc.greedy = cfg.serve.greedy;
    if (cfg.serve.delay_ms > 0.0) {
        sc.delays.push_back(std::chrono::nanoseconds(static_cast<std::int64_t>(std::llround(cfg.serve.delay_ms * 1e6))));
    }
    return sc;
}

policy::ParamVector controller_params(const RunConfig& cfg, const policy::FisPolicy& model,
                                      const std::optional<fs::path>& checkpoint) {
    if (checkpoint) return load_matching(*checkpoint, model);
    return policy::init_params(model, init_seed(cfg, 0));
}

}  // namespace

void cmd_serve(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& run_dir,
               std::optional<double> max_seconds) {
    const Workspace ws = load_workspace(cfg);
    const policy::FisPolicy model = navigation_model(cfg, ws.scenes);
    const policy::ParamVector params = load_matching(checkpoint, model);
    serve::Server server(model, params, server_config(cfg, cfg.fis, cfg.serve.port));
    const int port = server.start();
    fs::create_directories(run_dir);
    write_file(run_dir / "server.json", json{{"host", cfg.serve.host}, {"port", port}}.dump() + "\n");
    std::cout << "listening on " << cfg.serve.host << ":" << port << std::endl;
    g_stop.store(false);
    const auto start = std::chrono::steady_clock::now();
    while (!g_stop.load()) {
        if (max_seconds &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= *max_seconds) {
            break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
    write_file(run_dir / "server_stats.json",
               json{{"frames_served", server.frames_served()}, {"protocol_errors", server.protocol_errors()}}.dump() +
                   "\n");
    write_manifest(run_dir, "serve", cfg, {{"checkpoint", checkpoint.string()}}, {"server_stats.json"});
}

std::string cmd_client(const RunConfig& cfg, const std::optional<fs::path>& checkpoint, const fs::path& suite_path,
                       bool local, const fs::path& run_dir) {
    if (!fs::exists(suite_path)) throw ConfigError("suite does not exist: " + suite_path.string());
    const Workspace ws = load_workspace(cfg);
    const std::vector<env::Episode> suite = env::load_episodes(suite_path, ws.scenes);
    fs::create_directories(run_dir);
    const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(cfg.serve.timeout_ms));
    std::vector<serve::LatencyRow> rows;
    std::ofstream episodes(run_dir / "remote_episodes.jsonl");
    json outputs = json::array({"remote_episodes.jsonl", "latency.txt"});

    const auto drive = [&](serve::Client& client, const std::string& tag) {
        std::vector<serve::LatencySample> samples;
        for (const env::Episode& e : suite) {
            const serve::RemoteEpisodeLog log =
                serve::run_remote_episode(client, e, ws.scenes.get(e.scene_id), cfg.budget, tag + "/" + e.id);
            json j = serve::to_json(log);
            j["mode"] = tag;
            j["success"] = distance(log.final_position, e.goal) < e.success_radius;
            episodes << j.dump() << '\n';
            samples.insert(samples.end(), log.samples.begin(), log.samples.end());
        }
        const std::string file = "latency_samples_" + tag + ".jsonl";
        serve::write_samples_jsonl(run_dir / file, samples);
        outputs.push_back(file);
        return samples;
    };

    if (local) {
        const policy::FisPolicy model = navigation_model(cfg, ws.scenes);
        const policy::ParamVector params = controller_params(cfg, model, checkpoint);
        for (fis::Mode mode : {fis::Mode::Dual, fis::Mode::SlowOnly, fis::Mode::FastOnly}) {
            fis::FisConfig fc = cfg.fis;
            fc.mode = mode;
            serve::Server server(model, params, server_config(cfg, fc, 0));
            const int port = server.start();
            serve::Client client(cfg.serve.host, port, timeout);
            const std::vector<serve::LatencySample> samples = drive(client, std::string(fis::mode_name(mode)));
            char method[96];
            std::snprintf(method, sizeof method, "FiS %s (n=%zu, H=%zu)", std::string(fis::mode_name(mode)).c_str(),
                          fc.effective_n(), fc.H);
            rows.push_back({method, "server (loopback)", serve::latency_report(samples)});
        }
    } else {
        serve::Client client(cfg.serve.host, cfg.serve.port, timeout);
        const std::vector<serve::LatencySample> samples = drive(client, "remote");
        rows.push_back({"FiS (remote)", cfg.serve.host + ":" + std::to_string(cfg.serve.port),
                        serve::latency_report(samples)});
    }
    episodes.close();
    const std::string table = serve::render_latency_table(rows);
    write_file(run_dir / "latency.txt", table);
    json inputs{{"suite", suite_path.string()}, {"local", local}};
    if (checkpoint) inputs["checkpoint"] = checkpoint->string();
    write_manifest(run_dir, "client", cfg, inputs, outputs);
    return table;
}

std::string cmd_report(const fs::path& root) {
    if (!fs::is_directory(root)) throw ConfigError("report root is not a directory: " + root.string());
    std::vector<fs::path> tables;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt" && entry.path().filename() != "report.txt") {
            tables.push_back(entry.path());
        }
    }
    std::sort(tables.begin(), tables.end());
    std::string out;
    for (const fs::path& p : tables) {
        out += "## " + fs::relative(p, root).string() + "\n\n" + read_file(p) + "\n";
    }
    if (tables.empty()) out = "no tables found under " + root.string() + "\n";
    write_file(root / "report.txt", out);
    return out;
}

}  // namespace navlab::cli
