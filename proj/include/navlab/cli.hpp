#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/cot_engine.hpp"
#include "navlab/fis.hpp"
#include "navlab/grpo.hpp"
#include "navlab/metrics.hpp"
#include "navlab/policy.hpp"
#include "navlab/rewards.hpp"
#include "navlab/scene_io.hpp"
#include "navlab/serve.hpp"

namespace navlab::cli {

// Bad configuration: unreadable or invalid JSON, unknown keys, invalid values,
// missing input paths. Maps to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ColdStartSettings {
    std::size_t nav_epochs = 50;
    double nav_learning_rate = 0.1;
    std::size_t trace_epochs = 6;
    double trace_learning_rate = 0.2;
};

struct TraceSettings {
    std::size_t hidden = 32;
    std::size_t prompts_per_iteration = 16;
    std::size_t eval_samples = 200;
    std::uint64_t eval_seed = 7;
    std::size_t iterations = 300;
    double learning_rate = 0.05;
};

struct AblateSettings {
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::size_t grid_iterations = 100;
    std::vector<double> betas = {0.005, 0.01, 0.02, 0.03, 0.05};
    std::size_t beta_iterations = 300;
    std::size_t beta_replicates = 4;  // training seeds averaged per beta, shared across betas
    std::size_t probe_samples = 200;
};

struct ServeSettings {
    std::string host = "127.0.0.1";
    int port = 7070;
    double delay_ms = 0.0;
    bool greedy = true;
    double timeout_ms = 5000.0;
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    std::filesystem::path scenes_dir;
    std::filesystem::path synth_suite;
    std::filesystem::path train_suite;
    std::filesystem::path eval_suite;
    std::size_t budget = 40;
    std::size_t hidden = 32;
    double ndtw_threshold = 0.5;
    rewards::RewardConfig reward;
    grpo::GrpoConfig grpo;
    fis::FisConfig fis;
    cot::GeneratorEndpoint generator;
    double tolerance_steps = cot::kDefaultToleranceSteps;
    ColdStartSettings coldstart;
    TraceSettings trace;
    AblateSettings ablate;
    ServeSettings serve;
    int workers = 0;
    nlohmann::json source;  // the merged JSON the fields were read from
};

// Built-in defaults for every key except "seed".
nlohmann::json default_config_json();

// Applies "dotted.key=value"; the value is parsed as JSON, falling back to a string.
void apply_override(nlohmann::json& config, const std::string& assignment);

// Defaults ← file (optional) ← overrides, then validated. Throws ConfigError.
RunConfig load_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides);
RunConfig parse_config(const nlohmann::json& merged);

// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string config_hash(const nlohmann::json& config);

// Output root: NAVLAB_OUTPUT_ROOT when set, else the configured output_dir.
std::filesystem::path output_root(const RunConfig& cfg);

void write_manifest(const std::filesystem::path& run_dir, const std::string& command, const RunConfig& cfg,
                    const nlohmann::json& inputs, const nlohmann::json& outputs);

struct Workspace {
    env::SceneLibrary scenes;
    std::vector<env::Episode> synth;
    std::vector<env::Episode> train;
    std::vector<env::Episode> eval;
};

Workspace load_workspace(const RunConfig& cfg);

policy::FisPolicy navigation_model(const RunConfig& cfg, const env::SceneLibrary& scenes);
policy::TracePolicy trace_model(const RunConfig& cfg);

// Seeded initial parameters for ablation seed `s`.
std::uint64_t init_seed(const RunConfig& cfg, std::uint64_t s);

// ---- evaluation --------------------------------------------------------------

struct EpisodeEval {
    fis::EpisodeLog log;
    metrics::MetricReport report;
};

// Greedy FiS rollouts (or forced reference actions when `replay`) scored with
// the navigation metrics; episode-parallel, results in suite order.
std::vector<EpisodeEval> evaluate_suite(const policy::FisPolicy& model, const policy::ParamVector& params,
                                        const std::vector<env::Episode>& suite, const env::SceneLibrary& scenes,
                                        const RunConfig& cfg, bool replay, Exec exec);

metrics::Aggregate aggregate(const std::vector<EpisodeEval>& evals);

// ---- pipelines -----------------------------------------------------------------

// Supervised cold start from kept records; `nll` receives the per-epoch curve.
policy::ParamVector cold_start_navigation(const RunConfig& cfg, const Workspace& ws,
                                          const std::vector<cot::RawRecord>& records, std::uint64_t seed,
                                          std::vector<double>* nll = nullptr);
policy::ParamVector cold_start_trace(const RunConfig& cfg, const std::vector<cot::RawRecord>& records,
                                     std::uint64_t seed, std::vector<double>* nll = nullptr);

// Synthesizes the configured suite into `path` and loads the kept records.
std::vector<cot::RawRecord> synthesize_records(const RunConfig& cfg, const Workspace& ws,
                                               const std::filesystem::path& path, cot::SynthesisStats* stats = nullptr);

struct GridRow {
    bool format = false;
    bool understanding = false;
    bool navigation = false;
    double cold_sr = 0.0;
    double sr = 0.0;
    double spl = 0.0;
    std::vector<double> seed_sr;
};

// Every on/off combination of the three reward groups, rows ordered by the
// binary count (format, understanding, navigation) from all-off to all-on.
std::vector<GridRow> reward_grid(const RunConfig& cfg, const Workspace& ws,
                                 const std::vector<cot::RawRecord>& records);
std::string render_reward_grid(const std::vector<GridRow>& rows);
std::string reward_grid_csv(const std::vector<GridRow>& rows);

struct BetaRow {
    double beta = 0.0;
    double final_kl = 0.0;  // on a fixed probe drawn from the reference policy
    double mean_kl = 0.0;   // mean per-iteration KL over the second half of training
    double well_formed = 0.0;
};

// KL-penalty sweep on the trace-format task from one cold start; each row
// averages the replicate runs.
std::vector<BetaRow> beta_sweep(const RunConfig& cfg, const policy::ParamVector& trace_init);
std::string render_beta_table(const std::vector<BetaRow>& rows);
std::string beta_table_csv(const std::vector<BetaRow>& rows);

// ---- commands (each writes a manifest into run_dir) ------------------------------

cot::SynthesisStats cmd_synth(const RunConfig& cfg, const std::filesystem::path& run_dir);

struct ColdStartOutputs {
    std::filesystem::path nav_checkpoint;
    std::filesystem::path trace_checkpoint;
    double nav_nll = 0.0;
    double trace_nll = 0.0;
};
ColdStartOutputs cmd_coldstart(const RunConfig& cfg, const std::filesystem::path& dataset,
                               const std::filesystem::path& run_dir);

enum class TaskKind { Navigation, Trace };
grpo::TrainReport cmd_train(const RunConfig& cfg, const std::filesystem::path& init_checkpoint, TaskKind task,
                            const std::filesystem::path& run_dir);

// Returns the rendered metric table.
std::string cmd_eval(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                     const std::filesystem::path& suite, bool replay, const std::filesystem::path& run_dir);

struct AblationTables {
    std::vector<GridRow> grid;
    std::vector<BetaRow> beta;
    std::string grid_text;
    std::string beta_text;
};
AblationTables cmd_ablate(const RunConfig& cfg, const std::filesystem::path& run_dir);

// Serves until `max_seconds` elapses (runs forever when absent) or a stop signal arrives.
void cmd_serve(const RunConfig& cfg, const std::filesystem::path& checkpoint, const std::filesystem::path& run_dir,
               std::optional<double> max_seconds);

// Drives the suite through a server. With `local`, one in-process server per
// FiS mode is started on loopback; otherwise host/port come from the config.
// Returns the rendered latency table.
std::string cmd_client(const RunConfig& cfg, const std::optional<std::filesystem::path>& checkpoint,
                       const std::filesystem::path& suite, bool local, const std::filesystem::path& run_dir);

// Makes a running cmd_serve return; safe to call from a signal handler.
void request_stop();

// Collects the text tables found under `root` into one report.
std::string cmd_report(const std::filesystem::path& root);

}  // namespace navlab::cli
