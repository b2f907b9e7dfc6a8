#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/env.hpp"
#include "navlab/policy.hpp"

namespace navlab::fis {

enum class Mode {
    Dual,      // slow every n steps, fast every step
    SlowOnly,  // n = 1, every step is charged at slow cost
    FastOnly,  // latent frozen at zero, no slow invocations
};

std::string_view mode_name(Mode m);
std::optional<Mode> parse_mode(std::string_view name);

struct FisConfig {
    std::size_t n = 3;
    std::size_t H = 3;
    std::size_t latent_width = 16;
    double slow_cost = 10.0;
    double fast_cost = 1.0;
    bool open_loop = false;  // chunk actions all conditioned on the chunk's first observation
    Mode mode = Mode::Dual;

    void validate() const;  // throws std::invalid_argument
    std::size_t effective_n() const { return mode == Mode::SlowOnly ? 1 : n; }
};

struct LatentGuidance {
    std::vector<double> h;
    std::size_t produced_at_step = 0;
    std::vector<double> slow_input;  // aggregator input that produced h
};

// The model variant a mode runs (fast-only disables the latent).
policy::FisPolicy policy_for(const policy::FisPolicy& model, const FisConfig& cfg);

LatentGuidance slow_update(const policy::FisPolicy& model, const policy::ParamVector& params,
                           std::span<const std::vector<double>> history_features,
                           std::span<const double> instruction, std::size_t step);
LatentGuidance slow_update(const policy::FisPolicy& model, const policy::ParamVector& params,
                           std::span<const env::Observation> history, std::span<const double> instruction,
                           std::size_t step);

struct FastDecision {
    env::Action action = env::Action::Stop;
    double log_prob = 0.0;
    std::vector<double> context;  // features ⊕ latent's slow input
};

// One fast-system action at fast step `step`: the forced action if given, else
// the most probable action when `greedy`, else a seeded sample.
FastDecision fast_step(const policy::FisPolicy& model, const policy::ParamVector& params,
                       std::span<const double> features, const LatentGuidance& latent, std::uint64_t seed,
                       std::size_t step, std::optional<env::Action> forced = std::nullopt, bool greedy = false);

struct ChunkState {
    const env::Scene* scene = nullptr;
    const env::Episode* episode = nullptr;
    env::Pose pose;
    std::size_t step = 0;  // fast-step index of the next action
    std::size_t budget = 0;
};

// Up to H closed-loop actions under a fixed latent; stops early after STOP.
// Advances `state` past the executed actions.
std::vector<env::Action> fast_chunk(const policy::FisPolicy& model, const policy::ParamVector& params,
                                    const LatentGuidance& latent, ChunkState& state, std::size_t H,
                                    std::uint64_t seed);

enum class Ending { Stop, Arrival, Budget, ForcedExhausted };
std::string_view ending_name(Ending e);

struct StepLog {
    std::size_t step = 0;
    std::string obs_digest;
    std::size_t latent_step = 0;
    env::Action action = env::Action::Stop;
    bool collided = false;
};

struct EpisodeLog {
    std::string episode_id;
    std::vector<StepLog> steps;
    std::vector<std::size_t> slow_steps;
    double total_cost = 0.0;
    Trajectory trajectory;
    Vec2 final_position;
    Ending ending = Ending::Budget;
    policy::Rollout rollout;

    std::size_t executed() const { return steps.size(); }
};

struct RunOptions {
    std::optional<std::vector<env::Action>> forced_actions;
    bool stop_on_arrival = true;
    bool greedy = false;
};

// Slow updates at fast steps 0, n, 2n, …; every fast step reads the latest
// completed latent. Ends at STOP, arrival (unless disabled), or budget.
EpisodeLog run_episode(const policy::FisPolicy& model, const policy::ParamVector& params,
                       const env::Episode& episode, const env::Scene& scene, const FisConfig& cfg,
                       std::size_t budget, std::uint64_t seed, const RunOptions& options = {});

// Incremental controller for one remote session. Each observation yields an
// open-loop chunk of at most H actions that never crosses a slow boundary, so
// one latent covers the whole chunk.
class Controller {
public:
    Controller(const policy::FisPolicy& model, policy::ParamVector params, FisConfig cfg,
               std::string_view instruction, std::uint64_t seed, bool greedy = false);

    struct Chunk {
        std::vector<env::Action> actions;  // empty once the episode has stopped
        std::size_t latent_step = 0;
    };

    // `step` is the fast-step index of the first action; callers keep it increasing.
    Chunk on_observation(const env::Observation& obs, std::size_t step);
    bool stopped() const { return stopped_; }
    const std::vector<std::size_t>& slow_steps() const { return slow_steps_; }

private:
    policy::FisPolicy model_;
    policy::ParamVector params_;
    FisConfig cfg_;
    std::vector<double> instruction_;
    std::uint64_t seed_;
    bool greedy_;
    std::vector<std::vector<double>> history_;
    LatentGuidance latent_;
    std::optional<std::size_t> last_step_;
    std::vector<std::size_t> slow_steps_;
    bool stopped_ = false;
};

// Hex FNV digest of an observation's feature bytes.
std::string observation_digest(std::span<const double> features);

nlohmann::json to_json(const EpisodeLog& log);

}  // namespace navlab::fis
