#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/fis.hpp"
#include "navlab/parallel.hpp"
#include "navlab/policy.hpp"
#include "navlab/rewards.hpp"
#include "navlab/scene_io.hpp"

namespace navlab::grpo {

class DegenerateGroup : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct GrpoConfig {
    std::size_t group_size = 8;
    double clip_eps = 0.2;
    double kl_beta = 0.02;
    double learning_rate = 1e-2;
    std::size_t iterations = 100;
    double degenerate_std_floor = 1e-8;
    std::uint64_t seed = 0;
    std::size_t eval_every = 1;  // 0 disables held-out evaluation
    Exec exec = Exec::Parallel;

    void validate() const;  // throws std::invalid_argument
};

// (r_i − mean) / population std; all zeros when std < floor.
std::vector<double> compute_advantages(std::span<const double> rewards, double floor = 1e-8);

// Flat list of equal-width context vectors.
struct ContextSet {
    std::size_t width = 0;
    std::vector<double> data;

    std::size_t size() const { return width == 0 ? 0 : data.size() / width; }
    std::span<const double> at(std::size_t i) const {
        return std::span<const double>(data).subspan(i * width, width);
    }
    void append(std::span<const double> rows);
};

// Mean over contexts of KL(π_params ‖ π_ref). When `grad` is non-empty adds
// scale·∇_params of that mean. Throws std::invalid_argument on an empty set.
double kl_divergence(const policy::Model& model, std::span<const double> params, std::span<const double> ref,
                     const ContextSet& contexts, std::span<double> grad = {}, double scale = 1.0);
double kl_divergence(const policy::Model& model, const policy::ParamVector& params,
                     const policy::ParamVector& ref, const ContextSet& contexts);

struct CandidateGroup {
    std::string prompt_id;
    std::vector<policy::Rollout> rollouts;
    std::vector<double> rewards;
    std::vector<rewards::RewardBreakdown> breakdowns;
    std::vector<double> advantages;
    std::vector<std::vector<double>> old_log_probs;  // per candidate, per step

    std::size_t size() const { return rollouts.size(); }
    // Every context visited by the group's rollouts.
    ContextSet probe_contexts() const;
};

struct Objective {
    double value = 0.0;
    double surrogate = 0.0;
    double kl = 0.0;
    std::size_t clipped = 0;  // candidates on the clipped branch
    std::vector<double> grad;
};

// value = (1/G) Σ_i min(ρ_i Â_i, clip(ρ_i, 1−ε, 1+ε) Â_i) − β·KL over the
// group's visited contexts, with ρ_i the sequence-level probability ratio.
Objective grpo_objective_and_grad(const policy::Model& model, const policy::ParamVector& params,
                                  const policy::ParamVector& old_params, const policy::ParamVector& ref_params,
                                  const CandidateGroup& group, const GrpoConfig& cfg);

// Sum of per-group objectives; groups are evaluated under `exec` and reduced in order.
Objective batch_objective_and_grad(const policy::Model& model, const policy::ParamVector& params,
                                   const policy::ParamVector& old_params, const policy::ParamVector& ref_params,
                                   std::span<const CandidateGroup> groups, const GrpoConfig& cfg, Exec exec);

// A source of prompts, rollouts and rewards for GRPO.
class Task {
public:
    virtual ~Task() = default;
    virtual const policy::Model& model() const = 0;
    virtual std::size_t prompt_count() const = 0;
    virtual std::string prompt_id(std::size_t prompt) const = 0;
    virtual policy::Rollout sample(const policy::ParamVector& params, std::size_t prompt,
                                   std::uint64_t seed) const = 0;
    virtual rewards::RewardBreakdown score(const policy::Rollout& rollout, std::size_t prompt) const = 0;
    // Held-out quality in [0, 1] (success rate or well-formed rate).
    virtual double evaluate(const policy::ParamVector& params, Exec exec) const = 0;
};

// Navigation episodes rolled out through the dual-rate controller.
class NavigationTask final : public Task {
public:
    NavigationTask(const policy::FisPolicy& model, std::vector<env::Episode> episodes, env::SceneLibrary scenes,
                   rewards::RewardConfig reward_cfg, fis::FisConfig fis_cfg, std::size_t budget,
                   std::vector<env::Episode> heldout = {},
                   std::shared_ptr<const rewards::SemanticScorer> scorer = nullptr);

    const policy::Model& model() const override { return model_; }
    std::size_t prompt_count() const override { return episodes_.size(); }
    std::string prompt_id(std::size_t prompt) const override { return episodes_.at(prompt).id; }
    policy::Rollout sample(const policy::ParamVector& params, std::size_t prompt,
                           std::uint64_t seed) const override;
    rewards::RewardBreakdown score(const policy::Rollout& rollout, std::size_t prompt) const override;
    // Greedy success rate on the held-out suite (the training suite when none was given).
    double evaluate(const policy::ParamVector& params, Exec exec) const override;

    const fis::FisConfig& fis_config() const { return fis_cfg_; }

private:
    policy::FisPolicy model_;
    std::vector<env::Episode> episodes_;
    std::vector<env::Episode> heldout_;
    env::SceneLibrary scenes_;
    rewards::RewardConfig reward_cfg_;
    fis::FisConfig fis_cfg_;
    std::size_t budget_;
    std::shared_ptr<const rewards::SemanticScorer> scorer_;
};

// Free-running trace generation scored by the format reward alone.
class TraceFormatTask final : public Task {
public:
    explicit TraceFormatTask(const policy::TracePolicy& model, std::size_t prompts_per_iteration = 4,
                             std::size_t eval_samples = 200, std::uint64_t eval_seed = 7);

    const policy::Model& model() const override { return model_; }
    std::size_t prompt_count() const override { return prompts_; }
    std::string prompt_id(std::size_t prompt) const override { return "trace-" + std::to_string(prompt); }
    policy::Rollout sample(const policy::ParamVector& params, std::size_t prompt,
                           std::uint64_t seed) const override;
    rewards::RewardBreakdown score(const policy::Rollout& rollout, std::size_t prompt) const override;
    // Fraction of `eval_samples` fixed-seed samples that are well formed.
    double evaluate(const policy::ParamVector& params, Exec exec) const override;

private:
    policy::TracePolicy model_;
    std::size_t prompts_;
    std::size_t eval_samples_;
    std::uint64_t eval_seed_;
};

std::uint64_t candidate_seed(std::uint64_t seed, std::size_t iteration, std::string_view prompt_id,
                             std::size_t candidate);

// Samples and scores one group per prompt with old-policy log-probs recorded.
std::vector<CandidateGroup> sample_groups(const Task& task, const policy::ParamVector& params,
                                          const GrpoConfig& cfg, std::size_t iteration, Exec exec);

struct IterationRow {
    std::size_t iteration = 0;
    double mean_reward = 0.0;
    double mean_kl = 0.0;
    double surrogate = 0.0;
    double objective = 0.0;
    std::size_t degenerate_groups = 0;
    std::optional<double> heldout;  // metric after the update

    nlohmann::json to_json() const;
};

struct TrainReport {
    std::vector<IterationRow> rows;
    policy::ParamVector final_params;
    std::optional<std::string> checkpoint;
};

// θ_ref is frozen at `init`; θ_old is refreshed every iteration and one
// ascent step is taken on the summed group objective.
TrainReport train(const GrpoConfig& cfg, const Task& task, const policy::ParamVector& init,
                  const std::function<void(const IterationRow&)>& on_row = {});

}  // namespace navlab::grpo
