#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/env.hpp"

namespace navlab::policy {

class ShapeMismatch : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct Block {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t offset = 0;
    std::size_t size() const { return rows * cols; }
    friend bool operator==(const Block&, const Block&) = default;
};

// Named, ordered parameter blocks over one flat vector.
class Layout {
public:
    Layout& add(std::string name, std::size_t rows, std::size_t cols);
    const Block& block(std::string_view name) const;
    const std::vector<Block>& blocks() const { return blocks_; }
    std::size_t size() const { return size_; }
    friend bool operator==(const Layout&, const Layout&) = default;

private:
    std::vector<Block> blocks_;
    std::size_t size_ = 0;
};

class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(Layout layout) : layout_(std::move(layout)), values_(layout_.size(), 0.0) {}
    ParamVector(Layout layout, std::vector<double> values);

    const Layout& layout() const { return layout_; }
    std::size_t size() const { return values_.size(); }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    std::span<double> block(std::string_view name);
    std::span<const double> block(std::string_view name) const;
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    // this += scale * direction
    void axpy(double scale, std::span<const double> direction);
    bool all_finite() const;

    friend bool operator==(const ParamVector&, const ParamVector&) = default;

private:
    Layout layout_;
    std::vector<double> values_;
};

// A parametric categorical distribution over `num_choices()` given a context vector.
class Model {
public:
    virtual ~Model() = default;
    virtual const Layout& layout() const = 0;
    virtual std::size_t context_width() const = 0;
    virtual std::size_t num_choices() const = 0;

    // Writes softmax probabilities into `probs` (size num_choices()).
    virtual void distribution(std::span<const double> params, std::span<const double> context,
                              std::span<double> probs) const = 0;

    // Accumulates scale * (d/dparams) Σ_k dlogits[k]·logit_k into `grad`.
    virtual void backprop_logits(std::span<const double> params, std::span<const double> context,
                                 std::span<const double> dlogits, double scale, std::span<double> grad) const = 0;

    // Model description stored in checkpoint headers.
    virtual nlohmann::json describe() const = 0;

    void check_shapes(std::span<const double> params, std::span<const double> context) const;
};

std::vector<double> action_distribution(const Model& model, std::span<const double> params,
                                        std::span<const double> context);

// log π(choice | context); adds scale·∇ log π into grad when grad is non-empty.
double log_prob_and_grad(const Model& model, std::span<const double> params, std::span<const double> context,
                         std::size_t choice, double scale, std::span<double> grad);

struct LogProbGrad {
    double logp = 0.0;
    ParamVector grad;
};
LogProbGrad log_prob_and_grad(const Model& model, const ParamVector& params, std::span<const double> context,
                              std::size_t choice);

// Two-layer tanh network with a softmax head.
class Mlp final : public Model {
public:
    Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs, std::string prefix = "");

    const Layout& layout() const override { return layout_; }
    std::size_t context_width() const override { return inputs_; }
    std::size_t num_choices() const override { return outputs_; }
    void distribution(std::span<const double> params, std::span<const double> context,
                      std::span<double> probs) const override;
    void backprop_logits(std::span<const double> params, std::span<const double> context,
                         std::span<const double> dlogits, double scale, std::span<double> grad) const override;
    nlohmann::json describe() const override;

    std::size_t hidden() const { return hidden_; }

    // `params` holds only this network's parameters. backward() also writes the
    // unscaled input sensitivity into `dinput` when it is non-empty.
    void forward(std::span<const double> params, std::span<const double> input, std::span<double> hidden,
                 std::span<double> probs) const;
    void backward(std::span<const double> params, std::span<const double> input, std::span<const double> hidden,
                  std::span<const double> dlogits, double scale, std::span<double> grad,
                  std::span<double> dinput) const;

private:
    std::size_t inputs_;
    std::size_t hidden_;
    std::size_t outputs_;
    Layout layout_;
    std::size_t w1_, b1_, w2_, b2_;
};

// ---- navigation features -------------------------------------------------

inline constexpr double kDistanceScale = 8.0;
inline constexpr std::size_t kInstructionWidth = 8;

// [rays/scale…, sin bearing, cos bearing, distance/scale, step fraction]
std::vector<double> observation_features(const env::Observation& obs);
std::size_t feature_width(int ray_count);

// Unit-norm hashed bag of words of the instruction.
std::vector<double> instruction_features(std::string_view instruction);

// [running mean of history ⊕ last entry ⊕ instruction features]; empty
// history yields zero slots of `feature_width`.
std::vector<double> slow_input(std::span<const std::vector<double>> history_features, std::size_t feature_width,
                               std::span<const double> instruction);

// Navigation policy with its slow aggregator: h = tanh(Ws·slow_input + bs),
// actions ~ softmax(MLP(features ⊕ h)). The context is features ⊕ slow_input.
// With the latent disabled h is held at zero (the fast-only variant).
class FisPolicy final : public Model {
public:
    FisPolicy(std::size_t feature_width, std::size_t latent_width = 16, std::size_t hidden = 32,
              bool latent_enabled = true);

    const Layout& layout() const override { return layout_; }
    std::size_t context_width() const override { return features_ + slow_inputs_; }
    std::size_t num_choices() const override { return env::kActionCount; }
    void distribution(std::span<const double> params, std::span<const double> context,
                      std::span<double> probs) const override;
    void backprop_logits(std::span<const double> params, std::span<const double> context,
                         std::span<const double> dlogits, double scale, std::span<double> grad) const override;
    nlohmann::json describe() const override;

    std::size_t feature_width() const { return features_; }
    std::size_t slow_input_width() const { return slow_inputs_; }
    std::size_t latent_width() const { return latent_; }
    bool latent_enabled() const { return latent_enabled_; }
    const Mlp& fast() const { return fast_; }

    std::vector<double> latent(std::span<const double> params, std::span<const double> slow_in) const;
    // Fast-network input for a given latent.
    std::vector<double> fast_input(std::span<const double> features, std::span<const double> h) const;

    FisPolicy with_latent(bool enabled) const;

private:
    std::size_t features_;
    std::size_t latent_;
    std::size_t slow_inputs_;
    bool latent_enabled_;
    Mlp fast_;
    Layout layout_;
    std::size_t slow_w_, slow_b_;
};

// ---- trace vocabulary ----------------------------------------------------

class Vocabulary {
public:
    static const Vocabulary& standard();

    std::size_t size() const { return tokens_.size(); }
    int eos() const { return 0; }
    std::string_view token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
    std::optional<int> id(std::string_view token) const;
    bool is_tag(int id) const;

    // Tags are concatenated; adjacent word tokens are joined by one space.
    std::string render(std::span<const int> ids) const;
    // Inverse of render for canonical traces; throws std::invalid_argument on unknown words.
    std::vector<int> encode(std::string_view text) const;

private:
    explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {}
    std::vector<std::string> tokens_;
};

inline constexpr std::size_t kTraceMaxLen = 24;

// Autoregressive token model: context = one-hot(previous token) ⊕ one-hot(position).
class TracePolicy final : public Model {
public:
    explicit TracePolicy(std::size_t vocab = Vocabulary::standard().size(), std::size_t max_len = kTraceMaxLen,
                         std::size_t hidden = 32);

    const Layout& layout() const override { return net_.layout(); }
    std::size_t context_width() const override { return vocab_ + max_len_; }
    std::size_t num_choices() const override { return vocab_; }
    void distribution(std::span<const double> params, std::span<const double> context,
                      std::span<double> probs) const override {
        net_.distribution(params, context, probs);
    }
    void backprop_logits(std::span<const double> params, std::span<const double> context,
                         std::span<const double> dlogits, double scale, std::span<double> grad) const override {
        net_.backprop_logits(params, context, dlogits, scale, grad);
    }
    nlohmann::json describe() const override;

    std::size_t max_len() const { return max_len_; }
    std::vector<double> context(int previous_token, std::size_t position) const;

private:
    std::size_t vocab_;
    std::size_t max_len_;
    Mlp net_;
};

// Gaussian init scaled by 1/sqrt(fan_in); the output layer gets `head_scale`.
ParamVector init_params(const Model& model, std::uint64_t seed, double head_scale = 0.1);

// ---- rollouts ------------------------------------------------------------

struct Rollout {
    std::size_t context_width = 0;
    std::vector<double> contexts;  // steps × context_width
    std::vector<int> choices;
    std::vector<double> log_probs;

    // navigation
    Trajectory trajectory;
    Vec2 final_position;
    std::vector<std::string> traces;
    std::vector<std::size_t> latent_steps;  // produced_at_step of the latent used at each step

    // trace
    std::vector<int> tokens;
    std::string text;

    std::size_t steps() const { return choices.size(); }
    std::span<const double> context(std::size_t t) const {
        return std::span<const double>(contexts).subspan(t * context_width, context_width);
    }
    double total_log_prob() const;

    friend bool operator==(const Rollout&, const Rollout&) = default;
};

// Categorical draw by inverse CDF with a uniform u in [0, 1).
std::size_t sample_categorical(std::span<const double> probs, double u);

// Per-step uniform for action sampling; a pure function of (seed, step).
double step_uniform(std::uint64_t seed, std::size_t step);

std::string render_step_trace(const env::Observation& obs, env::Action action, double forward_step);

// Single-system navigation rollout: slow aggregation before every action.
// Ends at STOP, on arrival within the success radius, or after max_steps.
Rollout sample_navigation_rollout(const FisPolicy& model, const ParamVector& params, const env::Episode& episode,
                                  const env::Scene& scene, std::uint64_t seed, std::size_t max_steps);

// Samples tokens until EOS; EOS is forced (without a log-prob) at max_len.
Rollout sample_trace_rollout(const TracePolicy& model, const ParamVector& params, std::uint64_t seed);

// Recomputes per-step log-probs of a stored rollout under `params`.
std::vector<double> evaluate_log_probs(const Model& model, const ParamVector& params, const Rollout& rollout);

// ---- supervised training -------------------------------------------------

struct Sequence {
    std::vector<double> contexts;  // steps × width
    std::vector<int> targets;
};

Sequence trace_sequence(const TracePolicy& model, std::span<const int> tokens);

struct SftResult {
    ParamVector params;
    double mean_nll = 0.0;  // before the step
};

// Mean over sequences of the summed token NLL, and its gradient.
double sequence_nll(const Model& model, const ParamVector& params, std::span<const Sequence> batch,
                    std::span<double> grad = {});

// One gradient-descent step; throws std::invalid_argument on an empty batch.
SftResult sft_step(const Model& model, const ParamVector& params, std::span<const Sequence> batch,
                   double learning_rate);

// ---- checkpoints ---------------------------------------------------------

// Byte layout: "NAVLABP1", u64 LE header length, UTF-8 JSON header, then
// float64 LE values in layout order.
void save_checkpoint(const std::filesystem::path& path, const Model& model, const ParamVector& params,
                     const nlohmann::json& extra = nlohmann::json::object());

struct Checkpoint {
    nlohmann::json header;
    ParamVector params;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Rebuilds the model described in a checkpoint header.
std::unique_ptr<Model> model_from_description(const nlohmann::json& description);

}  // namespace navlab::policy
