#include "navlab/policy.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "navlab/random.hpp"
#include "navlab/rewards.hpp"
#include "navlab/trace_format.hpp"

namespace navlab::policy {

namespace {

void softmax_in_place(std::span<double> v) {
    const double m = *std::max_element(v.begin(), v.end());
    double sum = 0.0;
    for (double& x : v) {
        x = std::exp(x - m);
        sum += x;
    }
    for (double& x : v) x /= sum;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeMismatch(what);
}

std::uint64_t to_le(std::uint64_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
    return v;
}

}  // namespace

// ---- Layout / ParamVector -------------------------------------------------

Layout& Layout::add(std::string name, std::size_t rows, std::size_t cols) {
    for (const Block& b : blocks_) {
        if (b.name == name) throw std::invalid_argument("duplicate parameter block: " + name);
    }
    blocks_.push_back(Block{std::move(name), rows, cols, size_});
    size_ += rows * cols;
    return *this;
}

const Block& Layout::block(std::string_view name) const {
    for (const Block& b : blocks_) {
        if (b.name == name) return b;
    }
    throw std::out_of_range("no parameter block named " + std::string(name));
}

ParamVector::ParamVector(Layout layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    require(values_.size() == layout_.size(), "parameter count does not match layout");
}

std::span<double> ParamVector::block(std::string_view name) {
    const Block& b = layout_.block(name);
    return std::span<double>(values_).subspan(b.offset, b.size());
}

std::span<const double> ParamVector::block(std::string_view name) const {
    const Block& b = layout_.block(name);
    return std::span<const double>(values_).subspan(b.offset, b.size());
}

void ParamVector::axpy(double scale, std::span<const double> direction) {
    require(direction.size() == values_.size(), "direction size does not match parameters");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * direction[i];
}

bool ParamVector::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
}

// ---- Model helpers ---------------------------------------------------------

void Model::check_shapes(std::span<const double> params, std::span<const double> context) const {
    require(params.size() == layout().size(), "expected " + std::to_string(layout().size()) + " parameters, got " +
                                                  std::to_string(params.size()));
    require(context.size() == context_width(), "expected context width " + std::to_string(context_width()) +
                                                   ", got " + std::to_string(context.size()));
}

std::vector<double> action_distribution(const Model& model, std::span<const double> params,
                                        std::span<const double> context) {
    model.check_shapes(params, context);
    std::vector<double> probs(model.num_choices());
    model.distribution(params, context, probs);
    return probs;
}

double log_prob_and_grad(const Model& model, std::span<const double> params, std::span<const double> context,
                         std::size_t choice, double scale, std::span<double> grad) {
    model.check_shapes(params, context);
    if (choice >= model.num_choices()) throw std::out_of_range("choice index out of range");
    std::vector<double> probs(model.num_choices());
    model.distribution(params, context, probs);
    const double logp = std::log(probs[choice]);
    if (!grad.empty()) {
        require(grad.size() == params.size(), "gradient buffer size mismatch");
        // d log softmax_c / d logit_k = [k == c] - p_k
        for (double& p : probs) p = -p;
        probs[choice] += 1.0;
        model.backprop_logits(params, context, probs, scale, grad);
    }
    return logp;
}

LogProbGrad log_prob_and_grad(const Model& model, const ParamVector& params, std::span<const double> context,
                              std::size_t choice) {
    LogProbGrad out{0.0, ParamVector(params.layout())};
    out.logp = log_prob_and_grad(model, params.values(), context, choice, 1.0, out.grad.values());
    return out;
}

// ---- Mlp ----------------------------------------------------------------

Mlp::Mlp(std::size_t inputs, std::size_t hidden, std::size_t outputs, std::string prefix)
    : inputs_(inputs), hidden_(hidden), outputs_(outputs) {
    if (inputs == 0 || hidden == 0 || outputs == 0) throw std::invalid_argument("network dimensions must be positive");
    layout_.add(prefix + "w1", hidden, inputs)
        .add(prefix + "b1", hidden, 1)
        .add(prefix + "w2", outputs, hidden)
        .add(prefix + "b2", outputs, 1);
    w1_ = layout_.blocks()[0].offset;
    b1_ = layout_.blocks()[1].offset;
    w2_ = layout_.blocks()[2].offset;
    b2_ = layout_.blocks()[3].offset;
}

void Mlp::forward(std::span<const double> params, std::span<const double> input, std::span<double> hidden,
                  std::span<double> probs) const {
    const double* w1 = params.data() + w1_;
    const double* b1 = params.data() + b1_;
    const double* w2 = params.data() + w2_;
    const double* b2 = params.data() + b2_;
    for (std::size_t j = 0; j < hidden_; ++j) {
        double z = b1[j];
        const double* row = w1 + j * inputs_;
        for (std::size_t i = 0; i < inputs_; ++i) z += row[i] * input[i];
        hidden[j] = std::tanh(z);
    }
    for (std::size_t k = 0; k < outputs_; ++k) {
        double z = b2[k];
        const double* row = w2 + k * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) z += row[j] * hidden[j];
        probs[k] = z;
    }
    softmax_in_place(probs);
}

void Mlp::backward(std::span<const double> params, std::span<const double> input, std::span<const double> hidden,
                   std::span<const double> dlogits, double scale, std::span<double> grad,
                   std::span<double> dinput) const {
    const double* w1 = params.data() + w1_;
    const double* w2 = params.data() + w2_;
    double* gw1 = grad.data() + w1_;
    double* gb1 = grad.data() + b1_;
    double* gw2 = grad.data() + w2_;
    double* gb2 = grad.data() + b2_;

    std::vector<double> dz(hidden_, 0.0);
    for (std::size_t k = 0; k < outputs_; ++k) {
        const double d = dlogits[k];
        if (d == 0.0) continue;
        gb2[k] += scale * d;
        const double* row = w2 + k * hidden_;
        double* grow = gw2 + k * hidden_;
        for (std::size_t j = 0; j < hidden_; ++j) {
            grow[j] += scale * d * hidden[j];
            dz[j] += d * row[j];
        }
    }
    for (std::size_t j = 0; j < hidden_; ++j) dz[j] *= 1.0 - hidden[j] * hidden[j];
    if (!dinput.empty()) std::fill(dinput.begin(), dinput.end(), 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
        const double d = dz[j];
        gb1[j] += scale * d;
        const double* row = w1 + j * inputs_;
        double* grow = gw1 + j * inputs_;
        for (std::size_t i = 0; i < inputs_; ++i) {
            grow[i] += scale * d * input[i];
            if (!dinput.empty()) dinput[i] += d * row[i];
        }
    }
}

void Mlp::distribution(std::span<const double> params, std::span<const double> context,
                       std::span<double> probs) const {
    std::vector<double> hidden(hidden_);
    forward(params, context, hidden, probs);
}

void Mlp::backprop_logits(std::span<const double> params, std::span<const double> context,
                          std::span<const double> dlogits, double scale, std::span<double> grad) const {
    std::vector<double> hidden(hidden_);
    std::vector<double> probs(outputs_);
    forward(params, context, hidden, probs);
    backward(params, context, hidden, dlogits, scale, grad, {});
}

nlohmann::json Mlp::describe() const {
    return {{"kind", "mlp"}, {"inputs", inputs_}, {"hidden", hidden_}, {"outputs", outputs_}};
}

// ---- features ------------------------------------------------------------

std::vector<double> observation_features(const env::Observation& obs) {
    std::vector<double> f;
    f.reserve(obs.depth_rays.size() + 4);
    for (double r : obs.depth_rays) f.push_back(r / kDistanceScale);
    f.push_back(std::sin(obs.goal_bearing));
    f.push_back(std::cos(obs.goal_bearing));
    f.push_back(obs.goal_distance / kDistanceScale);
    f.push_back(obs.step_fraction);
    return f;
}

std::size_t feature_width(int ray_count) { return static_cast<std::size_t>(ray_count) + 4; }

std::vector<double> instruction_features(std::string_view instruction) {
    std::vector<double> v(kInstructionWidth, 0.0);
    for (const std::string& tok : rewards::tokenize_words(instruction)) v[fnv1a64(tok) % kInstructionWidth] += 1.0;
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (double& x : v) x /= norm;
    }
    return v;
}

std::vector<double> slow_input(std::span<const std::vector<double>> history_features, std::size_t width,
                               std::span<const double> instruction) {
    std::vector<double> mean(width, 0.0);
    for (const std::vector<double>& f : history_features) {
        require(f.size() == width, "history entries must share one width");
        for (std::size_t i = 0; i < width; ++i) mean[i] += f[i];
    }
    if (!history_features.empty()) {
        for (double& x : mean) x /= static_cast<double>(history_features.size());
    }
    std::vector<double> out = mean;
    if (history_features.empty()) {
        out.insert(out.end(), mean.begin(), mean.end());
    } else {
        out.insert(out.end(), history_features.back().begin(), history_features.back().end());
    }
    out.insert(out.end(), instruction.begin(), instruction.end());
    return out;
}

// ---- FisPolicy -----------------------------------------------------------

FisPolicy::FisPolicy(std::size_t feature_width, std::size_t latent_width, std::size_t hidden, bool latent_enabled)
    : features_(feature_width),
      latent_(latent_width),
      slow_inputs_(2 * feature_width + kInstructionWidth),
      latent_enabled_(latent_enabled),
      fast_(feature_width + latent_width, hidden, env::kActionCount, "fast.") {
    if (feature_width == 0 || latent_width == 0) throw std::invalid_argument("widths must be positive");
    layout_ = fast_.layout();
    layout_.add("slow.w", latent_, slow_inputs_).add("slow.b", latent_, 1);
    slow_w_ = layout_.block("slow.w").offset;
    slow_b_ = layout_.block("slow.b").offset;
}

std::vector<double> FisPolicy::latent(std::span<const double> params, std::span<const double> slow_in) const {
    require(params.size() == layout_.size(), "parameter count does not match layout");
    require(slow_in.size() == slow_inputs_, "slow input width mismatch");
    std::vector<double> h(latent_, 0.0);
    if (!latent_enabled_) return h;
    const double* w = params.data() + slow_w_;
    const double* b = params.data() + slow_b_;
    for (std::size_t l = 0; l < latent_; ++l) {
        double z = b[l];
        const double* row = w + l * slow_inputs_;
        for (std::size_t i = 0; i < slow_inputs_; ++i) z += row[i] * slow_in[i];
        h[l] = std::tanh(z);
    }
    return h;
}

std::vector<double> FisPolicy::fast_input(std::span<const double> features, std::span<const double> h) const {
    std::vector<double> x(features.begin(), features.end());
    x.insert(x.end(), h.begin(), h.end());
    return x;
}

void FisPolicy::distribution(std::span<const double> params, std::span<const double> context,
                             std::span<double> probs) const {
    const auto features = context.first(features_);
    const std::vector<double> h = latent(params, context.subspan(features_));
    const std::vector<double> x = fast_input(features, h);
    std::vector<double> hidden(fast_.hidden());
    fast_.forward(params.first(fast_.layout().size()), x, hidden, probs);
}

void FisPolicy::backprop_logits(std::span<const double> params, std::span<const double> context,
                                std::span<const double> dlogits, double scale, std::span<double> grad) const {
    const auto features = context.first(features_);
    const auto slow_in = context.subspan(features_);
    const std::vector<double> h = latent(params, slow_in);
    const std::vector<double> x = fast_input(features, h);
    std::vector<double> hidden(fast_.hidden());
    std::vector<double> probs(env::kActionCount);
    const std::size_t fast_size = fast_.layout().size();
    fast_.forward(params.first(fast_size), x, hidden, probs);
    std::vector<double> dx(x.size());
    fast_.backward(params.first(fast_size), x, hidden, dlogits, scale, grad.first(fast_size), dx);
    if (!latent_enabled_) return;
    double* gw = grad.data() + slow_w_;
    double* gb = grad.data() + slow_b_;
    for (std::size_t l = 0; l < latent_; ++l) {
        const double dz = dx[features_ + l] * (1.0 - h[l] * h[l]);
        if (dz == 0.0) continue;
        gb[l] += scale * dz;
        double* row = gw + l * slow_inputs_;
        for (std::size_t i = 0; i < slow_inputs_; ++i) row[i] += scale * dz * slow_in[i];
    }
}

nlohmann::json FisPolicy::describe() const {
    return {{"kind", "fis"},
            {"feature_width", features_},
            {"latent_width", latent_},
            {"hidden", fast_.hidden()},
            {"latent_enabled", latent_enabled_}};
}

FisPolicy FisPolicy::with_latent(bool enabled) const {
    return FisPolicy(features_, latent_, fast_.hidden(), enabled);
}

// ---- Vocabulary / TracePolicy ----------------------------------------------

const Vocabulary& Vocabulary::standard() {
    static const Vocabulary vocab({
        "<eos>",     "<think>", "</think>", "<action>", "</action>", "<answer>", "</answer>", "FORWARD",
        "TURN_LEFT", "TURN_RIGHT", "STOP",  "goal",     "ahead",     "left",     "right",     "near",
        "far",       "path",    "clear",    "wall",     "so",        "go",       "turn",      "stop",
    });
    return vocab;
}

std::optional<int> Vocabulary::id(std::string_view token) const {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i] == token) return static_cast<int>(i);
    }
    return std::nullopt;
}

bool Vocabulary::is_tag(int id) const {
    const std::string_view t = token(id);
    return t.size() > 2 && t.front() == '<' && t.back() == '>';
}

std::string Vocabulary::render(std::span<const int> ids) const {
    std::string out;
    bool prev_word = false;
    for (int id : ids) {
        if (id == eos()) break;
        const bool word = !is_tag(id);
        if (word && prev_word) out.push_back(' ');
        out += token(id);
        prev_word = word;
    }
    return out;
}

std::vector<int> Vocabulary::encode(std::string_view text) const {
    std::vector<int> ids;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        std::size_t end;
        if (c == '<') {
            end = text.find('>', i);
            if (end == std::string_view::npos) throw std::invalid_argument("unterminated tag in trace");
            ++end;
        } else {
            end = text.find_first_of(" \t\n\r<", i);
            if (end == std::string_view::npos) end = text.size();
        }
        const std::string_view piece = text.substr(i, end - i);
        const auto found = id(piece);
        if (!found || *found == eos()) throw std::invalid_argument("token outside vocabulary: " + std::string(piece));
        ids.push_back(*found);
        i = end;
    }
    return ids;
}

TracePolicy::TracePolicy(std::size_t vocab, std::size_t max_len, std::size_t hidden)
    : vocab_(vocab), max_len_(max_len), net_(vocab + max_len, hidden, vocab) {
    if (max_len == 0) throw std::invalid_argument("max_len must be positive");
}

nlohmann::json TracePolicy::describe() const {
    return {{"kind", "trace"}, {"vocab", vocab_}, {"max_len", max_len_}, {"hidden", net_.hidden()}};
}

std::vector<double> TracePolicy::context(int previous_token, std::size_t position) const {
    if (previous_token < 0 || static_cast<std::size_t>(previous_token) >= vocab_) {
        throw std::out_of_range("token id out of range");
    }
    if (position >= max_len_) throw std::out_of_range("position beyond max_len");
    std::vector<double> c(vocab_ + max_len_, 0.0);
    c[static_cast<std::size_t>(previous_token)] = 1.0;
    c[vocab_ + position] = 1.0;
    return c;
}

// ---- init ------------------------------------------------------------------

ParamVector init_params(const Model& model, std::uint64_t seed, double head_scale) {
    ParamVector p(model.layout());
    SplitMixStream rng(mix_seed(seed, {fnv1a64("init")}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (const Block& b : model.layout().blocks()) {
        const auto dot = b.name.rfind('.');
        const std::string_view leaf = dot == std::string::npos ? std::string_view(b.name)
                                                               : std::string_view(b.name).substr(dot + 1);
        if (leaf.starts_with('b')) continue;
        const double scale = (b.name.ends_with("w2") ? head_scale : 1.0) / std::sqrt(static_cast<double>(b.cols));
        auto block = p.block(b.name);
        for (double& x : block) x = scale * normal(rng);
    }
    return p;
}

// ---- rollouts --------------------------------------------------------------

double Rollout::total_log_prob() const {
    double s = 0.0;
    for (double lp : log_probs) s += lp;
    return s;
}

std::size_t sample_categorical(std::span<const double> probs, double u) {
    double cum = 0.0;
    for (std::size_t k = 0; k < probs.size(); ++k) {
        cum += probs[k];
        if (u < cum) return k;
    }
    return probs.size() - 1;
}

double step_uniform(std::uint64_t seed, std::size_t step) { return uniform_at(seed, {fnv1a64("step"), step}); }

std::string render_step_trace(const env::Observation& obs, env::Action action, double forward_step) {
    std::string think = env::narrate(obs, forward_step);
    think += ' ';
    think += env::narrate_decision(action);
    return trace::serialize(think, trace::DecisionKind::Action, env::action_name(action));
}

Rollout sample_navigation_rollout(const FisPolicy& model, const ParamVector& params, const env::Episode& episode,
                                  const env::Scene& scene, std::uint64_t seed, std::size_t max_steps) {
    require(model.feature_width() == feature_width(scene.ray_count), "policy feature width does not match scene");
    Rollout r;
    r.context_width = model.context_width();
    env::Pose pose = episode.start;
    r.trajectory.points.push_back(pose.position);
    const std::vector<double> instr = instruction_features(episode.instruction);
    std::vector<std::vector<double>> history;
    std::vector<double> probs(env::kActionCount);

    for (std::size_t t = 0; t < max_steps; ++t) {
        const env::Observation obs = env::observe(pose, scene, episode.goal, t, max_steps);
        std::vector<double> features = observation_features(obs);
        const std::vector<double> slow_in = slow_input(history, model.feature_width(), instr);
        history.push_back(features);
        std::vector<double> ctx = std::move(features);
        ctx.insert(ctx.end(), slow_in.begin(), slow_in.end());

        model.distribution(params.values(), ctx, probs);
        const std::size_t a = sample_categorical(probs, step_uniform(seed, t));
        const auto action = static_cast<env::Action>(a);
        r.contexts.insert(r.contexts.end(), ctx.begin(), ctx.end());
        r.choices.push_back(static_cast<int>(a));
        r.log_probs.push_back(std::log(probs[a]));
        r.latent_steps.push_back(t);
        r.traces.push_back(render_step_trace(obs, action, scene.kinematics.forward_step));

        const env::StepResult res = env::step(pose, action, scene);
        if (res.new_pose.position != pose.position) r.trajectory.points.push_back(res.new_pose.position);
        pose = res.new_pose;
        if (res.terminated) break;
        if (distance(pose.position, episode.goal) < episode.success_radius) break;
    }
    r.final_position = pose.position;
    return r;
}

Rollout sample_trace_rollout(const TracePolicy& model, const ParamVector& params, std::uint64_t seed) {
    Rollout r;
    r.context_width = model.context_width();
    std::vector<double> probs(model.num_choices());
    int prev = Vocabulary::standard().eos();
    for (std::size_t pos = 0; pos < model.max_len(); ++pos) {
        const std::vector<double> ctx = model.context(prev, pos);
        model.distribution(params.values(), ctx, probs);
        const std::size_t tok = sample_categorical(probs, step_uniform(seed, pos));
        r.contexts.insert(r.contexts.end(), ctx.begin(), ctx.end());
        r.choices.push_back(static_cast<int>(tok));
        r.log_probs.push_back(std::log(probs[tok]));
        if (static_cast<int>(tok) == Vocabulary::standard().eos()) break;
        r.tokens.push_back(static_cast<int>(tok));
        prev = static_cast<int>(tok);
    }
    r.text = Vocabulary::standard().render(r.tokens);
    return r;
}

std::vector<double> evaluate_log_probs(const Model& model, const ParamVector& params, const Rollout& rollout) {
    std::vector<double> out(rollout.steps());
    std::vector<double> probs(model.num_choices());
    for (std::size_t t = 0; t < rollout.steps(); ++t) {
        model.distribution(params.values(), rollout.context(t), probs);
        out[t] = std::log(probs[static_cast<std::size_t>(rollout.choices[t])]);
    }
    return out;
}

// ---- supervised ----------------------------------------------------------

Sequence trace_sequence(const TracePolicy& model, std::span<const int> tokens) {
    if (tokens.size() + 1 > model.max_len()) throw std::invalid_argument("trace longer than the model's max_len");
    Sequence s;
    int prev = Vocabulary::standard().eos();
    for (std::size_t pos = 0; pos <= tokens.size(); ++pos) {
        const std::vector<double> ctx = model.context(prev, pos);
        s.contexts.insert(s.contexts.end(), ctx.begin(), ctx.end());
        const int target = pos < tokens.size() ? tokens[pos] : Vocabulary::standard().eos();
        s.targets.push_back(target);
        prev = target;
    }
    return s;
}

double sequence_nll(const Model& model, const ParamVector& params, std::span<const Sequence> batch,
                    std::span<double> grad) {
    if (batch.empty()) throw std::invalid_argument("empty batch");
    const double inv = 1.0 / static_cast<double>(batch.size());
    const std::size_t width = model.context_width();
    double total = 0.0;
    for (const Sequence& s : batch) {
        require(s.contexts.size() == s.targets.size() * width, "sequence contexts do not match targets");
        for (std::size_t t = 0; t < s.targets.size(); ++t) {
            const auto ctx = std::span<const double>(s.contexts).subspan(t * width, width);
            total -= log_prob_and_grad(model, params.values(), ctx, static_cast<std::size_t>(s.targets[t]), -inv,
                                       grad);
        }
    }
    return total * inv;
}

SftResult sft_step(const Model& model, const ParamVector& params, std::span<const Sequence> batch,
                   double learning_rate) {
    std::vector<double> grad(params.size(), 0.0);
    SftResult out{params, sequence_nll(model, params, batch, grad)};
    out.params.axpy(-learning_rate, grad);
    return out;
}

// ---- checkpoints -----------------------------------------------------------

namespace {
constexpr char kMagic[8] = {'N', 'A', 'V', 'L', 'A', 'B', 'P', '1'};
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const ParamVector& params,
                     const nlohmann::json& extra) {
    require(params.layout() == model.layout(), "parameters do not match the model layout");
    nlohmann::json header = {{"model", model.describe()}, {"count", params.size()}, {"extra", extra}};
    nlohmann::json blocks = nlohmann::json::array();
    for (const Block& b : params.layout().blocks()) {
        blocks.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    }
    header["blocks"] = blocks;
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    const std::uint64_t len = to_le(text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (double v : params.values()) {
        const std::uint64_t bits = to_le(std::bit_cast<std::uint64_t>(v));
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path.string());
    }
    std::uint64_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    len = to_le(len);
    if (!in || len > (1u << 24)) throw std::runtime_error("corrupt checkpoint header length");
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) throw std::runtime_error("truncated checkpoint header");

    Checkpoint ck;
    ck.header = nlohmann::json::parse(text);
    Layout layout;
    for (const auto& b : ck.header.at("blocks")) {
        layout.add(b.at("name").get<std::string>(), b.at("rows").get<std::size_t>(), b.at("cols").get<std::size_t>());
    }
    if (layout.size() != ck.header.at("count").get<std::size_t>()) {
        throw std::runtime_error("checkpoint header count disagrees with its blocks");
    }
    std::vector<double> values(layout.size());
    for (double& v : values) {
        std::uint64_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), sizeof bits);
        if (!in) throw std::runtime_error("truncated checkpoint values");
        v = std::bit_cast<double>(to_le(bits));
    }
    ck.params = ParamVector(std::move(layout), std::move(values));
    return ck;
}

std::unique_ptr<Model> model_from_description(const nlohmann::json& d) {
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "fis") {
        return std::make_unique<FisPolicy>(d.at("feature_width").get<std::size_t>(),
                                           d.at("latent_width").get<std::size_t>(), d.at("hidden").get<std::size_t>(),
                                           d.value("latent_enabled", true));
    }
    if (kind == "trace") {
        return std::make_unique<TracePolicy>(d.at("vocab").get<std::size_t>(), d.at("max_len").get<std::size_t>(),
                                             d.at("hidden").get<std::size_t>());
    }
    if (kind == "mlp") {
        return std::make_unique<Mlp>(d.at("inputs").get<std::size_t>(), d.at("hidden").get<std::size_t>(),
                                     d.at("outputs").get<std::size_t>());
    }
    throw std::invalid_argument("unknown model kind: " + kind);
}

}  // namespace navlab::policy
