#include "navlab/fis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <stdexcept>

#include "navlab/random.hpp"
#include "navlab/scene_io.hpp"

namespace navlab::fis {

std::string_view mode_name(Mode m) {
    switch (m) {
        case Mode::Dual: return "dual";
        case Mode::SlowOnly: return "slow_only";
        case Mode::FastOnly: return "fast_only";
    }
    return "";
}

std::optional<Mode> parse_mode(std::string_view name) {
    for (Mode m : {Mode::Dual, Mode::SlowOnly, Mode::FastOnly}) {
        if (mode_name(m) == name) return m;
    }
    return std::nullopt;
}

void FisConfig::validate() const {
    if (n < 1) throw std::invalid_argument("frequency ratio n must be >= 1");
    if (H < 1) throw std::invalid_argument("chunk length H must be >= 1");
    if (latent_width < 1) throw std::invalid_argument("latent width must be >= 1");
    if (!(slow_cost >= 0.0) || !(fast_cost >= 0.0)) throw std::invalid_argument("costs must be non-negative");
}

std::string_view ending_name(Ending e) {
    switch (e) {
        case Ending::Stop: return "stop";
        case Ending::Arrival: return "arrival";
        case Ending::Budget: return "budget";
        case Ending::ForcedExhausted: return "forced_exhausted";
    }
    return "";
}

policy::FisPolicy policy_for(const policy::FisPolicy& model, const FisConfig& cfg) {
    return model.with_latent(cfg.mode != Mode::FastOnly && model.latent_enabled());
}

LatentGuidance slow_update(const policy::FisPolicy& model, const policy::ParamVector& params,
                           std::span<const std::vector<double>> history_features,
                           std::span<const double> instruction, std::size_t step) {
    if (instruction.size() != policy::kInstructionWidth) throw policy::ShapeMismatch("instruction feature width");
    LatentGuidance g;
    g.slow_input = policy::slow_input(history_features, model.feature_width(), instruction);
    g.h = model.latent(params.values(), g.slow_input);
    g.produced_at_step = step;
    return g;
}

LatentGuidance slow_update(const policy::FisPolicy& model, const policy::ParamVector& params,
                           std::span<const env::Observation> history, std::span<const double> instruction,
                           std::size_t step) {
    std::vector<std::vector<double>> features;
    features.reserve(history.size());
    for (const env::Observation& o : history) {
        features.push_back(policy::observation_features(o));
        if (features.back().size() != model.feature_width()) throw policy::ShapeMismatch("observation width");
    }
    return slow_update(model, params, features, instruction, step);
}

FastDecision fast_step(const policy::FisPolicy& model, const policy::ParamVector& params,
                       std::span<const double> features, const LatentGuidance& latent, std::uint64_t seed,
                       std::size_t step, std::optional<env::Action> forced, bool greedy) {
    FastDecision d;
    d.context.assign(features.begin(), features.end());
    d.context.insert(d.context.end(), latent.slow_input.begin(), latent.slow_input.end());
    const std::vector<double> probs = policy::action_distribution(model, params.values(), d.context);
    std::size_t a;
    if (forced) {
        a = static_cast<std::size_t>(*forced);
    } else if (greedy) {
        a = static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    } else {
        a = policy::sample_categorical(probs, policy::step_uniform(seed, step));
    }
    d.action = static_cast<env::Action>(a);
    d.log_prob = std::log(probs[a]);
    return d;
}

std::vector<env::Action> fast_chunk(const policy::FisPolicy& model, const policy::ParamVector& params,
                                    const LatentGuidance& latent, ChunkState& state, std::size_t H,
                                    std::uint64_t seed) {
    if (state.scene == nullptr || state.episode == nullptr) throw std::invalid_argument("chunk state is unbound");
    std::vector<env::Action> actions;
    for (std::size_t k = 0; k < H; ++k) {
        const env::Observation obs =
            env::observe(state.pose, *state.scene, state.episode->goal, state.step, state.budget);
        const std::vector<double> features = policy::observation_features(obs);
        const FastDecision d = fast_step(model, params, features, latent, seed, state.step);
        actions.push_back(d.action);
        state.pose = env::step(state.pose, d.action, *state.scene).new_pose;
        ++state.step;
        if (d.action == env::Action::Stop) break;
    }
    return actions;
}

std::string observation_digest(std::span<const double> features) {
    std::string bytes(features.size() * sizeof(double), '\0');
    if (!features.empty()) std::memcpy(bytes.data(), features.data(), bytes.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

EpisodeLog run_episode(const policy::FisPolicy& base_model, const policy::ParamVector& params,
                       const env::Episode& episode, const env::Scene& scene, const FisConfig& cfg,
                       std::size_t budget, std::uint64_t seed, const RunOptions& options) {
    cfg.validate();
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    const policy::FisPolicy model = policy_for(base_model, cfg);
    if (model.feature_width() != policy::feature_width(scene.ray_count)) {
        throw policy::ShapeMismatch("policy feature width does not match scene");
    }
    const std::size_t n = cfg.effective_n();
    const bool slow_enabled = cfg.mode != Mode::FastOnly;
    const std::vector<double> instr = policy::instruction_features(episode.instruction);

    EpisodeLog log;
    log.episode_id = episode.id;
    log.rollout.context_width = model.context_width();
    env::Pose pose = episode.start;
    log.trajectory.points.push_back(pose.position);

    std::vector<std::vector<double>> history;  // observations the controller has seen
    LatentGuidance latent = slow_update(model, params, history, instr, 0);
    bool have_latent = false;
    std::vector<double> chunk_features;
    env::Observation chunk_obs;
    std::size_t chunk_start = 0;
    log.ending = Ending::Budget;

    for (std::size_t t = 0; t < budget; ++t) {
        if (options.forced_actions && t >= options.forced_actions->size()) {
            log.ending = Ending::ForcedExhausted;
            break;
        }
        const bool new_chunk = t == 0 || t - chunk_start >= cfg.H;
        if (new_chunk) chunk_start = t;

        env::Observation obs;
        std::vector<double> features;
        if (!cfg.open_loop || new_chunk) {
            obs = env::observe(pose, scene, episode.goal, t, budget);
            features = policy::observation_features(obs);
            if (cfg.open_loop) {
                chunk_obs = obs;
                chunk_features = features;
            }
        } else {
            obs = chunk_obs;
            features = chunk_features;
        }

        if (slow_enabled && t % n == 0) {
            latent = slow_update(model, params, history, instr, t);
            log.slow_steps.push_back(t);
            have_latent = true;
        }
        if (!cfg.open_loop || new_chunk) history.push_back(features);

        std::optional<env::Action> forced;
        if (options.forced_actions) forced = (*options.forced_actions)[t];
        const FastDecision d = fast_step(model, params, features, latent, seed, t, forced, options.greedy);

        const env::StepResult res = env::step(pose, d.action, scene);
        StepLog s;
        s.step = t;
        s.obs_digest = observation_digest(features);
        s.latent_step = have_latent ? latent.produced_at_step : 0;
        s.action = d.action;
        s.collided = res.collided;
        log.steps.push_back(std::move(s));

        log.rollout.contexts.insert(log.rollout.contexts.end(), d.context.begin(), d.context.end());
        log.rollout.choices.push_back(static_cast<int>(d.action));
        log.rollout.log_probs.push_back(d.log_prob);
        log.rollout.latent_steps.push_back(log.steps.back().latent_step);
        log.rollout.traces.push_back(policy::render_step_trace(obs, d.action, scene.kinematics.forward_step));

        if (res.new_pose.position != pose.position) log.trajectory.points.push_back(res.new_pose.position);
        pose = res.new_pose;
        if (res.terminated) {
            log.ending = Ending::Stop;
            break;
        }
        if (options.stop_on_arrival && distance(pose.position, episode.goal) < episode.success_radius) {
            log.ending = Ending::Arrival;
            break;
        }
    }

    const double steps = static_cast<double>(log.steps.size());
    const double slow_calls = static_cast<double>(log.slow_steps.size());
    const double fast_unit = cfg.mode == Mode::SlowOnly ? cfg.slow_cost : cfg.fast_cost;
    log.total_cost = cfg.slow_cost * slow_calls + fast_unit * steps;
    log.final_position = pose.position;
    log.rollout.trajectory = log.trajectory;
    log.rollout.final_position = pose.position;
    return log;
}

Controller::Controller(const policy::FisPolicy& model, policy::ParamVector params, FisConfig cfg,
                       std::string_view instruction, std::uint64_t seed, bool greedy)
    : model_(policy_for(model, cfg)),
      params_(std::move(params)),
      cfg_(cfg),
      instruction_(policy::instruction_features(instruction)),
      seed_(seed),
      greedy_(greedy) {
    cfg_.validate();
    if (params_.layout() != model_.layout()) throw policy::ShapeMismatch("parameters do not match the controller");
    latent_ = slow_update(model_, params_, history_, instruction_, 0);
}

Controller::Chunk Controller::on_observation(const env::Observation& obs, std::size_t step) {
    Chunk chunk;
    const std::size_t n = cfg_.effective_n();
    if (stopped_) {
        chunk.latent_step = latent_.produced_at_step;
        return chunk;
    }
    const std::vector<double> features = policy::observation_features(obs);
    if (features.size() != model_.feature_width()) throw policy::ShapeMismatch("observation width");

    const bool boundary = !last_step_ || step / n != *last_step_ / n || step % n == 0;
    if (cfg_.mode != Mode::FastOnly && boundary) {
        latent_ = slow_update(model_, params_, history_, instruction_, step);
        slow_steps_.push_back(step);
    }
    history_.push_back(features);
    last_step_ = step;

    const std::size_t length = std::min(cfg_.H, n - step % n);
    for (std::size_t k = 0; k < length; ++k) {
        const FastDecision d = fast_step(model_, params_, features, latent_, seed_, step + k, std::nullopt, greedy_);
        chunk.actions.push_back(d.action);
        if (d.action == env::Action::Stop) {
            stopped_ = true;
            break;
        }
    }
    chunk.latent_step = latent_.produced_at_step;
    return chunk;
}

nlohmann::json to_json(const EpisodeLog& log) {
    nlohmann::json steps = nlohmann::json::array();
    for (const StepLog& s : log.steps) {
        steps.push_back({{"step", s.step},
                         {"obs_digest", s.obs_digest},
                         {"latent_step", s.latent_step},
                         {"action", env::action_name(s.action)},
                         {"collided", s.collided}});
    }
    return {{"episode_id", log.episode_id},
            {"steps", steps},
            {"slow_steps", log.slow_steps},
            {"total_cost", log.total_cost},
            {"trajectory", log.trajectory},
            {"final_position", log.final_position},
            {"ending", ending_name(log.ending)}};
}

}  // namespace navlab::fis
