#include "navlab/grpo.hpp"

#include <algorithm>
#include <cmath>

#include "navlab/random.hpp"
#include "navlab/trace_format.hpp"

namespace navlab::grpo {

void GrpoConfig::validate() const {
    if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
    if (!(clip_eps > 0.0 && clip_eps < 1.0)) throw std::invalid_argument("clip_eps must lie in (0, 1)");
    if (!(kl_beta >= 0.0)) throw std::invalid_argument("kl_beta must be >= 0");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (!(degenerate_std_floor >= 0.0)) throw std::invalid_argument("degenerate_std_floor must be >= 0");
}

std::vector<double> compute_advantages(std::span<const double> rewards, double floor) {
    if (rewards.empty()) throw std::invalid_argument("advantages need at least one reward");
    const double n = static_cast<double>(rewards.size());
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= n;
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> out(rewards.size(), 0.0);
    if (sd < floor || sd == 0.0) return out;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / sd;
    return out;
}

void ContextSet::append(std::span<const double> rows) {
    if (width == 0 || rows.size() % width != 0) throw std::invalid_argument("context rows do not match width");
    data.insert(data.end(), rows.begin(), rows.end());
}

double kl_divergence(const policy::Model& model, std::span<const double> params, std::span<const double> ref,
                     const ContextSet& contexts, std::span<double> grad, double scale) {
    const std::size_t m = contexts.size();
    if (m == 0) throw std::invalid_argument("KL needs at least one context");
    const std::size_t k = model.num_choices();
    std::vector<double> p(k), q(k), dlogits(k);
    double total = 0.0;
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t c = 0; c < m; ++c) {
        const auto ctx = contexts.at(c);
        model.check_shapes(params, ctx);
        model.distribution(params, ctx, p);
        model.distribution(ref, ctx, q);
        double kl = 0.0;
        for (std::size_t a = 0; a < k; ++a) kl += p[a] * (std::log(p[a]) - std::log(q[a]));
        total += kl;
        if (!grad.empty()) {
            // dKL/dz_a = p_a (ℓ_a − KL), ℓ_a = ln p_a − ln q_a
            for (std::size_t a = 0; a < k; ++a) dlogits[a] = p[a] * (std::log(p[a]) - std::log(q[a]) - kl);
            model.backprop_logits(params, ctx, dlogits, scale * inv, grad);
        }
    }
    return std::max(0.0, total * inv);
}

double kl_divergence(const policy::Model& model, const policy::ParamVector& params, const policy::ParamVector& ref,
                     const ContextSet& contexts) {
    return kl_divergence(model, params.values(), ref.values(), contexts);
}

ContextSet CandidateGroup::probe_contexts() const {
    ContextSet set;
    for (const policy::Rollout& r : rollouts) {
        if (set.width == 0) set.width = r.context_width;
        if (!r.contexts.empty()) set.append(r.contexts);
    }
    return set;
}

Objective grpo_objective_and_grad(const policy::Model& model, const policy::ParamVector& params,
                                  const policy::ParamVector& old_params, const policy::ParamVector& ref_params,
                                  const CandidateGroup& group, const GrpoConfig& cfg) {
    const std::size_t g = group.size();
    if (g < 2) throw DegenerateGroup("GRPO update needs at least two candidates");
    if (group.advantages.size() != g || group.old_log_probs.size() != g) {
        throw std::invalid_argument("group advantages/log-probs do not match its candidates");
    }
    (void)old_params;  // old-policy log-probs are stored on the group
    Objective out;
    out.grad.assign(params.size(), 0.0);
    const double inv_g = 1.0 / static_cast<double>(g);
    std::vector<double> seq_grad(params.size());

    for (std::size_t i = 0; i < g; ++i) {
        const policy::Rollout& r = group.rollouts[i];
        if (group.old_log_probs[i].size() != r.steps()) throw std::invalid_argument("stored log-probs length mismatch");
        std::fill(seq_grad.begin(), seq_grad.end(), 0.0);
        double logp = 0.0, old_logp = 0.0;
        for (std::size_t t = 0; t < r.steps(); ++t) {
            logp += policy::log_prob_and_grad(model, params.values(), r.context(t),
                                              static_cast<std::size_t>(r.choices[t]), 1.0, seq_grad);
            old_logp += group.old_log_probs[i][t];
        }
        const double rho = std::exp(logp - old_logp);
        const double a = group.advantages[i];
        const double unclipped = rho * a;
        const double clipped = std::clamp(rho, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps) * a;
        if (clipped < unclipped) {
            out.surrogate += clipped * inv_g;
            ++out.clipped;
        } else {
            out.surrogate += unclipped * inv_g;
            const double coef = a * rho * inv_g;
            if (coef != 0.0) {
                for (std::size_t j = 0; j < seq_grad.size(); ++j) out.grad[j] += coef * seq_grad[j];
            }
        }
    }

    const ContextSet probes = group.probe_contexts();
    if (probes.size() > 0) {
        out.kl = kl_divergence(model, params.values(), ref_params.values(), probes, out.grad, -cfg.kl_beta);
    }
    out.value = out.surrogate - cfg.kl_beta * out.kl;
    return out;
}

Objective batch_objective_and_grad(const policy::Model& model, const policy::ParamVector& params,
                                   const policy::ParamVector& old_params, const policy::ParamVector& ref_params,
                                   std::span<const CandidateGroup> groups, const GrpoConfig& cfg, Exec exec) {
    std::vector<Objective> parts(groups.size());
    for_each_index(exec, groups.size(), [&](std::size_t i) {
        parts[i] = grpo_objective_and_grad(model, params, old_params, ref_params, groups[i], cfg);
    });
    Objective total;
    total.grad.assign(params.size(), 0.0);
    for (const Objective& o : parts) {
        total.value += o.value;
        total.surrogate += o.surrogate;
        total.kl += o.kl;
        total.clipped += o.clipped;
        for (std::size_t j = 0; j < o.grad.size(); ++j) total.grad[j] += o.grad[j];
    }
    return total;
}

// ---- tasks -------------------------------------------------------------------

NavigationTask::NavigationTask(const policy::FisPolicy& model, std::vector<env::Episode> episodes,
                               env::SceneLibrary scenes, rewards::RewardConfig reward_cfg, fis::FisConfig fis_cfg,
                               std::size_t budget, std::vector<env::Episode> heldout,
                               std::shared_ptr<const rewards::SemanticScorer> scorer)
    : model_(fis::policy_for(model, fis_cfg)),
      episodes_(std::move(episodes)),
      heldout_(std::move(heldout)),
      scenes_(std::move(scenes)),
      reward_cfg_(std::move(reward_cfg)),
      fis_cfg_(fis_cfg),
      budget_(budget),
      scorer_(scorer ? std::move(scorer) : std::make_shared<rewards::LexicalScorer>()) {
    if (episodes_.empty()) throw std::invalid_argument("navigation task needs at least one episode");
    reward_cfg_.validate();
    fis_cfg_.validate();
    for (const env::Episode& e : episodes_) env::validate_episode(e, scenes_.get(e.scene_id));
    for (const env::Episode& e : heldout_) env::validate_episode(e, scenes_.get(e.scene_id));
}

policy::Rollout NavigationTask::sample(const policy::ParamVector& params, std::size_t prompt,
                                       std::uint64_t seed) const {
    const env::Episode& e = episodes_.at(prompt);
    return fis::run_episode(model_, params, e, scenes_.get(e.scene_id), fis_cfg_, budget_, seed).rollout;
}

rewards::RewardBreakdown NavigationTask::score(const policy::Rollout& rollout, std::size_t prompt) const {
    const env::Episode& e = episodes_.at(prompt);
    rewards::Candidate c{rollout.traces, rollout.trajectory, rollout.final_position};
    return rewards::total_reward(c, e, scenes_.get(e.scene_id), reward_cfg_, *scorer_);
}

double NavigationTask::evaluate(const policy::ParamVector& params, Exec exec) const {
    const std::vector<env::Episode>& suite = heldout_.empty() ? episodes_ : heldout_;
    std::vector<int> success(suite.size(), 0);
    fis::RunOptions options;
    options.greedy = true;
    for_each_index(exec, suite.size(), [&](std::size_t i) {
        const env::Episode& e = suite[i];
        const fis::EpisodeLog log =
            fis::run_episode(model_, params, e, scenes_.get(e.scene_id), fis_cfg_, budget_, 0, options);
        success[i] = distance(log.final_position, e.goal) < e.success_radius ? 1 : 0;
    });
    double sum = 0.0;
    for (int s : success) sum += s;
    return sum / static_cast<double>(suite.size());
}

TraceFormatTask::TraceFormatTask(const policy::TracePolicy& model, std::size_t prompts_per_iteration,
                                 std::size_t eval_samples, std::uint64_t eval_seed)
    : model_(model), prompts_(prompts_per_iteration), eval_samples_(eval_samples), eval_seed_(eval_seed) {
    if (prompts_ == 0 || eval_samples_ == 0) throw std::invalid_argument("trace task sizes must be positive");
}

policy::Rollout TraceFormatTask::sample(const policy::ParamVector& params, std::size_t, std::uint64_t seed) const {
    return policy::sample_trace_rollout(model_, params, seed);
}

rewards::RewardBreakdown TraceFormatTask::score(const policy::Rollout& rollout, std::size_t) const {
    rewards::RewardBreakdown b;
    b.format = trace::format_reward(rollout.text);
    b.total = *b.format;
    return b;
}

double TraceFormatTask::evaluate(const policy::ParamVector& params, Exec exec) const {
    std::vector<double> ok(eval_samples_, 0.0);
    for_each_index(exec, eval_samples_, [&](std::size_t i) {
        const policy::Rollout r = policy::sample_trace_rollout(model_, params, mix_seed(eval_seed_, {i}));
        ok[i] = trace::format_reward(r.text);
    });
    double sum = 0.0;
    for (double v : ok) sum += v;
    return sum / static_cast<double>(eval_samples_);
}

// ---- training ----------------------------------------------------------------

std::uint64_t candidate_seed(std::uint64_t seed, std::size_t iteration, std::string_view prompt_id,
                             std::size_t candidate) {
    return mix_seed(seed, {iteration, fnv1a64(prompt_id), candidate});
}

std::vector<CandidateGroup> sample_groups(const Task& task, const policy::ParamVector& params,
                                          const GrpoConfig& cfg, std::size_t iteration, Exec exec) {
    const std::size_t prompts = task.prompt_count();
    const std::size_t n = cfg.group_size;
    std::vector<CandidateGroup> groups(prompts);
    for (std::size_t p = 0; p < prompts; ++p) {
        groups[p].prompt_id = task.prompt_id(p);
        groups[p].rollouts.resize(n);
        groups[p].breakdowns.resize(n);
    }
    for_each_index(exec, prompts * n, [&](std::size_t job) {
        const std::size_t p = job / n;
        const std::size_t i = job % n;
        CandidateGroup& g = groups[p];
        g.rollouts[i] = task.sample(params, p, candidate_seed(cfg.seed, iteration, g.prompt_id, i));
        g.breakdowns[i] = task.score(g.rollouts[i], p);
    });
    for (CandidateGroup& g : groups) {
        g.rewards.resize(n);
        g.old_log_probs.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            g.rewards[i] = g.breakdowns[i].total;
            g.old_log_probs[i] = g.rollouts[i].log_probs;
        }
        g.advantages = compute_advantages(g.rewards, cfg.degenerate_std_floor);
    }
    return groups;
}

nlohmann::json IterationRow::to_json() const {
    nlohmann::json j = {{"iteration", iteration},   {"mean_reward", mean_reward},
                        {"mean_kl", mean_kl},       {"surrogate", surrogate},
                        {"objective", objective},   {"degenerate_groups", degenerate_groups}};
    j["heldout"] = heldout ? nlohmann::json(*heldout) : nlohmann::json(nullptr);
    return j;
}

TrainReport train(const GrpoConfig& cfg, const Task& task, const policy::ParamVector& init,
                  const std::function<void(const IterationRow&)>& on_row) {
    cfg.validate();
    if (task.prompt_count() == 0) throw std::invalid_argument("training suite is empty");
    const policy::Model& model = task.model();
    if (init.layout() != model.layout()) throw policy::ShapeMismatch("initial parameters do not match the model");

    const policy::ParamVector ref = init;
    policy::ParamVector params = init;
    TrainReport report;

    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const policy::ParamVector old = params;
        const std::vector<CandidateGroup> groups = sample_groups(task, old, cfg, it, cfg.exec);
        const Objective obj = batch_objective_and_grad(model, params, old, ref, groups, cfg, cfg.exec);
        params.axpy(cfg.learning_rate, obj.grad);
        if (!params.all_finite()) throw std::runtime_error("parameters became non-finite during training");

        IterationRow row;
        row.iteration = it;
        double reward_sum = 0.0;
        std::size_t count = 0;
        for (const CandidateGroup& g : groups) {
            for (double r : g.rewards) reward_sum += r;
            count += g.size();
            if (std::all_of(g.advantages.begin(), g.advantages.end(), [](double a) { return a == 0.0; })) {
                ++row.degenerate_groups;
            }
        }
        row.mean_reward = reward_sum / static_cast<double>(count);
        row.mean_kl = obj.kl / static_cast<double>(groups.size());
        row.surrogate = obj.surrogate;
        row.objective = obj.value;
        if (cfg.eval_every > 0 && ((it + 1) % cfg.eval_every == 0 || it + 1 == cfg.iterations)) {
            row.heldout = task.evaluate(params, cfg.exec);
        }
        if (on_row) on_row(row);
        report.rows.push_back(row);
    }
    report.final_params = params;
    return report;
}

}  // namespace navlab::grpo
