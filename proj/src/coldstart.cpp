#include "navlab/coldstart.hpp"

#include <map>
#include <stdexcept>

#include "navlab/trace_format.hpp"

namespace navlab::coldstart {

std::vector<policy::Sequence> navigation_sequences(const policy::FisPolicy& model,
                                                   std::span<const cot::RawRecord> records,
                                                   std::span<const env::Episode> suite,
                                                   const env::SceneLibrary& scenes, const fis::FisConfig& cfg,
                                                   std::size_t budget) {
    std::map<std::string, std::vector<const cot::RawRecord*>> by_episode;
    for (const cot::RawRecord& r : records) {
        if (r.trace) by_episode[r.episode_id].push_back(&r);
    }
    const policy::FisPolicy m = fis::policy_for(model, cfg);
    const policy::ParamVector zero(m.layout(), std::vector<double>(m.layout().size(), 0.0));
    std::vector<policy::Sequence> out;
    for (const env::Episode& e : suite) {
        auto it = by_episode.find(e.id);
        if (it == by_episode.end()) continue;
        const env::Scene& scene = scenes.get(e.scene_id);
        const std::vector<env::Action> reference = env::actions_for_path(scene, e.start, e.reference_trajectory);
        fis::RunOptions options;
        options.forced_actions = reference;
        options.stop_on_arrival = false;
        const fis::EpisodeLog log =
            fis::run_episode(m, zero, e, scene, cfg, std::max(budget, reference.size()), 0, options);
        policy::Sequence seq;
        for (const cot::RawRecord* r : it->second) {
            if (r->step_index >= log.rollout.steps()) throw std::invalid_argument("record step beyond the reference");
            const trace::ParsedTrace parsed = trace::parse_trace(*r->trace);
            const auto action = env::parse_action(parsed.decision);
            if (!action) throw std::invalid_argument("kept record without a known action");
            const auto ctx = log.rollout.context(r->step_index);
            seq.contexts.insert(seq.contexts.end(), ctx.begin(), ctx.end());
            seq.targets.push_back(static_cast<int>(*action));
        }
        out.push_back(std::move(seq));
    }
    return out;
}

std::vector<policy::Sequence> trace_sequences(const policy::TracePolicy& model,
                                              std::span<const cot::RawRecord> records) {
    const policy::Vocabulary& vocab = policy::Vocabulary::standard();
    std::vector<policy::Sequence> out;
    for (const cot::RawRecord& r : records) {
        if (!r.trace) continue;
        const std::vector<int> tokens = vocab.encode(*r.trace);
        if (tokens.size() + 1 > model.max_len()) continue;
        out.push_back(policy::trace_sequence(model, tokens));
    }
    return out;
}

SftRun supervised_train(const policy::Model& model, policy::ParamVector init,
                        std::span<const policy::Sequence> batch, std::size_t epochs, double learning_rate) {
    SftRun run{std::move(init), {}};
    for (std::size_t k = 0; k < epochs; ++k) {
        policy::SftResult r = policy::sft_step(model, run.params, batch, learning_rate);
        run.nll.push_back(r.mean_nll);
        run.params = std::move(r.params);
    }
    return run;
}

}  // namespace navlab::coldstart
