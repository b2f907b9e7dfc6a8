#include "navlab/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "navlab/metrics.hpp"
#include "navlab/random.hpp"

namespace navlab::rewards {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\n\r\f\v");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\n\r\f\v");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<double> hashed_counts(std::string_view text, std::size_t dims) {
    std::vector<double> v(dims, 0.0);
    for (const std::string& tok : tokenize_words(text)) v[fnv1a64(tok) % dims] += 1.0;
    return v;
}

}  // namespace

std::string_view group_name(RewardGroup g) {
    switch (g) {
        case RewardGroup::Format: return "format";
        case RewardGroup::Understanding: return "understanding";
        case RewardGroup::Navigation: return "navigation";
    }
    return "";
}

std::optional<RewardGroup> parse_group(std::string_view name) {
    for (RewardGroup g : {RewardGroup::Format, RewardGroup::Understanding, RewardGroup::Navigation}) {
        if (group_name(g) == name) return g;
    }
    return std::nullopt;
}

std::string_view path_metric_name(PathMetric m) { return m == PathMetric::Frechet ? "frechet" : "dtw"; }

std::optional<PathMetric> parse_path_metric(std::string_view name) {
    if (name == "frechet") return PathMetric::Frechet;
    if (name == "dtw") return PathMetric::Dtw;
    return std::nullopt;
}

void RewardConfig::validate() const {
    if (!(k_path > 0.0) || !(k_end > 0.0)) throw std::invalid_argument("reward decay coefficients must be positive");
}

std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

double LexicalScorer::score(std::string_view context, std::string_view answer) const {
    const std::vector<double> a = hashed_counts(context, dims_);
    const std::vector<double> b = hashed_counts(answer, dims_);
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < dims_; ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return std::clamp(ab / std::sqrt(aa * bb), 0.0, 1.0);
}

std::string normalize_answer(std::string_view s) {
    std::string out;
    bool pending_space = false;
    for (char c : trim(s)) {
        const auto u = static_cast<unsigned char>(c);
        if (std::isspace(u)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(u)));
    }
    return out;
}

double answer_reward(std::string_view predicted, std::string_view ground_truth) {
    return normalize_answer(predicted) == normalize_answer(ground_truth) ? 1.0 : 0.0;
}

double semantic_reward(const SemanticScorer& scorer, std::string_view context, std::string_view answer) {
    return std::clamp(scorer.score(context, answer), 0.0, 1.0);
}

std::string scene_context(const env::Scene& scene) {
    std::string out;
    for (const env::Landmark& lm : scene.landmarks) {
        if (!out.empty()) out.push_back(' ');
        out += lm.description;
    }
    return out;
}

UnderstandingScore understanding_reward(const trace::ParsedTrace& parsed, const env::Episode& episode,
                                        const env::Scene& scene, const SemanticScorer& scorer) {
    if (parsed.kind != trace::DecisionKind::Answer) {
        throw WrongDecisionKind("episode " + episode.id + ": expected an answer, got an action");
    }
    UnderstandingScore s;
    s.ans = answer_reward(parsed.decision, episode.ground_truth_answer.value_or(""));
    s.sem = semantic_reward(scorer, scene_context(scene), parsed.decision);
    s.sum = s.ans + s.sem;
    return s;
}

double trajectory_distance(const Trajectory& pred, const Trajectory& ref, PathMetric metric) {
    return metric == PathMetric::Frechet ? metrics::discrete_frechet(pred, ref) : metrics::dtw(pred, ref);
}

double path_reward(const Trajectory& pred, const Trajectory& ref, const RewardConfig& cfg) {
    return std::exp(-cfg.k_path * trajectory_distance(pred, ref, cfg.path_metric));
}

double endpoint_reward(Vec2 final_position, Vec2 goal, const RewardConfig& cfg) {
    return std::exp(-cfg.k_end * squared_norm(goal - final_position));
}

RewardBreakdown total_reward(const Candidate& candidate, const env::Episode& episode, const env::Scene& scene,
                             const RewardConfig& cfg, const SemanticScorer& scorer) {
    RewardBreakdown b;
    const bool navigation = episode.task_kind == env::TaskKind::Navigation;

    bool well_formed = !candidate.traces.empty();
    for (const std::string& raw : candidate.traces) {
        if (!well_formed) break;
        auto parsed = trace::try_parse(raw);
        if (!parsed.trace) {
            well_formed = false;
        } else if (navigation) {
            // Action names are validated here rather than in the parser.
            well_formed = parsed.trace->kind == trace::DecisionKind::Action &&
                          env::parse_action(trim(parsed.trace->decision)).has_value();
        }
    }
    b.format = well_formed ? 1.0 : 0.0;
    if (cfg.is_enabled(RewardGroup::Format)) b.total += *b.format;

    if (navigation) {
        b.path = path_reward(candidate.trajectory, episode.reference_trajectory, cfg);
        b.end = endpoint_reward(candidate.final_position, episode.goal, cfg);
        if (cfg.is_enabled(RewardGroup::Navigation)) b.total += *b.path + *b.end;
    } else {
        UnderstandingScore u;
        if (!candidate.traces.empty()) {
            auto parsed = trace::try_parse(candidate.traces.back(), trace::ParseMode::Lenient);
            if (parsed.trace) u = understanding_reward(*parsed.trace, episode, scene, scorer);
        }
        b.ans = u.ans;
        b.sem = u.sem;
        if (cfg.is_enabled(RewardGroup::Understanding)) b.total += u.sum;
    }
    return b;
}

}  // namespace navlab::rewards
