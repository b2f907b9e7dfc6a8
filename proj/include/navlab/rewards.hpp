#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "navlab/env.hpp"
#include "navlab/trace_format.hpp"

namespace navlab::rewards {

enum class RewardGroup { Format, Understanding, Navigation };
enum class PathMetric { Frechet, Dtw };

std::string_view group_name(RewardGroup g);
std::optional<RewardGroup> parse_group(std::string_view name);
std::string_view path_metric_name(PathMetric m);
std::optional<PathMetric> parse_path_metric(std::string_view name);

struct RewardConfig {
    double k_path = 1.0;
    double k_end = 1.0;
    PathMetric path_metric = PathMetric::Frechet;
    std::set<RewardGroup> enabled = {RewardGroup::Format, RewardGroup::Understanding,
                                     RewardGroup::Navigation};

    bool is_enabled(RewardGroup g) const { return enabled.count(g) != 0; }
    void validate() const;  // throws std::invalid_argument
};

// Image-text alignment stand-in. Implementations must be deterministic and
// return values in [0, 1].
class SemanticScorer {
public:
    virtual ~SemanticScorer() = default;
    virtual double score(std::string_view context, std::string_view answer) const = 0;
};

// Cosine similarity of hashed bag-of-words count vectors.
class LexicalScorer final : public SemanticScorer {
public:
    explicit LexicalScorer(std::size_t dims = 256) : dims_(dims) {}
    double score(std::string_view context, std::string_view answer) const override;

private:
    std::size_t dims_;
};

class WrongDecisionKind : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Lower-case alphanumeric tokens.
std::vector<std::string> tokenize_words(std::string_view text);

// Trim, collapse internal whitespace, ASCII case-fold.
std::string normalize_answer(std::string_view s);

double answer_reward(std::string_view predicted, std::string_view ground_truth);
double semantic_reward(const SemanticScorer& scorer, std::string_view context, std::string_view answer);

// Concatenated landmark descriptions of a scene.
std::string scene_context(const env::Scene& scene);

struct UnderstandingScore {
    double ans = 0.0;
    double sem = 0.0;
    double sum = 0.0;
};

// Throws WrongDecisionKind when `parsed` carries an action.
UnderstandingScore understanding_reward(const trace::ParsedTrace& parsed, const env::Episode& episode,
                                        const env::Scene& scene, const SemanticScorer& scorer);

double trajectory_distance(const Trajectory& pred, const Trajectory& ref, PathMetric metric);
double path_reward(const Trajectory& pred, const Trajectory& ref, const RewardConfig& cfg);
double endpoint_reward(Vec2 final_position, Vec2 goal, const RewardConfig& cfg);

struct Candidate {
    std::vector<std::string> traces;  // one raw response per decision
    Trajectory trajectory;
    Vec2 final_position;
};

// Components inactive for the task are absent. `total` sums the present
// components whose group is enabled.
struct RewardBreakdown {
    std::optional<double> format;
    std::optional<double> ans;
    std::optional<double> sem;
    std::optional<double> path;
    std::optional<double> end;
    double total = 0.0;

    friend bool operator==(const RewardBreakdown&, const RewardBreakdown&) = default;
};

RewardBreakdown total_reward(const Candidate& candidate, const env::Episode& episode, const env::Scene& scene,
                             const RewardConfig& cfg, const SemanticScorer& scorer);

}  // namespace navlab::rewards
