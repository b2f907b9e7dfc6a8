#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "navlab/env.hpp"
#include "navlab/parallel.hpp"
#include "navlab/scene_io.hpp"

namespace navlab::cot {

struct PromptBundle {
    std::string instruction;
    std::string observation_rendering;
    std::vector<std::string> feasible_actions;
    std::string format_spec;

    friend bool operator==(const PromptBundle&, const PromptBundle&) = default;
};

struct RawRecord {
    std::string scene_id;
    std::string episode_id;
    std::size_t step_index = 0;
    env::Pose pose;              // agent pose at the recorded step
    env::Observation observation;
    PromptBundle prompt;
    std::string raw_response;
    std::optional<std::string> trace;  // canonical strict form, set on kept records

    friend bool operator==(const RawRecord&, const RawRecord&) = default;
};

enum class Stage { Rule, Feasibility, None };
std::string_view stage_name(Stage s);

struct FilterOutcome {
    bool kept = false;
    Stage stage = Stage::None;
    std::optional<std::string> reason;

    static FilterOutcome keep() { return {true, Stage::None, std::nullopt}; }
    static FilterOutcome reject(Stage s, std::string why) { return {false, s, std::move(why)}; }
};

class GeneratorUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct MockSettings {
    double corruption_rate = 0.0;
    std::uint64_t seed = 0;
};

struct HttpSettings {
    std::string base_url;  // scheme://host:port
    std::string path = "/generate";
    double timeout_seconds = 5.0;
    int retries = 2;
    std::string instruction_field = "instruction";
    std::string observation_field = "observation";
    std::string feasible_field = "feasible_actions";
    std::string format_field = "format_spec";
    std::string response_field = "text";
};

struct GeneratorEndpoint {
    enum class Kind { Mock, Http };
    Kind kind = Kind::Mock;
    MockSettings mock;
    HttpSettings http;

    void validate() const;  // throws std::invalid_argument
};

void to_json(nlohmann::json& j, const PromptBundle& p);
void from_json(const nlohmann::json& j, PromptBundle& p);
void to_json(nlohmann::json& j, const RawRecord& r);
void from_json(const nlohmann::json& j, RawRecord& r);
void to_json(nlohmann::json& j, const GeneratorEndpoint& e);
void from_json(const nlohmann::json& j, GeneratorEndpoint& e);

// Fixed-template textual digest: ray summary, goal bearing and distance.
std::string render_observation(const env::Observation& obs);

// Actions the prompt offers: FORWARD only when the centre ray clears one step.
std::vector<env::Action> feasible_actions(const env::Observation& obs, double forward_step);

PromptBundle build_prompt(const env::Episode& episode, const env::Observation& obs,
                          const std::vector<env::Action>& feasible);

enum class Mutation { DropTag, SwapOrder, EmptyThink, IllegalAction, TrailingProse };
inline constexpr std::size_t kMutationCount = 5;
std::string_view mutation_name(Mutation m);

// Where a generation sits in the synthesis sweep; keys the mock's randomness.
struct GenerationKey {
    std::string episode_id;
    std::size_t step = 0;
};

// Structured side channel the mock reasons over (the HTTP generator sees only the prompt).
struct GenerationContext {
    GenerationKey key;
    env::Observation observation;
    double forward_step = 0.25;
    double success_radius = 0.5;
};

// STOP inside the success radius; otherwise the feasible action with the
// smallest post-action goal distance, ties broken toward the goal side.
env::Action oracle_action(const env::Observation& obs, const std::vector<env::Action>& feasible,
                          double forward_step, double success_radius);

std::string apply_mutation(std::string_view think, env::Action action, Mutation m);

// Mock corruption schedule: whether (and how) the record at `key` is corrupted.
std::optional<Mutation> mock_mutation(const MockSettings& s, const GenerationKey& key);

class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string generate(const PromptBundle& prompt, const GenerationContext& ctx) const = 0;
};

class MockGenerator final : public Generator {
public:
    explicit MockGenerator(MockSettings settings);
    std::string generate(const PromptBundle& prompt, const GenerationContext& ctx) const override;

private:
    MockSettings settings_;
};

class HttpGenerator final : public Generator {
public:
    explicit HttpGenerator(HttpSettings settings);
    std::string generate(const PromptBundle& prompt, const GenerationContext& ctx) const override;

    nlohmann::json request_body(const PromptBundle& prompt) const;

private:
    HttpSettings settings_;
};

std::unique_ptr<Generator> make_generator(const GeneratorEndpoint& endpoint);

// Stage one: lenient parse, strict re-render, non-empty think, known and feasible action.
FilterOutcome rule_filter(const RawRecord& record);

inline constexpr double kDefaultToleranceSteps = 2.0;

// Stage two: execute the decided action from the recorded pose; reject on
// collision or when the new position strays more than `tolerance` from the
// reference polyline.
FilterOutcome feasibility_filter(const RawRecord& record, const env::Episode& episode, const env::Scene& scene,
                                 double tolerance);

struct SynthesisStats {
    std::size_t raw = 0;
    std::size_t rule_rejected = 0;
    std::size_t feasibility_rejected = 0;
    std::size_t kept = 0;

    friend bool operator==(const SynthesisStats&, const SynthesisStats&) = default;
};
nlohmann::json to_json(const SynthesisStats& s);

struct SynthesisOptions {
    std::optional<double> tolerance;  // absolute; defaults to tolerance_steps × forward step
    double tolerance_steps = kDefaultToleranceSteps;
    Exec exec = Exec::Parallel;
    std::optional<std::filesystem::path> rejected_path;  // optional JSONL of rejected records
};

// Walks each episode's reference actions, prompting at every step. Kept
// records are written to `out_path` in (episode order, step) order.
SynthesisStats synthesize_dataset(const std::vector<env::Episode>& suite, const env::SceneLibrary& scenes,
                                  const Generator& generator, const std::filesystem::path& out_path,
                                  const SynthesisOptions& options = {});

std::vector<RawRecord> load_dataset(const std::filesystem::path& path);

// Loopback HTTP service answering generation requests with the mock's logic
// (the structured context is rebuilt from a JSON observation field).
class StubGeneratorServer {
public:
    StubGeneratorServer(MockSettings settings, HttpSettings fields);
    ~StubGeneratorServer();
    StubGeneratorServer(const StubGeneratorServer&) = delete;
    StubGeneratorServer& operator=(const StubGeneratorServer&) = delete;

    // Binds 127.0.0.1 on `port` (0 picks a free port) and serves on a background thread.
    int start(int port = 0);
    void stop();
    std::string base_url() const;
    std::size_t requests() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace navlab::cot
