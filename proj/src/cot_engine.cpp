#include "navlab/cot_engine.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include "navlab/random.hpp"
#include "navlab/trace_format.hpp"

namespace navlab::cot {

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\n\r\f\v");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\n\r\f\v");
    return std::string(s.substr(first, last - first + 1));
}

double centre_ray(const env::Observation& obs) {
    return obs.depth_rays.empty() ? 0.0 : obs.depth_rays[obs.depth_rays.size() / 2];
}

}  // namespace

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::Rule: return "rule";
        case Stage::Feasibility: return "feasibility";
        case Stage::None: return "none";
    }
    return "";
}

std::string_view mutation_name(Mutation m) {
    switch (m) {
        case Mutation::DropTag: return "drop_tag";
        case Mutation::SwapOrder: return "swap_order";
        case Mutation::EmptyThink: return "empty_think";
        case Mutation::IllegalAction: return "illegal_action";
        case Mutation::TrailingProse: return "trailing_prose";
    }
    return "";
}

void GeneratorEndpoint::validate() const {
    if (kind == Kind::Mock) {
        if (!(mock.corruption_rate >= 0.0 && mock.corruption_rate <= 1.0)) {
            throw std::invalid_argument("corruption_rate must lie in [0, 1]");
        }
    } else {
        if (http.base_url.empty()) throw std::invalid_argument("http generator needs a base_url");
        if (!(http.timeout_seconds > 0.0)) throw std::invalid_argument("http timeout must be positive");
        if (http.retries < 0) throw std::invalid_argument("http retries must be >= 0");
        if (http.response_field.empty()) throw std::invalid_argument("http response field must be named");
    }
}

// ---- JSON ----------------------------------------------------------------

void to_json(nlohmann::json& j, const PromptBundle& p) {
    j = {{"instruction", p.instruction},
         {"observation", p.observation_rendering},
         {"feasible_actions", p.feasible_actions},
         {"format_spec", p.format_spec}};
}

void from_json(const nlohmann::json& j, PromptBundle& p) {
    j.at("instruction").get_to(p.instruction);
    j.at("observation").get_to(p.observation_rendering);
    j.at("feasible_actions").get_to(p.feasible_actions);
    j.at("format_spec").get_to(p.format_spec);
}

void to_json(nlohmann::json& j, const RawRecord& r) {
    j = {{"scene_id", r.scene_id},       {"episode_id", r.episode_id},     {"step_index", r.step_index},
         {"pose", r.pose},               {"observation_vector", r.observation}, {"prompt", r.prompt},
         {"raw_response", r.raw_response}};
    if (r.trace) j["trace"] = *r.trace;
}

void from_json(const nlohmann::json& j, RawRecord& r) {
    j.at("scene_id").get_to(r.scene_id);
    j.at("episode_id").get_to(r.episode_id);
    j.at("step_index").get_to(r.step_index);
    j.at("pose").get_to(r.pose);
    j.at("observation_vector").get_to(r.observation);
    j.at("prompt").get_to(r.prompt);
    j.at("raw_response").get_to(r.raw_response);
    if (j.contains("trace")) r.trace = j.at("trace").get<std::string>();
}

void to_json(nlohmann::json& j, const GeneratorEndpoint& e) {
    if (e.kind == GeneratorEndpoint::Kind::Mock) {
        j = {{"kind", "mock"}, {"corruption_rate", e.mock.corruption_rate}, {"seed", e.mock.seed}};
    } else {
        j = {{"kind", "http"},
             {"base_url", e.http.base_url},
             {"path", e.http.path},
             {"timeout_seconds", e.http.timeout_seconds},
             {"retries", e.http.retries},
             {"fields",
              {{"instruction", e.http.instruction_field},
               {"observation", e.http.observation_field},
               {"feasible_actions", e.http.feasible_field},
               {"format_spec", e.http.format_field},
               {"response", e.http.response_field}}}};
    }
}

void from_json(const nlohmann::json& j, GeneratorEndpoint& e) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "mock") {
        e.kind = GeneratorEndpoint::Kind::Mock;
        e.mock.corruption_rate = j.value("corruption_rate", 0.0);
        e.mock.seed = j.value("seed", std::uint64_t{0});
    } else if (kind == "http") {
        e.kind = GeneratorEndpoint::Kind::Http;
        e.http.base_url = j.at("base_url").get<std::string>();
        e.http.path = j.value("path", e.http.path);
        e.http.timeout_seconds = j.value("timeout_seconds", e.http.timeout_seconds);
        e.http.retries = j.value("retries", e.http.retries);
        if (j.contains("fields")) {
            const auto& f = j.at("fields");
            e.http.instruction_field = f.value("instruction", e.http.instruction_field);
            e.http.observation_field = f.value("observation", e.http.observation_field);
            e.http.feasible_field = f.value("feasible_actions", e.http.feasible_field);
            e.http.format_field = f.value("format_spec", e.http.format_field);
            e.http.response_field = f.value("response", e.http.response_field);
        }
    } else {
        throw std::invalid_argument("generator kind must be mock or http, got " + kind);
    }
    e.validate();
}

// ---- prompts ---------------------------------------------------------------

std::string render_observation(const env::Observation& obs) {
    double lo = 0.0, left = 0.0, right = 0.0;
    if (!obs.depth_rays.empty()) {
        lo = *std::min_element(obs.depth_rays.begin(), obs.depth_rays.end());
        right = obs.depth_rays.front();  // rays sweep from the agent's right to its left
        left = obs.depth_rays.back();
    }
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "depth min %.3f m, centre %.3f m, left %.3f m, right %.3f m; goal bearing %.3f deg, "
                  "distance %.3f m; progress %.0f%%",
                  lo, centre_ray(obs), left, right, obs.goal_bearing * 180.0 / std::numbers::pi, obs.goal_distance,
                  100.0 * obs.step_fraction);
    return buf;
}

std::vector<env::Action> feasible_actions(const env::Observation& obs, double forward_step) {
    std::vector<env::Action> out;
    if (centre_ray(obs) > forward_step) out.push_back(env::Action::Forward);
    out.push_back(env::Action::TurnLeft);
    out.push_back(env::Action::TurnRight);
    out.push_back(env::Action::Stop);
    return out;
}

PromptBundle build_prompt(const env::Episode& episode, const env::Observation& obs,
                          const std::vector<env::Action>& feasible) {
    if (feasible.empty()) throw std::invalid_argument("feasible action set must not be empty");
    PromptBundle p;
    p.instruction = episode.instruction.empty() ? "navigate to the goal" : episode.instruction;
    p.observation_rendering = render_observation(obs);
    for (env::Action a : feasible) p.feasible_actions.emplace_back(env::action_name(a));
    p.format_spec = std::string(trace::kFormatSpec);
    return p;
}

// ---- generation --------------------------------------------------------------

env::Action oracle_action(const env::Observation& obs, const std::vector<env::Action>& feasible,
                          double forward_step, double success_radius) {
    if (feasible.empty()) throw std::invalid_argument("feasible action set must not be empty");
    auto allowed = [&](env::Action a) { return std::find(feasible.begin(), feasible.end(), a) != feasible.end(); };
    const double d = obs.goal_distance;
    if (d < success_radius && allowed(env::Action::Stop)) return env::Action::Stop;
    if (allowed(env::Action::Forward)) {
        const double after =
            std::sqrt(std::max(0.0, d * d + forward_step * forward_step - 2.0 * d * forward_step * std::cos(obs.goal_bearing)));
        if (after < d) return env::Action::Forward;
    }
    const env::Action toward = obs.goal_bearing > 0.0 ? env::Action::TurnLeft : env::Action::TurnRight;
    const env::Action away = toward == env::Action::TurnLeft ? env::Action::TurnRight : env::Action::TurnLeft;
    if (allowed(toward)) return toward;
    if (allowed(away)) return away;
    return feasible.front();
}

std::string apply_mutation(std::string_view think, env::Action action, Mutation m) {
    const std::string name(env::action_name(action));
    const std::string t(think);
    switch (m) {
        case Mutation::DropTag: return "<think>" + t + "</think><action>" + name;
        case Mutation::SwapOrder: return "<action>" + name + "</action><think>" + t + "</think>";
        case Mutation::EmptyThink: return "<think> </think><action>" + name + "</action>";
        case Mutation::IllegalAction: return "<think>" + t + "</think><action>JUMP</action>";
        case Mutation::TrailingProse:
            return "<think>" + t + "</think><action>" + name + " because the way looks open</action>";
    }
    return t;
}

std::optional<Mutation> mock_mutation(const MockSettings& s, const GenerationKey& key) {
    const std::uint64_t ep = fnv1a64(key.episode_id);
    if (!(uniform_at(s.seed, {ep, key.step, 0}) < s.corruption_rate)) return std::nullopt;
    const auto pick = static_cast<std::size_t>(uniform_at(s.seed, {ep, key.step, 1}) * kMutationCount);
    return static_cast<Mutation>(std::min(pick, kMutationCount - 1));
}

MockGenerator::MockGenerator(MockSettings settings) : settings_(settings) {
    GeneratorEndpoint e;
    e.mock = settings_;
    e.validate();
}

std::string MockGenerator::generate(const PromptBundle& prompt, const GenerationContext& ctx) const {
    std::vector<env::Action> feasible;
    for (const std::string& name : prompt.feasible_actions) {
        if (auto a = env::parse_action(name)) feasible.push_back(*a);
    }
    const env::Action action = oracle_action(ctx.observation, feasible, ctx.forward_step, ctx.success_radius);
    std::string think = env::narrate(ctx.observation, ctx.forward_step);
    think += ' ';
    think += env::narrate_decision(action);
    if (auto m = mock_mutation(settings_, ctx.key)) return apply_mutation(think, action, *m);
    return trace::serialize(think, trace::DecisionKind::Action, env::action_name(action));
}

HttpGenerator::HttpGenerator(HttpSettings settings) : settings_(std::move(settings)) {
    GeneratorEndpoint e;
    e.kind = GeneratorEndpoint::Kind::Http;
    e.http = settings_;
    e.validate();
}

nlohmann::json HttpGenerator::request_body(const PromptBundle& prompt) const {
    return {{settings_.instruction_field, prompt.instruction},
            {settings_.observation_field, prompt.observation_rendering},
            {settings_.feasible_field, prompt.feasible_actions},
            {settings_.format_field, prompt.format_spec}};
}

std::string HttpGenerator::generate(const PromptBundle& prompt, const GenerationContext&) const {
    httplib::Client client(settings_.base_url);
    const auto secs = static_cast<time_t>(settings_.timeout_seconds);
    const auto usecs = static_cast<time_t>((settings_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    const std::string body = request_body(prompt).dump();
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= settings_.retries; ++attempt) {
        auto res = client.Post(settings_.path, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(res->body);
            return j.at(settings_.response_field).get<std::string>();
        } catch (const std::exception& e) {
            last_error = std::string("bad response body: ") + e.what();
        }
    }
    throw GeneratorUnavailable("generator at " + settings_.base_url + settings_.path + " failed after " +
                               std::to_string(settings_.retries + 1) + " attempt(s): " + last_error);
}

std::unique_ptr<Generator> make_generator(const GeneratorEndpoint& endpoint) {
    endpoint.validate();
    if (endpoint.kind == GeneratorEndpoint::Kind::Mock) return std::make_unique<MockGenerator>(endpoint.mock);
    return std::make_unique<HttpGenerator>(endpoint.http);
}

// ---- filters ---------------------------------------------------------------

FilterOutcome rule_filter(const RawRecord& record) {
    const trace::ParseResult lenient = trace::try_parse(record.raw_response, trace::ParseMode::Lenient);
    if (!lenient.trace) return FilterOutcome::reject(Stage::Rule, std::string(trace::error_name(*lenient.error)));
    const trace::ParseResult strict = trace::try_parse(lenient.trace->raw);
    if (!strict.trace) return FilterOutcome::reject(Stage::Rule, std::string(trace::error_name(*strict.error)));
    if (trim(strict.trace->think).empty()) return FilterOutcome::reject(Stage::Rule, "empty_think");
    if (strict.trace->kind != trace::DecisionKind::Action) return FilterOutcome::reject(Stage::Rule, "not_an_action");
    const std::string decision = trim(strict.trace->decision);
    if (!env::parse_action(decision)) return FilterOutcome::reject(Stage::Rule, "unknown_action");
    const auto& feasible = record.prompt.feasible_actions;
    if (std::find(feasible.begin(), feasible.end(), decision) == feasible.end()) {
        return FilterOutcome::reject(Stage::Rule, "infeasible_action");
    }
    return FilterOutcome::keep();
}

FilterOutcome feasibility_filter(const RawRecord& record, const env::Episode& episode, const env::Scene& scene,
                                 double tolerance) {
    const trace::ParseResult parsed = trace::try_parse(record.raw_response, trace::ParseMode::Lenient);
    std::optional<env::Action> action;
    if (parsed.trace) action = env::parse_action(trim(parsed.trace->decision));
    if (!action) return FilterOutcome::reject(Stage::Feasibility, "no_executable_action");
    const env::StepResult res = env::step(record.pose, *action, scene);
    if (res.collided) return FilterOutcome::reject(Stage::Feasibility, "collision");
    if (episode.reference_trajectory.distance_to_polyline(res.new_pose.position) > tolerance) {
        return FilterOutcome::reject(Stage::Feasibility, "off_reference_path");
    }
    return FilterOutcome::keep();
}

// ---- synthesis ---------------------------------------------------------------

nlohmann::json to_json(const SynthesisStats& s) {
    return {{"raw", s.raw},
            {"rule_rejected", s.rule_rejected},
            {"feasibility_rejected", s.feasibility_rejected},
            {"kept", s.kept}};
}

SynthesisStats synthesize_dataset(const std::vector<env::Episode>& suite, const env::SceneLibrary& scenes,
                                  const Generator& generator, const std::filesystem::path& out_path,
                                  const SynthesisOptions& options) {
    if (suite.empty()) throw std::invalid_argument("synthesis suite is empty");

    struct Job {
        std::size_t episode = 0;
        RawRecord record;
        FilterOutcome outcome;
    };
    std::vector<Job> jobs;
    for (std::size_t e = 0; e < suite.size(); ++e) {
        const env::Episode& ep = suite[e];
        const env::Scene& scene = scenes.get(ep.scene_id);
        const std::vector<env::Action> reference = env::actions_for_path(scene, ep.start, ep.reference_trajectory);
        env::Pose pose = ep.start;
        for (std::size_t t = 0; t < reference.size(); ++t) {
            Job job;
            job.episode = e;
            job.record.scene_id = ep.scene_id;
            job.record.episode_id = ep.id;
            job.record.step_index = t;
            job.record.pose = pose;
            job.record.observation = env::observe(pose, scene, ep.goal, t, reference.size());
            jobs.push_back(std::move(job));
            pose = env::step(pose, reference[t], scene).new_pose;
        }
    }

    for_each_index(options.exec, jobs.size(), [&](std::size_t i) {
        Job& job = jobs[i];
        const env::Episode& ep = suite[job.episode];
        const env::Scene& scene = scenes.get(ep.scene_id);
        const auto feasible = feasible_actions(job.record.observation, scene.kinematics.forward_step);
        job.record.prompt = build_prompt(ep, job.record.observation, feasible);
        GenerationContext ctx{{ep.id, job.record.step_index},
                              job.record.observation,
                              scene.kinematics.forward_step,
                              ep.success_radius};
        job.record.raw_response = generator.generate(job.record.prompt, ctx);
        job.outcome = rule_filter(job.record);
        if (job.outcome.kept) {
            const double tol = options.tolerance.value_or(options.tolerance_steps * scene.kinematics.forward_step);
            job.outcome = feasibility_filter(job.record, ep, scene, tol);
        }
        if (job.outcome.kept) {
            job.record.trace = trace::parse_trace(job.record.raw_response, trace::ParseMode::Lenient).raw;
        }
    });

    if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write dataset " + out_path.string());
    std::ofstream rejected;
    if (options.rejected_path) {
        if (options.rejected_path->has_parent_path()) {
            std::filesystem::create_directories(options.rejected_path->parent_path());
        }
        rejected.open(*options.rejected_path);
    }
    SynthesisStats stats;
    for (const Job& job : jobs) {
        ++stats.raw;
        if (job.outcome.kept) {
            ++stats.kept;
            out << nlohmann::json(job.record).dump() << '\n';
            continue;
        }
        if (job.outcome.stage == Stage::Rule) {
            ++stats.rule_rejected;
        } else {
            ++stats.feasibility_rejected;
        }
        if (rejected.is_open()) {
            nlohmann::json j = job.record;
            j["stage"] = stage_name(job.outcome.stage);
            j["reason"] = job.outcome.reason.value_or("");
            rejected << j.dump() << '\n';
        }
    }
    if (!out) throw std::runtime_error("failed writing dataset " + out_path.string());
    return stats;
}

std::vector<RawRecord> load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open dataset " + path.string());
    std::vector<RawRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<RawRecord>());
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// ---- stub server -------------------------------------------------------------

struct StubGeneratorServer::Impl {
    MockSettings settings;
    HttpSettings fields;
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<std::size_t> requests{0};
};

namespace {

// Recovers the fields the mock needs from the rendered digest.
std::optional<env::Observation> parse_rendering(const std::string& text) {
    double lo, centre, left, right, bearing_deg, dist, progress;
    const int n = std::sscanf(text.c_str(),
                              "depth min %lf m, centre %lf m, left %lf m, right %lf m; goal bearing %lf deg, "
                              "distance %lf m; progress %lf",
                              &lo, &centre, &left, &right, &bearing_deg, &dist, &progress);
    if (n != 7) return std::nullopt;
    env::Observation obs;
    obs.depth_rays = {right, centre, left};
    obs.goal_bearing = bearing_deg * std::numbers::pi / 180.0;
    obs.goal_distance = dist;
    obs.step_fraction = progress / 100.0;
    return obs;
}

}  // namespace

StubGeneratorServer::StubGeneratorServer(MockSettings settings, HttpSettings fields) : impl_(std::make_unique<Impl>()) {
    impl_->settings = settings;
    impl_->fields = std::move(fields);
    Impl* impl = impl_.get();
    impl_->server.Post(impl_->fields.path, [impl](const httplib::Request& req, httplib::Response& res) {
        ++impl->requests;
        try {
            const auto body = nlohmann::json::parse(req.body);
            PromptBundle prompt;
            prompt.instruction = body.at(impl->fields.instruction_field).get<std::string>();
            prompt.observation_rendering = body.at(impl->fields.observation_field).get<std::string>();
            prompt.feasible_actions = body.at(impl->fields.feasible_field).get<std::vector<std::string>>();
            prompt.format_spec = body.at(impl->fields.format_field).get<std::string>();
            const auto obs = parse_rendering(prompt.observation_rendering);
            if (!obs) throw std::invalid_argument("unrecognised observation rendering");
            GenerationContext ctx;
            ctx.key = {prompt.instruction, static_cast<std::size_t>(fnv1a64(req.body))};
            ctx.observation = *obs;
            const std::string text = MockGenerator(impl->settings).generate(prompt, ctx);
            res.set_content(nlohmann::json{{impl->fields.response_field, text}}.dump(), "application/json");
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
        }
    });
}

StubGeneratorServer::~StubGeneratorServer() { stop(); }

int StubGeneratorServer::start(int port) {
    if (impl_->thread.joinable()) return impl_->port;
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        impl_->port = impl_->server.bind_to_port("127.0.0.1", port) ? port : -1;
    }
    if (impl_->port < 0) throw std::runtime_error("stub generator could not bind a port");
    impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void StubGeneratorServer::stop() {
    if (!impl_ || !impl_->thread.joinable()) return;
    impl_->server.stop();
    impl_->thread.join();
}

std::string StubGeneratorServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

std::size_t StubGeneratorServer::requests() const { return impl_->requests.load(); }

}  // namespace navlab::cot
