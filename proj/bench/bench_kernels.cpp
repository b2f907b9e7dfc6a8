// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <filesystem>

#include "navlab/cli.hpp"
#include "navlab/cot_engine.hpp"
#include "navlab/grpo.hpp"
#include "navlab/parallel.hpp"
#include "navlab/random.hpp"

namespace fs = std::filesystem;
using namespace navlab;

namespace {

const fs::path kSource = NAVLAB_SOURCE_DIR;

Exec exec_of(const benchmark::State& state) { return state.range(0) ? Exec::Parallel : Exec::Serial; }

struct TraceBatch {
    policy::TracePolicy model;
    policy::ParamVector ref = policy::init_params(model, 1, 1.0);
    policy::ParamVector params = policy::init_params(model, 2, 1.0);
    std::vector<grpo::CandidateGroup> groups;

    TraceBatch() {
        SplitMixStream rng(3);
        for (int g = 0; g < 32; ++g) {
            grpo::CandidateGroup group;
            for (int i = 0; i < 8; ++i) {
                group.rollouts.push_back(policy::sample_trace_rollout(model, ref, rng()));
                group.rewards.push_back(rng.uniform());
                group.old_log_probs.push_back(policy::evaluate_log_probs(model, ref, group.rollouts.back()));
            }
            group.advantages = grpo::compute_advantages(group.rewards);
            groups.push_back(std::move(group));
        }
    }
};

void BM_GrpoObjective(benchmark::State& state) {
    static const TraceBatch batch;
    const grpo::GrpoConfig cfg;
    for (auto _ : state) {
        benchmark::DoNotOptimize(grpo::batch_objective_and_grad(batch.model, batch.params, batch.ref, batch.ref,
                                                                batch.groups, cfg, exec_of(state)));
    }
}

void BM_SampleGroups(benchmark::State& state) {
    const policy::TracePolicy model;
    const grpo::TraceFormatTask task(model, 32, 200);
    const policy::ParamVector params = policy::init_params(model, 4, 1.0);
    const grpo::GrpoConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(grpo::sample_groups(task, params, cfg, 0, exec_of(state)));
}

void BM_EvaluateSuite(benchmark::State& state) {
    static const cli::RunConfig cfg = cli::load_config(kSource / "configs" / "default.json",
                                                       {"scenes=\"" + (kSource / "data" / "scenes").string() + "\"",
                                                        "suites.synth=\"" + (kSource / "data" / "episodes" / "synth_suite.jsonl").string() + "\"",
                                                        "suites.train=\"" + (kSource / "data" / "episodes" / "nav_suite.jsonl").string() + "\"",
                                                        "suites.eval=\"" + (kSource / "data" / "episodes" / "nav_suite.jsonl").string() + "\""});
    static const cli::Workspace ws = cli::load_workspace(cfg);
    static const policy::FisPolicy model = cli::navigation_model(cfg, ws.scenes);
    static const policy::ParamVector params = policy::init_params(model, 5, 1.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(cli::evaluate_suite(model, params, ws.eval, ws.scenes, cfg, false, exec_of(state)));
    }
}

void BM_Synthesis(benchmark::State& state) {
    static const env::SceneLibrary scenes = env::SceneLibrary::load_directory(kSource / "data" / "scenes");
    static const std::vector<env::Episode> suite =
        env::load_episodes(kSource / "data" / "episodes" / "synth_suite.jsonl", scenes);
    const cot::MockGenerator gen({0.3, 0});
    cot::SynthesisOptions opt;
    opt.exec = exec_of(state);
    const fs::path out = fs::temp_directory_path() / "navlab_bench_synth.jsonl";
    for (auto _ : state) benchmark::DoNotOptimize(cot::synthesize_dataset(suite, scenes, gen, out, opt));
    fs::remove(out);
}

void BM_TraceEvaluate(benchmark::State& state) {
    const policy::TracePolicy model;
    const grpo::TraceFormatTask task(model, 4, 400);
    const policy::ParamVector params = policy::init_params(model, 6, 1.0);
    for (auto _ : state) benchmark::DoNotOptimize(task.evaluate(params, exec_of(state)));
}

}  // namespace

BENCHMARK(BM_GrpoObjective)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SampleGroups)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSuite)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Synthesis)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TraceEvaluate)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
