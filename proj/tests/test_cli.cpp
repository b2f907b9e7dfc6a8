#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "navlab/cli.hpp"
#include "navlab/parallel.hpp"
#include "test_support.hpp"

using namespace navlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("navlab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Compares against tests/golden/<name>; NAVLAB_UPDATE_GOLDEN=1 rewrites it.
void expect_golden(const std::string& name, const std::string& actual) {
    const fs::path p = fixtures::source_dir() / "tests" / "golden" / name;
    if (std::getenv("NAVLAB_UPDATE_GOLDEN")) {
        std::ofstream(p, std::ios::binary) << actual;
        return;
    }
    ASSERT_TRUE(fs::exists(p)) << p;
    EXPECT_EQ(actual, slurp(p)) << name;
}

cli::RunConfig seeded(std::vector<std::string> overrides = {}) {
    overrides.insert(overrides.begin(), "seed=0");
    return cli::load_config(std::nullopt, overrides);
}

int run_binary(const std::string& args) {
    const std::string cmd = std::string(NAVLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, SeedIsRequired) {
    EXPECT_THROW(cli::load_config(std::nullopt, {}), cli::ConfigError);
    EXPECT_THROW(cli::load_config(std::nullopt, {"seed=\"x\""}), cli::ConfigError);
    EXPECT_THROW(cli::load_config(std::nullopt, {"seed=1.5"}), cli::ConfigError);
    EXPECT_EQ(seeded().seed, 0u);
}

TEST(Config, UnknownKeysAreRejected) {
    EXPECT_THROW(seeded({"grpo.klbeta=0.1"}), cli::ConfigError);
    EXPECT_THROW(seeded({"extra=1"}), cli::ConfigError);
    EXPECT_THROW(seeded({"fis.n.deep=1"}), cli::ConfigError);
}

TEST(Config, OverridesParseJsonValues) {
    const cli::RunConfig c = seeded({"grpo.kl_beta=0.05", "fis.mode=slow_only", "reward.enabled=[\"navigation\"]",
                                     "fis.open_loop=true", "budget=12"});
    EXPECT_DOUBLE_EQ(c.grpo.kl_beta, 0.05);
    EXPECT_EQ(c.fis.mode, fis::Mode::SlowOnly);
    EXPECT_TRUE(c.fis.open_loop);
    EXPECT_EQ(c.budget, 12u);
    EXPECT_EQ(c.source["fis"]["mode"], "slow_only");
    EXPECT_THROW(seeded({"novalue"}), cli::ConfigError);
    EXPECT_THROW(seeded({"=3"}), cli::ConfigError);
}

TEST(Config, InvalidValuesAreRejected) {
    for (const char* bad : {"fis.mode=sideways", "fis.n=0", "grpo.group_size=1", "grpo.clip_eps=-1",
                            "reward.path_metric=l2", "reward.enabled=[\"speed\"]", "budget=0",
                            "generator.corruption_rate=2", "generator.kind=oracle", "serve.port=70000",
                            "ablate.betas=[]", "scenes=\"/nonexistent/dir\"", "grpo.iterations=\"many\""}) {
        EXPECT_THROW(seeded({bad}), cli::ConfigError) << bad;
    }
}

TEST(Config, FileLayersUnderOverrides) {
    const fs::path dir = scratch("config");
    std::ofstream(dir / "c.json") << R"({"seed": 4, "fis": {"n": 5}, "budget": 30})";
    const cli::RunConfig c = cli::load_config(dir / "c.json", {"budget=31"});
    EXPECT_EQ(c.seed, 4u);
    EXPECT_EQ(c.fis.n, 5u);
    EXPECT_EQ(c.fis.H, 3u);
    EXPECT_EQ(c.budget, 31u);
    std::ofstream(dir / "bad.json") << "{ not json";
    EXPECT_THROW(cli::load_config(dir / "bad.json", {}), cli::ConfigError);
    EXPECT_THROW(cli::load_config(dir / "missing.json", {}), cli::ConfigError);
}

TEST(Config, HashIsStableAndSensitive) {
    const cli::RunConfig a = seeded(), b = seeded();
    EXPECT_EQ(cli::config_hash(a.source), cli::config_hash(b.source));
    EXPECT_EQ(cli::config_hash(a.source).size(), 16u);
    EXPECT_NE(cli::config_hash(a.source), cli::config_hash(seeded({"fis.n=4"}).source));
}

TEST(Cli, SynthIsDeterministicAcrossWorkerCounts) {
    const cli::RunConfig cfg = seeded();
    const fs::path a = scratch("synth_a"), b = scratch("synth_b");
    set_worker_count(1);
    const auto sa = cli::cmd_synth(cfg, a);
    set_worker_count(0);
    const auto sb = cli::cmd_synth(cfg, b);
    EXPECT_EQ(sa.kept, sb.kept);
    for (const char* f : {"dataset.jsonl", "rejected.jsonl", "stats.json", "synthesis.txt", "manifest.json"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const json m = json::parse(slurp(a / "manifest.json"));
    EXPECT_EQ(m["command"], "synth");
    EXPECT_EQ(m["config_hash"], cli::config_hash(cfg.source));
    EXPECT_EQ(m["seed"], 0);
    EXPECT_TRUE(m["outputs"].contains("dataset.jsonl"));
    expect_golden("synthesis.txt", slurp(a / "synthesis.txt"));
}

TEST(Cli, ReplayEvaluationMatchesGolden) {
    const cli::RunConfig cfg = seeded();
    const fs::path dir = scratch("eval");
    const std::string table = cli::cmd_eval(cfg, std::nullopt, cfg.eval_suite, true, dir);
    EXPECT_NE(table.find("mean (reference replay)"), std::string::npos);
    expect_golden("eval_replay.txt", table);
    EXPECT_THROW(cli::cmd_eval(cfg, std::nullopt, cfg.eval_suite, false, dir), cli::ConfigError);
    EXPECT_THROW(cli::cmd_eval(cfg, std::nullopt, dir / "none.jsonl", true, dir), cli::ConfigError);
}

TEST(Cli, PipelineTablesMatchGolden) {
    const cli::RunConfig cfg = cli::load_config(fixtures::source_dir() / "configs" / "golden.json", {});
    const fs::path root = scratch("pipeline");
    cli::cmd_synth(cfg, root / "synth");
    const auto cold = cli::cmd_coldstart(cfg, root / "synth" / "dataset.jsonl", root / "coldstart");
    const auto rep = cli::cmd_train(cfg, cold.nav_checkpoint, cli::TaskKind::Navigation, root / "train");
    ASSERT_TRUE(rep.checkpoint);
    EXPECT_EQ(rep.rows.size(), 3u);
    const std::string eval = cli::cmd_eval(cfg, fs::path(*rep.checkpoint), cfg.eval_suite, false, root / "eval");
    const cli::AblationTables t = cli::cmd_ablate(cfg, root / "ablate");
    EXPECT_EQ(t.grid.size(), 8u);
    EXPECT_EQ(t.beta.size(), 2u);
    expect_golden("pipeline_eval.txt", eval);
    expect_golden("reward_grid.txt", t.grid_text);
    expect_golden("beta_sweep.txt", t.beta_text);

    const std::string report = cli::cmd_report(root);
    EXPECT_NE(report.find("## ablate/reward_grid.txt"), std::string::npos);
    EXPECT_TRUE(fs::exists(root / "report.txt"));

    EXPECT_THROW(cli::cmd_train(cfg, cold.nav_checkpoint, cli::TaskKind::Trace, root / "bad"), cli::ConfigError);
}

TEST(Cli, BinaryExitCodes) {
    const fs::path dir = scratch("binary");
    const std::string cfg = (fixtures::source_dir() / "configs" / "default.json").string();
    EXPECT_EQ(run_binary("eval --replay -c " + cfg + " --run-dir " + (dir / "ok").string()), 0);
    EXPECT_EQ(run_binary("eval --replay -c " + cfg + " -s nonsense=1"), 1);
    EXPECT_EQ(run_binary("eval --replay -c " + (dir / "missing.json").string()), 1);
    EXPECT_EQ(run_binary("train -c " + cfg + " --init " + (dir / "none.ckpt").string()), 1);
    std::ofstream(dir / "junk.ckpt") << "definitely not a checkpoint";
    EXPECT_EQ(run_binary("train -c " + cfg + " --init " + (dir / "junk.ckpt").string() + " --run-dir " +
                         (dir / "t").string()),
              2);
    EXPECT_EQ(run_binary("frobnicate"), 1);
    EXPECT_EQ(run_binary("--help"), 0);
}
