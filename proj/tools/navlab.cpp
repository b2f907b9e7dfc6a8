// Command-line front end: synth, coldstart, train, eval, ablate, serve, client, report.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "navlab/cli.hpp"
#include "navlab/parallel.hpp"

namespace fs = std::filesystem;
using namespace navlab;

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    int workers = -1;
    std::string run_dir;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config, "JSON config file");
    sub->add_option("-s,--set", c.overrides, "Override a config key, e.g. grpo.kl_beta=0.05")->take_all();
    sub->add_option("-w,--workers", c.workers, "OpenMP worker threads (0 = runtime default)");
    sub->add_option("--run-dir", c.run_dir, "Output directory (default <output_root>/<command>)");
}

cli::RunConfig resolve(const Common& c) {
    std::vector<std::string> overrides = c.overrides;
    if (c.workers >= 0) overrides.push_back("workers=" + std::to_string(c.workers));
    cli::RunConfig cfg =
        cli::load_config(c.config.empty() ? std::nullopt : std::optional<fs::path>(c.config), overrides);
    set_worker_count(cfg.workers);
    return cfg;
}

fs::path run_dir(const Common& c, const cli::RunConfig& cfg, const std::string& command) {
    return c.run_dir.empty() ? cli::output_root(cfg) / command : fs::path(c.run_dir);
}

extern "C" void on_signal(int) { cli::request_stop(); }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dual-rate navigation agent toolkit"};
    app.require_subcommand(1);

    Common synth_c, cold_c, train_c, eval_c, ablate_c, serve_c, client_c;
    std::string dataset, checkpoint, suite, task = "nav", report_root;
    bool replay = false, local = false;
    double max_seconds = -1.0;

    CLI::App* synth = app.add_subcommand("synth", "Synthesize and filter reasoning traces");
    add_common(synth, synth_c);

    CLI::App* cold = app.add_subcommand("coldstart", "Supervised cold start from a synthesized dataset");
    add_common(cold, cold_c);
    cold->add_option("--dataset", dataset, "Kept-records JSONL")->required();

    CLI::App* train = app.add_subcommand("train", "GRPO fine-tuning from a checkpoint");
    add_common(train, train_c);
    train->add_option("--init", checkpoint, "Initial checkpoint")->required();
    train->add_option("--task", task, "nav or trace")->check(CLI::IsMember({"nav", "trace"}));

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on an episode suite");
    add_common(eval, eval_c);
    eval->add_option("--checkpoint", checkpoint, "Navigation checkpoint");
    eval->add_option("--suite", suite, "Episode suite JSONL (default: configured eval suite)");
    eval->add_flag("--replay", replay, "Replay the reference action sequences instead of the policy");

    CLI::App* ablate = app.add_subcommand("ablate", "Reward-group grid and KL-penalty sweep");
    add_common(ablate, ablate_c);

    CLI::App* serve = app.add_subcommand("serve", "Serve FiS actions over TCP");
    add_common(serve, serve_c);
    serve->add_option("--checkpoint", checkpoint, "Navigation checkpoint")->required();
    serve->add_option("--max-seconds", max_seconds, "Stop after this many seconds");

    CLI::App* client = app.add_subcommand("client", "Drive a suite through a server and report latency");
    add_common(client, client_c);
    client->add_option("--checkpoint", checkpoint, "Navigation checkpoint for --local servers");
    client->add_option("--suite", suite, "Episode suite JSONL (default: configured eval suite)");
    client->add_flag("--local", local, "Start in-process loopback servers, one per FiS mode");

    CLI::App* report = app.add_subcommand("report", "Collect the text tables of a run tree");
    report->add_option("root", report_root, "Run tree root")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);

    const auto opt_path = [](const std::string& s) {
        return s.empty() ? std::nullopt : std::optional<fs::path>(s);
    };

    int stage = 1;
    try {
        if (synth->parsed()) {
            const cli::RunConfig cfg = resolve(synth_c);
            stage = 2;
            const fs::path dir = run_dir(synth_c, cfg, "synth");
            cli::cmd_synth(cfg, dir);
            std::cout << "wrote " << (dir / "dataset.jsonl").string() << '\n';
        } else if (cold->parsed()) {
            const cli::RunConfig cfg = resolve(cold_c);
            stage = 2;
            const cli::ColdStartOutputs out = cli::cmd_coldstart(cfg, dataset, run_dir(cold_c, cfg, "coldstart"));
            std::cout << "wrote " << out.nav_checkpoint.string() << " and " << out.trace_checkpoint.string() << '\n';
        } else if (train->parsed()) {
            const cli::RunConfig cfg = resolve(train_c);
            stage = 2;
            const grpo::TrainReport rep = cli::cmd_train(
                cfg, checkpoint, task == "nav" ? cli::TaskKind::Navigation : cli::TaskKind::Trace,
                run_dir(train_c, cfg, "train"));
            std::cout << "wrote " << rep.checkpoint.value_or("") << '\n';
        } else if (eval->parsed()) {
            const cli::RunConfig cfg = resolve(eval_c);
            stage = 2;
            std::cout << cli::cmd_eval(cfg, opt_path(checkpoint), suite.empty() ? cfg.eval_suite : fs::path(suite),
                                       replay, run_dir(eval_c, cfg, "eval"));
        } else if (ablate->parsed()) {
            const cli::RunConfig cfg = resolve(ablate_c);
            stage = 2;
            const cli::AblationTables t = cli::cmd_ablate(cfg, run_dir(ablate_c, cfg, "ablate"));
            std::cout << t.grid_text << '\n' << t.beta_text;
        } else if (serve->parsed()) {
            const cli::RunConfig cfg = resolve(serve_c);
            stage = 2;
            cli::cmd_serve(cfg, checkpoint, run_dir(serve_c, cfg, "serve"),
                           max_seconds >= 0.0 ? std::optional<double>(max_seconds) : std::nullopt);
        } else if (client->parsed()) {
            const cli::RunConfig cfg = resolve(client_c);
            stage = 2;
            std::cout << cli::cmd_client(cfg, opt_path(checkpoint),
                                         suite.empty() ? cfg.eval_suite : fs::path(suite), local,
                                         run_dir(client_c, cfg, "client"));
        } else if (report->parsed()) {
            std::cout << cli::cmd_report(report_root);
        }
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return stage;
    }
    return 0;
}
