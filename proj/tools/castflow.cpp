#include <iostream>

#include <CLI11.hpp>

#include "castflow/commands.hpp"

namespace {

struct CliOverrides {
    std::string mode;
    std::string arch;
    std::string adapter;
    std::string output;
    long long seed = -1;
    int workers = -1;
    bool debug_transcripts = false;
};

castflow::cli::RunConfig load_config(const std::string& path, const CliOverrides& o) {
    castflow::cli::RunConfig config = castflow::cli::RunConfig::load(path);
    if (!o.mode.empty()) config.mode = castflow::toolkit::mode_from_string(o.mode);
    if (!o.arch.empty()) config.arch = castflow::workflow::arch_from_string(o.arch);
    if (!o.adapter.empty()) {
        if (o.adapter != "mock" && o.adapter != "remote")
            throw castflow::ConfigError("--adapter must be mock or remote");
        config.adapter_kind = o.adapter;
    }
    if (!o.output.empty()) config.output_dir = o.output;
    if (o.seed >= 0) config.seed = static_cast<std::uint64_t>(o.seed);
    if (o.workers >= 0) config.workers = o.workers;
    if (o.debug_transcripts) config.debug_transcripts = true;
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"castflow: ensemble-anchored, evidence-guided agentic time series forecasting"};
    app.require_subcommand(1);

    std::string config_path;
    CliOverrides overrides;
    app.add_option("--config", config_path, "experiment config file")->required();
    app.add_option("--mode", overrides.mode, "workflow mode: train or test");
    app.add_option("--arch", overrides.arch, "architecture: agent-only, anchorer-only, full");
    app.add_option("--adapter", overrides.adapter, "policy adapter: mock or remote");
    app.add_option("--seed", overrides.seed, "seed override");
    app.add_option("--workers", overrides.workers, "worker threads (0 = all)");
    app.add_option("--output", overrides.output, "output directory override");
    app.add_flag("--debug-transcripts", overrides.debug_transcripts,
                 "log verbatim policy request/response bodies per trajectory");

    auto* ingest = app.add_subcommand("ingest", "validate a CSV and write the dataset snapshot");
    auto* build_library = app.add_subcommand("build-library", "cluster training windows and score the pool");
    auto* build_memory = app.add_subcommand("build-memory", "explore tool schedules and archive the best trajectories");
    auto* run = app.add_subcommand("run", "forecast the evaluation split and write the results table");
    auto* exp = app.add_subcommand("export", "write SFT or rollout corpora for an external trainer");
    auto* calibrate = app.add_subcommand("calibrate", "fit reward gamma/nu on the validation split");

    std::string export_kind = "sft";
    exp->add_option("--kind", export_kind, "sft or rollouts")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        const castflow::cli::RunConfig config = load_config(config_path, overrides);
        if (ingest->parsed()) {
            castflow::cli::cmd_ingest(config, std::cout);
        } else if (build_library->parsed()) {
            castflow::cli::cmd_build_library(config, std::cout);
        } else if (build_memory->parsed()) {
            castflow::cli::cmd_build_memory(config, std::cout);
        } else if (run->parsed()) {
            const auto summary = castflow::cli::cmd_run(config, std::cout);
            return summary.hard_errors == 0 ? 0 : 1;
        } else if (exp->parsed()) {
            castflow::cli::cmd_export(config, export_kind, std::cout);
        } else if (calibrate->parsed()) {
            castflow::cli::cmd_calibrate(config, config_path, std::cout);
        }
    } catch (const castflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
