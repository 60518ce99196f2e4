#include "castflow/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include "castflow/memory_build.hpp"
#include "castflow/parallel.hpp"

namespace castflow::cli {

namespace fs = std::filesystem;

// ============================================================================
// Dataset snapshot
// ============================================================================

void DatasetSnapshot::write(const TimeSeries& series, const std::string& path) {
    ojson j;
    j["schema_version"] = 1;
    j["frequency"] = series.frequency;
    j["channel_names"] = series.channel_names;
    j["target_channel"] = series.target_channel;
    j["exogenous_channels"] = series.exogenous_channels;
    j["timestamps"] = series.timestamps;
    j["values"] = matrix_to_json(series.values);
    j["dropout"] = channel_dropout(series);
    write_text_file(path, j.dump() + "\n");
}

TimeSeries DatasetSnapshot::read(const std::string& path) {
    const ojson j = ojson::parse(read_text_file(path));
    if (j.at("schema_version").get<int>() != 1)
        throw IngestError("unsupported dataset snapshot schema: " + path);
    TimeSeries s;
    s.frequency = j.at("frequency").get<std::string>();
    s.channel_names = j.at("channel_names").get<std::vector<std::string>>();
    s.target_channel = j.at("target_channel").get<std::size_t>();
    s.exogenous_channels = j.at("exogenous_channels").get<std::vector<std::size_t>>();
    s.timestamps = j.at("timestamps").get<std::vector<std::string>>();
    s.values = matrix_from_json(j.at("values"));
    s.validate();
    return s;
}

namespace {

void ensure_output_dir(const RunConfig& config) {
    fs::create_directories(config.output_dir);
}

std::string snapshot_path(const RunConfig& config) {
    return config.snapshot_path.empty() ? config.output_dir + "/dataset.json"
                                        : config.snapshot_path;
}

TimeSeries load_snapshot(const RunConfig& config) {
    const std::string path = snapshot_path(config);
    if (!fs::exists(path))
        throw IngestError("dataset snapshot not found at " + path +
                          "; run ingest into this output directory first or set data.snapshot");
    return DatasetSnapshot::read(path);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t z = a ^ (b * 0x9e3779b97f4a7c15ULL) ^ (c * 0xbf58476d1ce4e5b9ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

// ============================================================================
// ingest
// ============================================================================

void cmd_ingest(const RunConfig& config, std::ostream& log) {
    if (config.csv_path.empty()) throw IngestError("config data.csv is required for ingest");
    if (config.target.empty()) throw IngestError("config data.target is required for ingest");
    ensure_output_dir(config);

    const TimeSeries series =
        read_series_csv(config.csv_path, config.target, config.exogenous, config.frequency);
    DatasetSnapshot::write(series, snapshot_path(config));

    const auto dropout = channel_dropout(series);
    log << "ingested " << series.length() << " rows, " << series.channels() << " channels ("
        << 1 << " target, " << series.exogenous_channels.size() << " exogenous)\n";
    for (std::size_t c = 0; c < series.channels(); ++c)
        log << "  channel " << series.channel_names[c] << " dropout " << fixed6(dropout[c]) << "\n";
    log << "snapshot written to " << snapshot_path(config) << "\n";
}

// ============================================================================
// build-library
// ============================================================================

void cmd_build_library(const RunConfig& config, std::ostream& log) {
    ensure_output_dir(config);
    const TimeSeries series = load_snapshot(config);
    const SplitResult split = chronological_split(series, config.split);

    const pool::ModelPool model_pool = config.build_pool();
    const pool::CaseLibrary library =
        pool::build_case_library(split.train, config.L, config.H, config.stride, config.k_clusters,
                                 model_pool, config.seed, config.workers);
    library.save(config.library_path());

    log << "case library: " << library.clusters.size() << " clusters over train split ("
        << split.train.length() << " rows)\n";
    for (std::size_t c = 0; c < library.clusters.size(); ++c) {
        const auto& cluster = library.clusters[c];
        auto best = cluster.model_losses.begin();
        for (auto it = cluster.model_losses.begin(); it != cluster.model_losses.end(); ++it)
            if (it->second < best->second) best = it;
        log << "  cluster " << c << ": " << cluster.member_count << " members, best model "
            << best->first << " (loss " << fixed6(best->second) << ")\n";
    }
    log << "library written to " << config.library_path() << "\n";
}

// ============================================================================
// build-memory
// ============================================================================

void cmd_build_memory(const RunConfig& config, std::ostream& log) {
    ensure_output_dir(config);
    const TimeSeries series = load_snapshot(config);
    const SplitResult split = chronological_split(series, config.split);
    const pool::ModelPool model_pool = config.build_pool();
    const pool::CaseLibrary library = pool::CaseLibrary::load(config.library_path());
    const auto adapter = config.build_adapter();

    const std::vector<Window> instances =
        make_windows(split.train, config.L, config.H, config.stride, /*with_future=*/true);

    memory::BuildParams params;
    params.K_explore = config.K_explore;
    params.policy = config.update_policy;
    params.eta = config.eta;
    params.K = config.K;
    params.eta_merge = config.eta_merge;
    params.seed = config.seed;
    params.toolkit = config.toolkit_params;
    params.beta_trend = config.beta_trend;
    params.workers = config.workers;

    const memory::BuildResult result = memory::build_strategy_memory(
        instances, split.train.roles(), library, model_pool, *adapter, params);
    result.memory.save(config.memory_path(), config.memory_manifest_path());

    log << "strategy memory: " << result.memory.entries.size() << " entries from "
        << result.instances << " instances (" << result.candidates_valid << "/"
        << result.candidates_tried << " candidates valid";
    if (result.skipped > 0) log << ", " << result.skipped << " instances skipped";
    log << ")\n";
    log << "memory written to " << config.memory_path() << "\n";
}

// ============================================================================
// run
// ============================================================================

namespace {

struct WindowOutcome {
    bool hard_error = false;
    std::string error_message;
    workflow::Trajectory trajectory;
    double window_mse = 0;
    double window_mae = 0;
};

}  // namespace

RunSummary cmd_run(const RunConfig& config, std::ostream& log) {
    ensure_output_dir(config);
    const TimeSeries series = load_snapshot(config);
    const SplitResult split = chronological_split(series, config.split);

    // test mode scores the test split; train mode exercises the train-time
    // behavior (residual diagnoser allowed) on the validation split.
    const TimeSeries& segment = config.mode == toolkit::Mode::test ? split.test : split.validation;
    const std::vector<Window> windows =
        make_windows(segment, config.L, config.H, config.stride, /*with_future=*/true);
    const ChannelRoles roles = series.roles();

    const pool::ModelPool model_pool = config.build_pool();
    const pool::CaseLibrary library = pool::CaseLibrary::load(config.library_path());
    std::optional<memory::StrategyMemory> strategy_memory;
    if (config.arch == workflow::Arch::full && fs::exists(config.memory_path()))
        strategy_memory =
            memory::StrategyMemory::load(config.memory_path(), config.memory_manifest_path());

    const auto adapter = config.build_adapter();
    const workflow::WorkflowConfig wf = config.workflow_config();
    workflow::RunInputs inputs;
    inputs.library = &library;
    inputs.pool = &model_pool;
    inputs.strategy_memory = strategy_memory ? &*strategy_memory : nullptr;

    std::vector<WindowOutcome> outcomes(windows.size());
    par::index_for(windows.size(), config.workers, [&](std::size_t wi) {
        WindowOutcome& out = outcomes[wi];
        try {
            workflow::RunResult run = workflow::run_forecast(windows[wi], roles, inputs, *adapter, wf);
            const Matrix truth = Matrix::column(windows[wi].future->col(roles.target));
            out.window_mse = mse(run.forecast.values, truth);
            out.window_mae = mae(run.forecast.values, truth);
            if (run.trajectory.baseline)
                run.trajectory.decomposition = workflow::refinement_decomposition(
                    truth, run.trajectory.baseline->values, run.forecast.values);
            out.trajectory = std::move(run.trajectory);
        } catch (const workflow::WorkflowRunError& e) {
            out.hard_error = true;
            out.error_message = e.what();
            out.trajectory = e.partial;
        } catch (const Error& e) {
            out.hard_error = true;
            out.error_message = e.what();
        }
    });

    // Serial emission in window-origin order keeps outputs byte-stable
    // regardless of scheduling.
    std::ostringstream results_csv, trajectory_log;
    results_csv << "origin,mse,mae,fallback,attempts,policy_calls,error\n";
    RunSummary summary;
    summary.windows = windows.size();
    double sum_mse = 0, sum_mae = 0;
    std::size_t fallbacks = 0, scored = 0;
    std::map<std::string, std::size_t> tool_counts;
    for (std::size_t wi = 0; wi < windows.size(); ++wi) {
        const WindowOutcome& out = outcomes[wi];
        if (out.hard_error) {
            ++summary.hard_errors;
            results_csv << windows[wi].origin_index << ",,,,,,\"" << out.error_message << "\"\n";
            continue;
        }
        ++scored;
        sum_mse += out.window_mse;
        sum_mae += out.window_mae;
        if (out.trajectory.fallback) ++fallbacks;
        for (const auto& inv : out.trajectory.evidence.tool_invocations)
            if (inv.status == memory::ToolInvocation::Status::ok)
                ++tool_counts[toolkit::to_string(inv.tool)];
        results_csv << windows[wi].origin_index << "," << num_to_string(out.window_mse) << ","
                    << num_to_string(out.window_mae) << "," << (out.trajectory.fallback ? 1 : 0)
                    << "," << out.trajectory.attempts.size() << "," << out.trajectory.policy_calls
                    << ",\n";

        ojson record = out.trajectory.to_json();
        record["window_mse"] = out.window_mse;
        record["window_mae"] = out.window_mae;
        trajectory_log << record.dump() << "\n";
    }
    if (scored > 0) {
        summary.mse = sum_mse / static_cast<double>(scored);
        summary.mae = sum_mae / static_cast<double>(scored);
        summary.fallback_rate = static_cast<double>(fallbacks) / static_cast<double>(scored);
    }

    write_text_file(config.output_dir + "/results.csv", results_csv.str());
    write_text_file(config.output_dir + "/trajectories.jsonl", trajectory_log.str());

    std::ostringstream human, machine;
    human << "castflow run summary\n";
    human << "  arch            " << workflow::to_string(config.arch) << "\n";
    human << "  mode            " << toolkit::to_string(config.mode) << "\n";
    human << "  windows         " << summary.windows << "\n";
    human << "  hard_errors     " << summary.hard_errors << "\n";
    human << "  mse             " << fixed6(summary.mse) << "\n";
    human << "  mae             " << fixed6(summary.mae) << "\n";
    human << "  fallback_rate   " << fixed6(summary.fallback_rate) << "\n";
    human << "  tool usage frequency (executed / scored windows)\n";
    machine << "key,value\n";
    machine << "arch," << workflow::to_string(config.arch) << "\n";
    machine << "mode," << toolkit::to_string(config.mode) << "\n";
    machine << "windows," << summary.windows << "\n";
    machine << "hard_errors," << summary.hard_errors << "\n";
    machine << "mse," << num_to_string(summary.mse) << "\n";
    machine << "mae," << num_to_string(summary.mae) << "\n";
    machine << "fallback_rate," << num_to_string(summary.fallback_rate) << "\n";
    for (const auto id : toolkit::all_tools()) {
        const std::string name = toolkit::to_string(id);
        const double freq = scored > 0 ? static_cast<double>(tool_counts[name]) /
                                             static_cast<double>(scored)
                                       : 0.0;
        human << "    " << name << " " << fixed6(freq) << "\n";
        machine << "tool_frequency." << name << "," << num_to_string(freq) << "\n";
    }
    write_text_file(config.output_dir + "/summary.txt", human.str());
    write_text_file(config.output_dir + "/summary.csv", machine.str());

    log << human.str();
    if (summary.hard_errors > 0)
        log << "degraded: " << summary.hard_errors << " windows failed hard\n";
    return summary;
}

// ============================================================================
// export
// ============================================================================

namespace {

std::vector<reward::RolloutRecord> generate_rollout_groups(const RunConfig& config,
                                                           const TimeSeries& series) {
    if (config.arch == workflow::Arch::anchorer_only)
        throw ExportError("rollout export requires a policy architecture (agent-only or full)");
    const SplitResult split = chronological_split(series, config.split);
    const std::vector<Window> instances =
        make_windows(split.train, config.L, config.H, config.stride, /*with_future=*/true);
    const ChannelRoles roles = series.roles();

    const pool::ModelPool model_pool = config.build_pool();
    const pool::CaseLibrary library = pool::CaseLibrary::load(config.library_path());
    std::optional<memory::StrategyMemory> strategy_memory;
    if (fs::exists(config.memory_path()))
        strategy_memory =
            memory::StrategyMemory::load(config.memory_path(), config.memory_manifest_path());

    const auto adapter = config.build_adapter();
    workflow::WorkflowConfig wf = config.workflow_config();
    wf.mode = toolkit::Mode::train;  // rollouts are training artifacts
    workflow::RunInputs inputs;
    inputs.library = &library;
    inputs.pool = &model_pool;
    inputs.strategy_memory = strategy_memory ? &*strategy_memory : nullptr;

    const std::size_t G = config.reward_config.group_size;
    std::vector<reward::RolloutRecord> groups(instances.size());
    par::index_for(instances.size(), config.workers, [&](std::size_t wi) {
        const Window& window = instances[wi];
        const Matrix truth = Matrix::column(window.future->col(roles.target));
        reward::RolloutRecord& group = groups[wi];
        group.origin = window.origin_index;

        std::vector<double> totals;
        for (std::size_t g = 0; g < G; ++g) {
            workflow::RunResult run = workflow::run_forecast(
                window, roles, inputs, *adapter, wf, mix(config.seed, window.origin_index, g + 1));
            if (group.prompt.empty() && !run.trajectory.attempts.empty())
                group.prompt = run.trajectory.attempts.front().context;
            group.responses.push_back(run.trajectory.attempts.empty()
                                          ? std::string()
                                          : run.trajectory.attempts.back().response_text);
            const reward::RewardBreakdown breakdown =
                reward::compute_reward(run.trajectory, truth, config.reward_config);
            totals.push_back(breakdown.total);
            group.breakdowns.push_back(breakdown);
        }
        group.advantages = reward::group_advantages(totals);
    });
    return groups;
}

}  // namespace

void cmd_export(const RunConfig& config, const std::string& kind, std::ostream& log) {
    ensure_output_dir(config);
    if (kind == "sft") {
        const memory::StrategyMemory strategy_memory =
            memory::StrategyMemory::load(config.memory_path(), config.memory_manifest_path());
        const std::string path = config.output_dir + "/sft_corpus.jsonl";
        reward::export_sft_corpus(strategy_memory, path);
        log << "sft corpus: " << strategy_memory.entries.size() << " records -> " << path << "\n";
        return;
    }
    if (kind == "rollouts") {
        const TimeSeries series = load_snapshot(config);
        const auto groups = generate_rollout_groups(config, series);
        const std::string path = config.output_dir + "/rollouts.jsonl";
        reward::export_rollouts(groups, path);
        log << "rollouts: " << groups.size() << " groups of " << config.reward_config.group_size
            << " -> " << path << "\n";
        return;
    }
    throw ExportError("unknown export kind: " + kind + " (expected sft or rollouts)");
}

// ============================================================================
// calibrate
// ============================================================================

void cmd_calibrate(const RunConfig& config, const std::string& config_path, std::ostream& log) {
    const TimeSeries series = load_snapshot(config);
    const SplitResult split = chronological_split(series, config.split);
    // Calibration estimates loss percentiles, so it slides stride-1 over
    // the validation split to use every available trajectory.
    const std::vector<Window> windows =
        make_windows(split.validation, config.L, config.H, /*stride=*/1, /*with_future=*/true);

    const pool::ModelPool model_pool = config.build_pool();
    const pool::CaseLibrary library = pool::CaseLibrary::load(config.library_path());
    const std::size_t target = series.target_channel;

    std::vector<double> losses(windows.size());
    par::index_for(windows.size(), config.workers, [&](std::size_t wi) {
        const pool::EnsembleBaseline base = pool::anchor_forecast(windows[wi], library, model_pool);
        losses[wi] = mse(base.values, Matrix::column(windows[wi].future->col(target)));
    });

    const reward::Calibration cal = reward::calibrate(losses);
    RunConfig updated = config;
    updated.reward_config.gamma = cal.gamma;
    updated.reward_config.nu = cal.nu;
    updated.save(config_path);

    log << "calibrated over " << losses.size() << " validation windows: gamma="
        << num_to_string(cal.gamma) << " nu=" << num_to_string(cal.nu) << "\n";
    log << "reward.gamma and reward.nu written back to " << config_path << "\n";
}

}  // namespace castflow::cli
