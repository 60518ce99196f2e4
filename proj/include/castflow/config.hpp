#pragma once

#include <string>
#include <vector>

#include "castflow/adapters.hpp"
#include "castflow/memory.hpp"
#include "castflow/model_pool.hpp"
#include "castflow/reward.hpp"
#include "castflow/workflow.hpp"

namespace castflow::cli {

// One structured document per experiment, sections mirroring the module
// list. Unknown keys are rejected so stale experiments fail loudly.
struct RunConfig {
    // data
    std::string csv_path;
    std::string snapshot_path;  // written by ingest, read by everything else
    std::string target;
    std::vector<std::string> exogenous;
    std::string frequency = "1h";

    // core
    std::size_t L = 96;
    std::size_t H = 96;
    std::size_t stride = 48;
    SplitSpec split;

    // toolkit
    toolkit::ToolkitParams toolkit_params;

    // model_pool
    std::vector<std::string> pool_models = {"naive",          "seasonal_naive",
                                            "linear_trend",   "moving_average",
                                            "exponential_smoothing", "autoregressive"};
    pool::PoolModelConfig pool_params;
    std::size_t k_clusters = 8;
    struct PluginSpec {
        std::string id;
        std::string command;
    };
    std::vector<PluginSpec> plugins;

    // memory
    double eta = 0.5;
    std::size_t K = 3;
    memory::UpdatePolicy update_policy = memory::UpdatePolicy::append;
    double eta_merge = 0.9;
    std::size_t K_explore = 4;
    std::uint64_t seed = 42;

    // workflow
    std::size_t C_max = 3;
    toolkit::Mode mode = toolkit::Mode::test;
    workflow::Arch arch = workflow::Arch::full;
    double beta_trend = 0.5;

    // reward
    reward::RewardConfig reward_config;

    // adapter
    std::string adapter_kind = "mock";  // mock | remote
    adapters::RemoteAdapterConfig remote;

    // run
    int workers = 0;  // 0 = all available
    std::string output_dir = "out";
    bool debug_transcripts = false;

    static RunConfig from_json(const ojson& j);
    static RunConfig load(const std::string& path);
    ojson to_json() const;
    void save(const std::string& path) const;

    workflow::WorkflowConfig workflow_config() const;
    pool::ModelPool build_pool() const;
    std::unique_ptr<workflow::PolicyAdapter> build_adapter() const;

    std::string library_path() const;
    std::string memory_path() const;
    std::string memory_manifest_path() const;
};

}  // namespace castflow::cli
