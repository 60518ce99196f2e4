#pragma once

#include "castflow/memory.hpp"
#include "castflow/workflow.hpp"

namespace castflow::memory {

struct BuildParams {
    std::size_t K_explore = 4;
    UpdatePolicy policy = UpdatePolicy::append;
    double eta = 0.5;
    std::size_t K = 3;
    double eta_merge = 0.9;
    std::uint64_t seed = 42;
    toolkit::ToolkitParams toolkit;
    double beta_trend = 0.5;
    int workers = 1;
};

struct BuildResult {
    StrategyMemory memory;
    std::size_t instances = 0;
    std::size_t skipped = 0;           // instances with zero valid trajectories
    std::size_t candidates_tried = 0;
    std::size_t candidates_valid = 0;
};

// Expands the planner's initial schedule into K_explore exploration paths
// per training instance (each optional tool toggled with probability 0.5
// under the seeded generator), keeps the minimum-MSE trajectory among the
// candidates that pass reflection, and stores <x, A*, O*, tau*>.
BuildResult build_strategy_memory(const std::vector<Window>& instances, const ChannelRoles& roles,
                                  const pool::CaseLibrary& library, const pool::ModelPool& model_pool,
                                  workflow::PolicyAdapter& adapter, const BuildParams& params);

}  // namespace castflow::memory
