#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "castflow/core.hpp"
#include "castflow/distance.hpp"
#include "castflow/model_pool.hpp"
#include "castflow/toolkit.hpp"

namespace castflow::memory {

enum class UpdatePolicy { append, merge };
std::string to_string(UpdatePolicy p);
UpdatePolicy update_policy_from_string(const std::string& s);

// Order-preserving record of which tools ran and how each invocation ended.
struct ToolInvocation {
    toolkit::ToolId tool;
    enum class Status { ok, failed, bypassed } status = Status::ok;
    std::string detail;
};
std::string to_string(ToolInvocation::Status s);

// Union of all tool outputs attached to one forecasting instance. A report
// slot is populated exactly when its tool has an ok invocation on record;
// the residual slot stays empty in test mode.
struct DiagnosticEvidence {
    std::optional<toolkit::StatProfile> statistical;
    std::optional<toolkit::StatProfile> basic;
    std::optional<toolkit::QualityReport> quality;
    std::optional<toolkit::DiagnosticState> state;
    std::optional<toolkit::DynamicsReport> trend;
    std::optional<toolkit::DynamicsReport> changepoints;
    std::optional<toolkit::CrossChannelReport> cross_channel;
    std::optional<toolkit::ExogenousSummary> exogenous;
    std::optional<toolkit::EventSummary> event;
    std::optional<toolkit::ResidualReport> residual;
    std::optional<pool::EnsembleBaseline> baseline;
    std::vector<ToolInvocation> tool_invocations;

    bool slot_populated(toolkit::ToolId id) const;
    // Target-channel clip bounds, from the quality report or the diagnostic
    // state, whichever ran.
    std::optional<std::pair<double, double>> clip_bounds(std::size_t target_channel) const;

    std::string to_prompt_text(const ChannelRoles& roles) const;
    ojson to_json() const;
    static DiagnosticEvidence from_json(const ojson& j);
};

struct ToolSchedule {
    std::vector<toolkit::ToolId> mandatory;       // anchorer + exogenous analysis
    std::vector<toolkit::ToolId> optional_tools;  // dynamically selected diagnostics
    std::string rationale;

    std::vector<toolkit::ToolId> ordered() const;  // mandatory then optional
    bool contains(toolkit::ToolId id) const;
    // Throws WorkflowError on duplicates, a missing mandatory set, or a
    // residual diagnoser outside train mode.
    void validate(toolkit::Mode mode) const;

    std::string to_prompt_line() const;
    ojson to_json() const;
    static ToolSchedule from_json(const ojson& j);
};

// The strategy tuple e = <x, A*, O*, tau*>.
struct MemoryEntry {
    std::uint64_t id = 0;
    Matrix lookback;            // x
    ToolSchedule schedule;      // A*
    DiagnosticEvidence evidence;  // O*
    std::string response_text;  // tau*: selected response
    Matrix forecast;            // tau*: refined forecast, H x 1
    double achieved_mse = 0;
    std::string prompt;  // forecasting context the response answered

    ojson to_json() const;
    static MemoryEntry from_json(const ojson& j);
};

struct StrategyMemory {
    std::vector<MemoryEntry> entries;
    DistanceConfig distance_config;
    UpdatePolicy update_policy = UpdatePolicy::append;
    std::size_t target_channel = 0;
    double eta = 0.5;
    std::size_t K = 3;
    std::uint64_t seed = 0;
    std::uint64_t next_id = 0;

    // One serialized entry per line plus a sidecar manifest.
    void save(const std::string& entries_path, const std::string& manifest_path) const;
    static StrategyMemory load(const std::string& entries_path, const std::string& manifest_path);
};

struct ScoredEntry {
    const MemoryEntry* entry = nullptr;
    double similarity = 0;
};

struct RetrievalResult {
    std::vector<ScoredEntry> entries;  // sorted by similarity descending
    std::vector<double> query;         // echo of the target lookback
};

// Top-K entries with sim >= eta; ties keep insertion order. An empty result
// is a valid cold-start outcome.
RetrievalResult retrieve(const StrategyMemory& memory, const std::vector<double>& query_lookback,
                         std::size_t K, double eta);

// append: always adds a discrete record. merge: fuses with the nearest
// entry when sim >= eta_merge (lower-MSE trajectory wins, lookbacks are
// averaged elementwise), otherwise appends.
void update(StrategyMemory& memory, MemoryEntry entry, UpdatePolicy policy, double eta_merge);

}  // namespace castflow::memory
