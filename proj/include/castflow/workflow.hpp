#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "castflow/core.hpp"
#include "castflow/memory.hpp"
#include "castflow/model_pool.hpp"
#include "castflow/toolkit.hpp"

namespace castflow::workflow {

// Collaborative-architecture modes: agent-only withholds the ensemble
// baseline from the forecaster, anchorer-only returns the baseline directly
// with zero policy calls, full runs the whole loop.
enum class Arch { agent_only, anchorer_only, full };
std::string to_string(Arch a);
Arch arch_from_string(const std::string& s);

struct WorkflowConfig {
    std::size_t C_max = 3;
    toolkit::Mode mode = toolkit::Mode::test;
    Arch arch = Arch::full;
    double beta_trend = 0.5;
    toolkit::ToolkitParams toolkit;
    std::size_t memory_K = 3;
    double memory_eta = 0.5;
    bool debug_transcripts = false;
};

// The loop's evolving context s_j: the raw window, the ensemble baseline
// (empty until the action stage produces it), the retrieved strategies and
// the growing history of observations and reasoning steps.
struct WorkflowState {
    const Window* window = nullptr;
    std::optional<pool::EnsembleBaseline> baseline;
    memory::RetrievalResult retrieved;
    std::vector<std::string> history;  // grows monotonically, never rewritten
    std::size_t step_index = 0;
    std::size_t retry_count = 0;  // c <= C_max
    toolkit::Mode mode = toolkit::Mode::test;

    void observe(std::string note) {
        history.push_back(std::move(note));
        ++step_index;
    }
};

// ============================================================================
// Policy adapter interface
// ============================================================================

struct PlanRequest {
    const Window* window = nullptr;
    ChannelRoles roles;
    toolkit::Mode mode = toolkit::Mode::test;
    Arch arch = Arch::full;
    const memory::RetrievalResult* retrieved = nullptr;
    std::vector<std::string> feedback;
    std::string context;  // rendered planning prompt
    std::vector<std::string>* transcript_sink = nullptr;
};

struct ForecastRequest {
    const Window* window = nullptr;
    ChannelRoles roles;
    std::size_t horizon = 0;
    const pool::EnsembleBaseline* baseline = nullptr;  // null in agent-only mode
    const memory::DiagnosticEvidence* evidence = nullptr;
    const memory::RetrievalResult* retrieved = nullptr;
    std::vector<std::string> feedback;
    std::string context;  // full forecasting context prompt
    double beta_trend = 0.5;
    double flat_threshold = 0.1;
    // Distinguishes rollout samples of the same prompt; 0 is the
    // deterministic greedy path.
    std::uint64_t sample_seed = 0;
    std::vector<std::string>* transcript_sink = nullptr;
};

struct LogicVerdict {
    bool ok = true;
    std::string feedback;
};

struct ReflectRequest {
    const Matrix* candidate = nullptr;  // parsed H x 1; null when format failed
    std::string response_text;
    const memory::DiagnosticEvidence* evidence = nullptr;
    ChannelRoles roles;
    std::size_t horizon = 0;
    double kappa = 3.0;  // logic bounds widen to 2*kappa
    std::vector<std::string>* transcript_sink = nullptr;
};

// Three role bindings: the planner and reflector stand in for the frozen
// general-purpose model, the forecaster for the tuned specialist.
class PolicyAdapter {
public:
    virtual ~PolicyAdapter() = default;
    virtual std::string planner_id() const = 0;
    virtual std::string forecaster_id() const = 0;
    virtual std::string reflector_id() const = 0;
    virtual memory::ToolSchedule plan(const PlanRequest& request) = 0;
    virtual std::string forecast(const ForecastRequest& request) = 0;
    virtual LogicVerdict reflect(const ReflectRequest& request) = 0;
};

// ============================================================================
// Trajectory record
// ============================================================================

struct ReflectionResult {
    bool format_ok = false;
    bool logic_ok = false;
    int v = 0;  // I_format * I_logic
    std::string feedback;

    ojson to_json() const;
    static ReflectionResult from_json(const ojson& j);
};

struct StepRecord {
    std::string state_summary;
    std::string action;
};

struct Attempt {
    memory::ToolSchedule schedule;
    std::string context;        // forecasting prompt for this attempt
    std::string response_text;
    std::optional<Matrix> candidate;
    ReflectionResult verdict;
};

struct Trajectory {
    std::size_t origin_index = 0;
    toolkit::Mode mode = toolkit::Mode::test;
    Arch arch = Arch::full;
    std::vector<StepRecord> steps;
    std::vector<Attempt> attempts;
    memory::DiagnosticEvidence evidence;  // from the accepted (or last) attempt
    std::optional<pool::EnsembleBaseline> baseline;
    Forecast final_forecast;
    bool fallback = false;
    std::string planner_id, forecaster_id, reflector_id;
    std::size_t retrieved_count = 0;
    double retrieved_max_similarity = 0;
    std::size_t policy_calls = 0;
    // Squared-error decomposition (lhs, rhs), filled by callers that hold
    // the ground truth.
    std::optional<std::pair<double, double>> decomposition;
    std::vector<std::string> transcripts;  // verbatim bodies under --debug-transcripts

    ojson to_json() const;
};

// Hard failure carrying whatever trajectory had accumulated.
class WorkflowRunError : public WorkflowError {
public:
    WorkflowRunError(const std::string& message, Trajectory partial_trajectory)
        : WorkflowError(message), partial(std::move(partial_trajectory)) {}
    Trajectory partial;
};

// ============================================================================
// Operations
// ============================================================================

// Rule-based schedule used by the mock planner and as the remote planner's
// fallback: mandatory anchorer + exogenous analysis, core dynamics
// diagnostics, cross-channel when covariates exist, residual only in train.
memory::ToolSchedule default_schedule(const ChannelRoles& roles, toolkit::Mode mode);

// Drops duplicates and mode-invalid tools, restores the mandatory set.
memory::ToolSchedule sanitize_schedule(memory::ToolSchedule schedule, toolkit::Mode mode);

struct ActionResult {
    std::optional<pool::EnsembleBaseline> baseline;
    memory::DiagnosticEvidence evidence;
};

// Executes the scheduled tools in order. Individual tool errors are
// recorded as failed invocations and execution continues; the residual
// diagnoser is bypassed (recorded, slot empty) outside train mode.
ActionResult execute_actions(const memory::ToolSchedule& schedule, const Window& window,
                             const ChannelRoles& roles, const pool::CaseLibrary* library,
                             const pool::ModelPool* pool, const toolkit::ToolkitParams& params,
                             toolkit::Mode mode);

std::string build_plan_context(const Window& window, const ChannelRoles& roles,
                               const memory::RetrievalResult& retrieved,
                               const std::vector<std::string>& feedback, toolkit::Mode mode);

std::string build_forecast_context(const Window& window, const ChannelRoles& roles,
                                   const pool::EnsembleBaseline* baseline,
                                   const memory::DiagnosticEvidence& evidence,
                                   const memory::RetrievalResult& retrieved,
                                   const std::vector<std::string>& feedback, std::size_t horizon);

// Accepts the fenced numeric block grammar (one comma-separated row per
// horizon step) or a JSON object with a "values" array. Returns the parsed
// H x 1 matrix or nullopt with the failure reason in *error.
std::optional<Matrix> parse_candidate(const std::string& response, std::size_t horizon,
                                      std::string* error);

ReflectionResult reflect(const std::optional<Matrix>& candidate, const std::string& response_text,
                         const std::string& format_error, const memory::DiagnosticEvidence& evidence,
                         const ChannelRoles& roles, std::size_t horizon, double kappa,
                         PolicyAdapter& adapter, std::vector<std::string>* transcript_sink);

// Mean imputation over the non-missing target lookback.
Forecast fallback_forecast(const Window& window, std::size_t horizon, std::size_t target_channel);

// lhs = |refined - truth|^2 - |base - truth|^2,
// rhs = |delta|^2 - 2<e_base, delta> with delta = refined - base.
std::pair<double, double> refinement_decomposition(const Matrix& truth, const Matrix& base,
                                                   const Matrix& refined);

struct RunInputs {
    const pool::CaseLibrary* library = nullptr;
    const pool::ModelPool* pool = nullptr;
    const memory::StrategyMemory* strategy_memory = nullptr;
};

struct RunResult {
    Forecast forecast;
    Trajectory trajectory;
};

RunResult run_forecast(const Window& window, const ChannelRoles& roles, const RunInputs& inputs,
                       PolicyAdapter& adapter, const WorkflowConfig& config,
                       std::uint64_t sample_seed = 0);

}  // namespace castflow::workflow
