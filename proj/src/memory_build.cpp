#include "castflow/memory_build.hpp"

#include <algorithm>
#include <random>

#include "castflow/parallel.hpp"

namespace castflow::memory {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t z = a ^ (b * 0x9e3779b97f4a7c15ULL) ^ (c * 0xbf58476d1ce4e5b9ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Tools a perturbation may toggle; the mandatory pair stays untouched and
// the residual diagnoser only enters train-mode schedules.
std::vector<toolkit::ToolId> optional_universe(const ChannelRoles& roles) {
    using toolkit::ToolId;
    std::vector<toolkit::ToolId> universe = {
        ToolId::statistical_analysis, ToolId::basic_statistics,   ToolId::data_quality,
        ToolId::comprehensive_feature, ToolId::trend_analysis,    ToolId::changepoint_trend,
        ToolId::event_summary,         ToolId::autoregressive_residual,
    };
    if (!roles.exogenous.empty()) universe.push_back(ToolId::cross_channel);
    return universe;
}

ToolSchedule perturb_schedule(const ToolSchedule& base, const ChannelRoles& roles,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution flip(0.5);
    ToolSchedule out;
    out.mandatory = base.mandatory;
    out.rationale = base.rationale + " (exploration perturbation)";
    for (toolkit::ToolId id : optional_universe(roles)) {
        const bool in_base = std::find(base.optional_tools.begin(), base.optional_tools.end(),
                                       id) != base.optional_tools.end();
        const bool in_path = flip(rng) ? !in_base : in_base;
        if (in_path) out.optional_tools.push_back(id);
    }
    return out;
}

struct CandidateOutcome {
    bool valid = false;
    ToolSchedule schedule;
    DiagnosticEvidence evidence;
    std::string response;
    Matrix forecast;
    std::string prompt;
    double mse_value = 0;
};

struct InstanceOutcome {
    bool has_entry = false;
    MemoryEntry entry;
    std::size_t tried = 0;
    std::size_t valid = 0;
};

}  // namespace

BuildResult build_strategy_memory(const std::vector<Window>& instances, const ChannelRoles& roles,
                                  const pool::CaseLibrary& library, const pool::ModelPool& model_pool,
                                  workflow::PolicyAdapter& adapter, const BuildParams& params) {
    if (instances.empty()) throw MemoryError("build_strategy_memory: no training instances");
    if (params.K_explore == 0) throw MemoryError("build_strategy_memory: K_explore must be positive");
    for (const auto& w : instances)
        if (!w.future) throw MemoryError("build_strategy_memory: instances must carry futures");

    BuildResult result;
    result.instances = instances.size();
    result.memory.distance_config = library.distance_config;
    result.memory.update_policy = params.policy;
    result.memory.target_channel = roles.target;
    result.memory.eta = params.eta;
    result.memory.K = params.K;
    result.memory.seed = params.seed;

    const RetrievalResult no_retrieval;  // memory is being built; nothing to retrieve yet

    std::vector<InstanceOutcome> outcomes(instances.size());
    par::index_for(instances.size(), params.workers, [&](std::size_t wi) {
        const Window& window = instances[wi];
        const Matrix truth = Matrix::column(window.future->col(roles.target));

        workflow::PlanRequest plan_req;
        plan_req.window = &window;
        plan_req.roles = roles;
        plan_req.mode = toolkit::Mode::train;
        plan_req.arch = workflow::Arch::full;
        plan_req.retrieved = &no_retrieval;
        plan_req.context = workflow::build_plan_context(window, roles, no_retrieval, {},
                                                        toolkit::Mode::train);
        const ToolSchedule base_schedule =
            workflow::sanitize_schedule(adapter.plan(plan_req), toolkit::Mode::train);

        InstanceOutcome& outcome = outcomes[wi];
        CandidateOutcome best;
        for (std::size_t path = 0; path < params.K_explore; ++path) {
            // Path 0 is the unperturbed plan.
            ToolSchedule schedule =
                path == 0 ? base_schedule
                          : workflow::sanitize_schedule(
                                perturb_schedule(base_schedule, roles,
                                                 mix(params.seed, window.origin_index, path)),
                                toolkit::Mode::train);
            ++outcome.tried;

            workflow::ActionResult actions = workflow::execute_actions(
                schedule, window, roles, &library, &model_pool, params.toolkit,
                toolkit::Mode::train);

            const pool::EnsembleBaseline* baseline =
                actions.baseline ? &*actions.baseline : nullptr;
            workflow::ForecastRequest fc_req;
            fc_req.window = &window;
            fc_req.roles = roles;
            fc_req.horizon = window.H;
            fc_req.baseline = baseline;
            fc_req.evidence = &actions.evidence;
            fc_req.retrieved = &no_retrieval;
            fc_req.context = workflow::build_forecast_context(window, roles, baseline,
                                                              actions.evidence, no_retrieval, {},
                                                              window.H);
            fc_req.beta_trend = params.beta_trend;
            fc_req.flat_threshold = params.toolkit.flat_threshold;
            const std::string response = adapter.forecast(fc_req);

            std::string format_error;
            auto candidate = workflow::parse_candidate(response, window.H, &format_error);
            const workflow::ReflectionResult verdict =
                workflow::reflect(candidate, response, format_error, actions.evidence, roles,
                                  window.H, params.toolkit.kappa, adapter, nullptr);
            if (verdict.v != 1) continue;  // strict format/logic validation gate
            ++outcome.valid;

            const double err = mse(*candidate, truth);
            if (!best.valid || err < best.mse_value) {
                best.valid = true;
                best.schedule = schedule;
                best.evidence = actions.evidence;
                best.response = response;
                best.forecast = *candidate;
                best.prompt = fc_req.context;
                best.mse_value = err;
            }
        }

        if (best.valid) {
            outcome.has_entry = true;
            outcome.entry.lookback = window.lookback;
            outcome.entry.schedule = best.schedule;
            outcome.entry.evidence = best.evidence;
            outcome.entry.response_text = best.response;
            outcome.entry.forecast = best.forecast;
            outcome.entry.achieved_mse = best.mse_value;
            outcome.entry.prompt = best.prompt;
        }
    });

    // Serial insertion in instance order keeps snapshots reproducible.
    for (auto& outcome : outcomes) {
        result.candidates_tried += outcome.tried;
        result.candidates_valid += outcome.valid;
        if (outcome.has_entry)
            update(result.memory, std::move(outcome.entry), params.policy, params.eta_merge);
        else
            ++result.skipped;
    }
    return result;
}

}  // namespace castflow::memory
