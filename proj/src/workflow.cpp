#include "castflow/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace castflow::workflow {

std::string to_string(Arch a) {
    switch (a) {
        case Arch::agent_only: return "agent-only";
        case Arch::anchorer_only: return "anchorer-only";
        case Arch::full: return "full";
    }
    return "full";
}

Arch arch_from_string(const std::string& s) {
    if (s == "agent-only" || s == "agent_only") return Arch::agent_only;
    if (s == "anchorer-only" || s == "anchorer_only") return Arch::anchorer_only;
    if (s == "full") return Arch::full;
    throw ConfigError("unknown architecture mode: " + s);
}

// ============================================================================
// Scheduling
// ============================================================================

memory::ToolSchedule default_schedule(const ChannelRoles& roles, toolkit::Mode mode) {
    using toolkit::ToolId;
    memory::ToolSchedule s;
    s.mandatory = {ToolId::model_auxiliary, ToolId::exogenous_analysis};
    s.optional_tools = {ToolId::comprehensive_feature, ToolId::trend_analysis,
                        ToolId::changepoint_trend, ToolId::event_summary};
    if (!roles.exogenous.empty()) s.optional_tools.push_back(ToolId::cross_channel);
    if (mode == toolkit::Mode::train) s.optional_tools.push_back(ToolId::autoregressive_residual);
    s.rationale = "rule-based default schedule";
    return s;
}

memory::ToolSchedule sanitize_schedule(memory::ToolSchedule schedule, toolkit::Mode mode) {
    using toolkit::ToolId;
    memory::ToolSchedule out;
    out.rationale = schedule.rationale;
    out.mandatory = {ToolId::model_auxiliary, ToolId::exogenous_analysis};
    auto is_mandatory = [](ToolId id) {
        return id == ToolId::model_auxiliary || id == ToolId::exogenous_analysis;
    };
    for (ToolId id : schedule.ordered()) {
        if (is_mandatory(id)) continue;
        if (mode == toolkit::Mode::test && id == ToolId::autoregressive_residual) continue;
        if (std::find(out.optional_tools.begin(), out.optional_tools.end(), id) !=
            out.optional_tools.end())
            continue;
        out.optional_tools.push_back(id);
    }
    out.validate(mode);
    return out;
}

// ============================================================================
// Action execution
// ============================================================================

ActionResult execute_actions(const memory::ToolSchedule& schedule, const Window& window,
                             const ChannelRoles& roles, const pool::CaseLibrary* library,
                             const pool::ModelPool* model_pool, const toolkit::ToolkitParams& params,
                             toolkit::Mode mode) {
    using toolkit::ToolId;
    using Status = memory::ToolInvocation::Status;

    ActionResult result;
    auto& ev = result.evidence;
    const std::size_t max_lag = toolkit::effective_max_lag(params, window.L, window.H);

    for (ToolId id : schedule.ordered()) {
        memory::ToolInvocation inv;
        inv.tool = id;
        try {
            switch (id) {
                case ToolId::model_auxiliary:
                    if (!library || !model_pool)
                        throw EnsembleError("model_auxiliary: case library unavailable");
                    ev.baseline = pool::anchor_forecast(window, *library, *model_pool);
                    result.baseline = ev.baseline;
                    break;
                case ToolId::statistical_analysis:
                    ev.statistical = toolkit::statistical_analysis(window);
                    break;
                case ToolId::basic_statistics:
                    ev.basic = toolkit::basic_statistics(window);
                    break;
                case ToolId::data_quality:
                    ev.quality = toolkit::data_quality(window, roles, params.kappa,
                                                       params.dropout_threshold);
                    break;
                case ToolId::comprehensive_feature:
                    ev.state = toolkit::comprehensive_feature(window, roles, params.kappa,
                                                              params.dropout_threshold);
                    break;
                case ToolId::trend_analysis:
                    ev.trend = toolkit::trend_analysis(window, roles);
                    break;
                case ToolId::changepoint_trend:
                    ev.changepoints =
                        toolkit::changepoint_trend(window, roles, params.changepoint_sensitivity);
                    break;
                case ToolId::cross_channel:
                    ev.cross_channel = toolkit::cross_channel(window, roles, max_lag);
                    break;
                case ToolId::exogenous_analysis:
                    ev.exogenous = toolkit::exogenous_analysis(window, roles, max_lag);
                    break;
                case ToolId::event_summary:
                    ev.event = toolkit::event_summary(window, roles, params.flat_threshold,
                                                      params.osc_threshold);
                    break;
                case ToolId::autoregressive_residual: {
                    auto rep = toolkit::autoregressive_residual(window, roles, params.p_max, mode);
                    if (rep) {
                        ev.residual = std::move(rep);
                    } else {
                        inv.status = Status::bypassed;
                        inv.detail = "train-only tool bypassed in test mode";
                    }
                    break;
                }
            }
        } catch (const Error& e) {
            // One broken diagnostic must not sink the run.
            inv.status = Status::failed;
            inv.detail = e.what();
        }
        ev.tool_invocations.push_back(std::move(inv));
    }
    return result;
}

// ============================================================================
// Context rendering
// ============================================================================

namespace {

constexpr const char* kContextVersion = "ctx-v1";

std::string render_series_block(const Window& window, const ChannelRoles& roles) {
    std::ostringstream out;
    const auto target = window.lookback.col(roles.target);
    out << "[series]\n";
    out << "target=" << (roles.target < roles.names.size() ? roles.names[roles.target] : "target")
        << " L=" << window.L << " H=" << window.H << "\n";
    out << "lookback:";
    for (double v : target) out << " " << num_to_string(v);
    out << "\n";
    return out.str();
}

std::string render_retrieved_block(const memory::RetrievalResult& retrieved) {
    std::ostringstream out;
    out << "[retrieved_strategies]\n";
    if (retrieved.entries.empty()) {
        out << "none\n";
        return out.str();
    }
    for (const auto& scored : retrieved.entries) {
        out << "entry=" << scored.entry->id << " sim=" << num_to_string(scored.similarity)
            << " achieved_mse=" << num_to_string(scored.entry->achieved_mse) << " schedule "
            << scored.entry->schedule.to_prompt_line() << "\n";
    }
    return out.str();
}

std::string render_feedback_block(const std::vector<std::string>& feedback) {
    if (feedback.empty()) return "";
    std::ostringstream out;
    out << "[reflection_feedback]\n";
    for (const auto& f : feedback) out << f << "\n";
    return out.str();
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    // splitmix64 step over the combined value
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::string build_plan_context(const Window& window, const ChannelRoles& roles,
                               const memory::RetrievalResult& retrieved,
                               const std::vector<std::string>& feedback, toolkit::Mode mode) {
    std::ostringstream out;
    out << "[castflow_plan " << kContextVersion << "]\n";
    out << "mode=" << toolkit::to_string(mode) << "\n";
    out << render_series_block(window, roles);
    out << render_retrieved_block(retrieved);
    out << render_feedback_block(feedback);
    out << "[task]\n";
    out << "Select the diagnostic tool schedule as JSON with fields mandatory, optional, "
           "rationale.\n";
    return out.str();
}

std::string build_forecast_context(const Window& window, const ChannelRoles& roles,
                                   const pool::EnsembleBaseline* baseline,
                                   const memory::DiagnosticEvidence& evidence,
                                   const memory::RetrievalResult& retrieved,
                                   const std::vector<std::string>& feedback, std::size_t horizon) {
    std::ostringstream out;
    out << "[castflow_forecast " << kContextVersion << "]\n";
    out << render_series_block(window, roles);

    if (baseline) {
        out << "[evidence]\n" << evidence.to_prompt_text(roles);
    } else {
        // Agent-only mode: evidence minus the ensemble baseline block.
        memory::DiagnosticEvidence stripped = evidence;
        stripped.baseline.reset();
        out << "[evidence]\n" << stripped.to_prompt_text(roles);
    }
    out << render_retrieved_block(retrieved);
    out << render_feedback_block(feedback);
    out << "[task]\n";
    out << "Produce reasoning, then a fenced block with exactly " << horizon
        << " comma-separated rows, one forecast value per horizon step.\n";
    return out.str();
}

// ============================================================================
// Candidate parsing
// ============================================================================

namespace {

std::optional<std::vector<double>> parse_number_row(const std::string& line) {
    std::vector<double> vals;
    std::string cur;
    auto flush = [&]() -> bool {
        if (cur.empty()) return true;
        try {
            std::size_t pos = 0;
            const double v = std::stod(cur, &pos);
            while (pos < cur.size() && std::isspace(static_cast<unsigned char>(cur[pos]))) ++pos;
            if (pos != cur.size()) return false;
            vals.push_back(v);
            return true;
        } catch (...) {
            return false;
        }
    };
    for (char ch : line) {
        if (ch == ',') {
            if (!flush()) return std::nullopt;
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!flush()) return std::nullopt;
    if (vals.empty()) return std::nullopt;
    return vals;
}

std::optional<Matrix> rows_to_candidate(const std::vector<std::vector<double>>& rows,
                                        std::size_t horizon, std::string* error) {
    std::vector<double> flat;
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    if (flat.size() != horizon) {
        if (error)
            *error = "expected " + std::to_string(horizon) + " values, found " +
                     std::to_string(flat.size());
        return std::nullopt;
    }
    for (double v : flat) {
        if (!std::isfinite(v)) {
            if (error) *error = "non-finite forecast value";
            return std::nullopt;
        }
    }
    return Matrix::column(flat);
}

}  // namespace

std::optional<Matrix> parse_candidate(const std::string& response, std::size_t horizon,
                                      std::string* error) {
    // Preferred grammar: the last fenced block, one comma-separated row per
    // horizon step.
    std::vector<std::pair<std::size_t, std::size_t>> fences;
    std::size_t pos = 0;
    while (true) {
        const std::size_t open = response.find("```", pos);
        if (open == std::string::npos) break;
        const std::size_t body = response.find('\n', open);
        if (body == std::string::npos) break;
        const std::size_t close = response.find("```", body);
        if (close == std::string::npos) break;
        fences.emplace_back(body + 1, close);
        pos = close + 3;
    }
    if (!fences.empty()) {
        const auto [begin, end] = fences.back();
        std::istringstream in(response.substr(begin, end - begin));
        std::string line;
        std::vector<std::vector<double>> rows;
        while (std::getline(in, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            auto row = parse_number_row(line);
            if (!row) {
                if (error) *error = "unparseable row in fenced block: '" + line + "'";
                return std::nullopt;
            }
            rows.push_back(std::move(*row));
        }
        return rows_to_candidate(rows, horizon, error);
    }

    // Alternate encoding: a JSON object carrying a "values" array.
    const std::size_t obj_begin = response.find('{');
    const std::size_t obj_end = response.rfind('}');
    if (obj_begin != std::string::npos && obj_end != std::string::npos && obj_end > obj_begin) {
        try {
            const ojson j = ojson::parse(response.substr(obj_begin, obj_end - obj_begin + 1));
            if (j.contains("values") && j["values"].is_array()) {
                std::vector<std::vector<double>> rows;
                for (const auto& item : j["values"]) {
                    if (item.is_array()) {
                        std::vector<double> row;
                        for (const auto& v : item) row.push_back(v.get<double>());
                        rows.push_back(std::move(row));
                    } else {
                        rows.push_back({item.get<double>()});
                    }
                }
                return rows_to_candidate(rows, horizon, error);
            }
        } catch (...) {
            // fall through to the failure path
        }
    }

    if (error) *error = "no fenced numeric block or values object found";
    return std::nullopt;
}

// ============================================================================
// Reflection
// ============================================================================

ReflectionResult reflect(const std::optional<Matrix>& candidate, const std::string& response_text,
                         const std::string& format_error, const memory::DiagnosticEvidence& evidence,
                         const ChannelRoles& roles, std::size_t horizon, double kappa,
                         PolicyAdapter& adapter, std::vector<std::string>* transcript_sink) {
    ReflectionResult result;
    result.format_ok = candidate.has_value() && candidate->rows() == horizon;
    if (!result.format_ok) {
        result.logic_ok = false;
        result.v = 0;
        result.feedback = "format check failed: " + format_error;
        return result;
    }

    ReflectRequest req;
    req.candidate = &*candidate;
    req.response_text = response_text;
    req.evidence = &evidence;
    req.roles = roles;
    req.horizon = horizon;
    req.kappa = kappa;
    req.transcript_sink = transcript_sink;
    const LogicVerdict verdict = adapter.reflect(req);
    result.logic_ok = verdict.ok;
    result.v = result.format_ok && result.logic_ok ? 1 : 0;
    if (!verdict.ok) result.feedback = verdict.feedback;
    return result;
}

// ============================================================================
// Fallback and diagnostics
// ============================================================================

Forecast fallback_forecast(const Window& window, std::size_t horizon, std::size_t target_channel) {
    const auto xs = window.lookback.col(target_channel);
    double sum = 0;
    std::size_t count = 0;
    for (double v : xs) {
        if (is_missing(v)) continue;
        sum += v;
        ++count;
    }
    if (count == 0) throw WorkflowError("fallback_forecast: unforecastable (all target values missing)");
    Forecast f;
    f.values = Matrix(horizon, 1, sum / static_cast<double>(count));
    f.produced_by = Provenance::fallback;
    return f;
}

std::pair<double, double> refinement_decomposition(const Matrix& truth, const Matrix& base,
                                                   const Matrix& refined) {
    if (!truth.same_shape(base) || !truth.same_shape(refined))
        throw MetricError("refinement_decomposition: shape mismatch");
    double err_refined = 0, err_base = 0, delta_norm = 0, cross = 0;
    for (std::size_t i = 0; i < truth.data().size(); ++i) {
        const double y = truth.data()[i];
        const double b = base.data()[i];
        const double r = refined.data()[i];
        err_refined += (r - y) * (r - y);
        err_base += (b - y) * (b - y);
        const double delta = r - b;
        delta_norm += delta * delta;
        cross += (y - b) * delta;
    }
    return {err_refined - err_base, delta_norm - 2.0 * cross};
}

// ============================================================================
// The workflow loop
// ============================================================================

RunResult run_forecast(const Window& window, const ChannelRoles& roles, const RunInputs& inputs,
                       PolicyAdapter& adapter, const WorkflowConfig& config,
                       std::uint64_t sample_seed) {
    Trajectory traj;
    traj.origin_index = window.origin_index;
    traj.mode = config.mode;
    traj.arch = config.arch;
    traj.planner_id = adapter.planner_id();
    traj.forecaster_id = adapter.forecaster_id();
    traj.reflector_id = adapter.reflector_id();

    std::vector<std::string>* sink = config.debug_transcripts ? &traj.transcripts : nullptr;

    try {
        // Anchorer-only: the ensemble baseline is the final forecast and no
        // policy role is ever invoked.
        if (config.arch == Arch::anchorer_only) {
            memory::ToolSchedule schedule;
            schedule.mandatory = {toolkit::ToolId::model_auxiliary,
                                  toolkit::ToolId::exogenous_analysis};
            schedule.rationale = "anchorer-only architecture";
            ActionResult actions = execute_actions(schedule, window, roles, inputs.library,
                                                   inputs.pool, config.toolkit, config.mode);
            traj.evidence = std::move(actions.evidence);
            traj.baseline = actions.baseline;
            if (!traj.baseline)
                throw WorkflowError("anchorer-only run failed: ensemble baseline unavailable");
            traj.steps.push_back({"ensemble baseline from cluster " +
                                      std::to_string(traj.baseline->source_cluster),
                                  "anchor"});
            traj.final_forecast = Forecast{traj.baseline->values, Provenance::baseline};
            return RunResult{traj.final_forecast, std::move(traj)};
        }

        WorkflowState state;
        state.window = &window;
        state.mode = config.mode;
        if (inputs.strategy_memory) {
            state.retrieved = memory::retrieve(*inputs.strategy_memory,
                                               window.lookback.col(roles.target), config.memory_K,
                                               config.memory_eta);
        }
        traj.retrieved_count = state.retrieved.entries.size();
        if (!state.retrieved.entries.empty())
            traj.retrieved_max_similarity = state.retrieved.entries.front().similarity;

        // every state observation also lands in the trajectory record
        auto step = [&](std::string summary, std::string action) {
            traj.steps.push_back({summary, std::move(action)});
            state.observe(std::move(summary));
        };
        step("retrieved " + std::to_string(state.retrieved.entries.size()) + " strategies",
             "retrieve");

        std::vector<std::string> feedback;
        std::optional<Forecast> accepted;

        while (state.retry_count < config.C_max && !accepted) {
            PlanRequest plan_req;
            plan_req.window = &window;
            plan_req.roles = roles;
            plan_req.mode = config.mode;
            plan_req.arch = config.arch;
            plan_req.retrieved = &state.retrieved;
            plan_req.feedback = feedback;
            plan_req.context =
                build_plan_context(window, roles, state.retrieved, feedback, config.mode);
            plan_req.transcript_sink = sink;
            memory::ToolSchedule schedule = sanitize_schedule(adapter.plan(plan_req), config.mode);
            ++traj.policy_calls;
            step("schedule " + schedule.to_prompt_line(), "plan");

            ActionResult actions = execute_actions(schedule, window, roles, inputs.library,
                                                   inputs.pool, config.toolkit, config.mode);
            traj.evidence = actions.evidence;
            if (actions.baseline) {
                state.baseline = actions.baseline;
                traj.baseline = actions.baseline;
            }
            step(actions.baseline ? "baseline ready" : "baseline unavailable", "execute_tools");

            const pool::EnsembleBaseline* ctx_baseline =
                config.arch == Arch::agent_only
                    ? nullptr
                    : (actions.baseline ? &*actions.baseline : nullptr);

            ForecastRequest fc_req;
            fc_req.window = &window;
            fc_req.roles = roles;
            fc_req.horizon = window.H;
            fc_req.baseline = ctx_baseline;
            fc_req.evidence = &actions.evidence;
            fc_req.retrieved = &state.retrieved;
            fc_req.feedback = feedback;
            fc_req.context = build_forecast_context(window, roles, ctx_baseline, actions.evidence,
                                                    state.retrieved, feedback, window.H);
            fc_req.beta_trend = config.beta_trend;
            fc_req.flat_threshold = config.toolkit.flat_threshold;
            fc_req.sample_seed =
                sample_seed == 0 ? 0 : mix_seed(sample_seed, window.origin_index);
            fc_req.transcript_sink = sink;
            const std::string response = adapter.forecast(fc_req);
            ++traj.policy_calls;

            std::string format_error;
            std::optional<Matrix> candidate = parse_candidate(response, window.H, &format_error);
            step(candidate ? "candidate parsed" : "candidate unparseable: " + format_error,
                 "forecast");

            ReflectionResult verdict =
                reflect(candidate, response, format_error, actions.evidence, roles, window.H,
                        config.toolkit.kappa, adapter, sink);
            if (candidate) ++traj.policy_calls;
            step("verdict v=" + std::to_string(verdict.v) +
                     (verdict.v ? "" : " feedback: " + verdict.feedback),
                 "reflect");

            Attempt rec;
            rec.schedule = schedule;
            rec.context = fc_req.context;
            rec.response_text = response;
            rec.candidate = candidate;
            rec.verdict = verdict;
            traj.attempts.push_back(std::move(rec));

            if (verdict.v == 1) {
                accepted = Forecast{*candidate, Provenance::refined};
            } else {
                feedback.push_back(verdict.feedback);
                ++state.retry_count;
            }
        }

        if (accepted) {
            traj.final_forecast = *accepted;
        } else {
            traj.final_forecast = fallback_forecast(window, window.H, roles.target);
            traj.fallback = true;
            step("retries exhausted, mean imputation", "fallback");
        }
        return RunResult{traj.final_forecast, std::move(traj)};
    } catch (const WorkflowRunError&) {
        throw;
    } catch (const Error& e) {
        throw WorkflowRunError(e.what(), std::move(traj));
    }
}

// ============================================================================
// Serialization
// ============================================================================

ojson ReflectionResult::to_json() const {
    ojson j;
    j["format_ok"] = format_ok;
    j["logic_ok"] = logic_ok;
    j["v"] = v;
    j["feedback"] = feedback;
    return j;
}

ReflectionResult ReflectionResult::from_json(const ojson& j) {
    ReflectionResult r;
    r.format_ok = j.at("format_ok").get<bool>();
    r.logic_ok = j.at("logic_ok").get<bool>();
    r.v = j.at("v").get<int>();
    r.feedback = j.at("feedback").get<std::string>();
    return r;
}

ojson Trajectory::to_json() const {
    ojson j;
    j["schema_version"] = 1;
    j["origin_index"] = origin_index;
    j["mode"] = toolkit::to_string(mode);
    j["arch"] = workflow::to_string(arch);
    j["planner"] = planner_id;
    j["forecaster"] = forecaster_id;
    j["reflector"] = reflector_id;
    j["retrieved_count"] = retrieved_count;
    j["retrieved_max_similarity"] = retrieved_max_similarity;
    j["policy_calls"] = policy_calls;

    ojson steps_json = ojson::array();
    for (const auto& s : steps) {
        ojson js;
        js["state"] = s.state_summary;
        js["action"] = s.action;
        steps_json.push_back(std::move(js));
    }
    j["steps"] = std::move(steps_json);

    ojson attempts_json = ojson::array();
    for (const auto& a : attempts) {
        ojson ja;
        ja["schedule"] = a.schedule.to_json();
        ja["context"] = a.context;
        ja["response"] = a.response_text;
        ja["candidate"] = a.candidate ? matrix_to_json(*a.candidate) : ojson(nullptr);
        ja["verdict"] = a.verdict.to_json();
        attempts_json.push_back(std::move(ja));
    }
    j["attempts"] = std::move(attempts_json);

    j["evidence"] = evidence.to_json();
    j["baseline"] = baseline ? baseline->to_json() : ojson(nullptr);
    j["final_forecast"] = matrix_to_json(final_forecast.values);
    j["produced_by"] = castflow::to_string(final_forecast.produced_by);
    j["fallback"] = fallback;
    if (decomposition) {
        j["decomposition_lhs"] = decomposition->first;
        j["decomposition_rhs"] = decomposition->second;
    } else {
        j["decomposition_lhs"] = nullptr;
        j["decomposition_rhs"] = nullptr;
    }
    j["transcripts"] = transcripts;
    return j;
}

}  // namespace castflow::workflow
