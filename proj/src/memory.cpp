#include "castflow/memory.hpp"

#include <algorithm>
#include <sstream>

namespace castflow::memory {

std::string to_string(UpdatePolicy p) { return p == UpdatePolicy::append ? "append" : "merge"; }

UpdatePolicy update_policy_from_string(const std::string& s) {
    if (s == "append") return UpdatePolicy::append;
    if (s == "merge") return UpdatePolicy::merge;
    throw ConfigError("unknown update policy: " + s);
}

std::string to_string(ToolInvocation::Status s) {
    switch (s) {
        case ToolInvocation::Status::ok: return "ok";
        case ToolInvocation::Status::failed: return "failed";
        case ToolInvocation::Status::bypassed: return "bypassed";
    }
    return "ok";
}

namespace {

ToolInvocation::Status status_from_string(const std::string& s) {
    if (s == "ok") return ToolInvocation::Status::ok;
    if (s == "failed") return ToolInvocation::Status::failed;
    if (s == "bypassed") return ToolInvocation::Status::bypassed;
    throw Error("unknown invocation status: " + s);
}

}  // namespace

// ============================================================================
// DiagnosticEvidence
// ============================================================================

bool DiagnosticEvidence::slot_populated(toolkit::ToolId id) const {
    using toolkit::ToolId;
    switch (id) {
        case ToolId::model_auxiliary: return baseline.has_value();
        case ToolId::statistical_analysis: return statistical.has_value();
        case ToolId::basic_statistics: return basic.has_value();
        case ToolId::data_quality: return quality.has_value();
        case ToolId::comprehensive_feature: return state.has_value();
        case ToolId::trend_analysis: return trend.has_value();
        case ToolId::changepoint_trend: return changepoints.has_value();
        case ToolId::cross_channel: return cross_channel.has_value();
        case ToolId::exogenous_analysis: return exogenous.has_value();
        case ToolId::event_summary: return event.has_value();
        case ToolId::autoregressive_residual: return residual.has_value();
    }
    return false;
}

std::optional<std::pair<double, double>> DiagnosticEvidence::clip_bounds(
    std::size_t target_channel) const {
    if (quality && quality->bounds_defined)
        return std::make_pair(quality->clip_low, quality->clip_high);
    if (state && target_channel < state->channels.size())
        return std::make_pair(state->channels[target_channel].clip_low,
                              state->channels[target_channel].clip_high);
    return std::nullopt;
}

std::string DiagnosticEvidence::to_prompt_text(const ChannelRoles& roles) const {
    // Fixed slot order keeps rendered evidence reproducible.
    std::ostringstream out;
    if (baseline) out << baseline->to_prompt_block();
    if (exogenous) out << exogenous->to_prompt_block(roles);
    if (statistical) out << statistical->to_prompt_block(roles);
    if (basic) out << basic->to_prompt_block(roles);
    if (quality) out << quality->to_prompt_block(roles);
    if (state) out << state->to_prompt_block(roles);
    if (trend) out << trend->to_prompt_block(roles);
    if (changepoints) out << changepoints->to_prompt_block(roles);
    if (cross_channel) out << cross_channel->to_prompt_block(roles);
    if (event) out << event->to_prompt_block(roles);
    if (residual) out << residual->to_prompt_block(roles);
    return out.str();
}

ojson DiagnosticEvidence::to_json() const {
    ojson j;
    j["statistical"] = statistical ? statistical->to_json() : ojson(nullptr);
    j["basic"] = basic ? basic->to_json() : ojson(nullptr);
    j["quality"] = quality ? quality->to_json() : ojson(nullptr);
    j["state"] = state ? state->to_json() : ojson(nullptr);
    j["trend"] = trend ? trend->to_json() : ojson(nullptr);
    j["changepoints"] = changepoints ? changepoints->to_json() : ojson(nullptr);
    j["cross_channel"] = cross_channel ? cross_channel->to_json() : ojson(nullptr);
    j["exogenous"] = exogenous ? exogenous->to_json() : ojson(nullptr);
    j["event"] = event ? event->to_json() : ojson(nullptr);
    j["residual"] = residual ? residual->to_json() : ojson(nullptr);
    j["baseline"] = baseline ? baseline->to_json() : ojson(nullptr);
    ojson inv = ojson::array();
    for (const auto& t : tool_invocations) {
        ojson ji;
        ji["tool"] = toolkit::to_string(t.tool);
        ji["status"] = to_string(t.status);
        ji["detail"] = t.detail;
        inv.push_back(std::move(ji));
    }
    j["tool_invocations"] = std::move(inv);
    return j;
}

DiagnosticEvidence DiagnosticEvidence::from_json(const ojson& j) {
    DiagnosticEvidence e;
    if (!j.at("statistical").is_null())
        e.statistical = toolkit::StatProfile::from_json(j.at("statistical"));
    if (!j.at("basic").is_null()) e.basic = toolkit::StatProfile::from_json(j.at("basic"));
    if (!j.at("quality").is_null()) e.quality = toolkit::QualityReport::from_json(j.at("quality"));
    if (!j.at("state").is_null()) e.state = toolkit::DiagnosticState::from_json(j.at("state"));
    if (!j.at("trend").is_null()) e.trend = toolkit::DynamicsReport::from_json(j.at("trend"));
    if (!j.at("changepoints").is_null())
        e.changepoints = toolkit::DynamicsReport::from_json(j.at("changepoints"));
    if (!j.at("cross_channel").is_null())
        e.cross_channel = toolkit::CrossChannelReport::from_json(j.at("cross_channel"));
    if (!j.at("exogenous").is_null())
        e.exogenous = toolkit::ExogenousSummary::from_json(j.at("exogenous"));
    if (!j.at("event").is_null()) e.event = toolkit::EventSummary::from_json(j.at("event"));
    if (!j.at("residual").is_null())
        e.residual = toolkit::ResidualReport::from_json(j.at("residual"));
    if (!j.at("baseline").is_null())
        e.baseline = pool::EnsembleBaseline::from_json(j.at("baseline"));
    for (const auto& ji : j.at("tool_invocations")) {
        ToolInvocation t;
        t.tool = toolkit::tool_from_string(ji.at("tool").get<std::string>());
        t.status = status_from_string(ji.at("status").get<std::string>());
        t.detail = ji.at("detail").get<std::string>();
        e.tool_invocations.push_back(std::move(t));
    }
    return e;
}

// ============================================================================
// ToolSchedule
// ============================================================================

std::vector<toolkit::ToolId> ToolSchedule::ordered() const {
    std::vector<toolkit::ToolId> out = mandatory;
    out.insert(out.end(), optional_tools.begin(), optional_tools.end());
    return out;
}

bool ToolSchedule::contains(toolkit::ToolId id) const {
    const auto in = [&](const std::vector<toolkit::ToolId>& v) {
        return std::find(v.begin(), v.end(), id) != v.end();
    };
    return in(mandatory) || in(optional_tools);
}

void ToolSchedule::validate(toolkit::Mode mode) const {
    const auto all = ordered();
    for (std::size_t i = 0; i < all.size(); ++i)
        for (std::size_t j = i + 1; j < all.size(); ++j)
            if (all[i] == all[j])
                throw WorkflowError("ToolSchedule: duplicate tool " + toolkit::to_string(all[i]));
    const auto has_mandatory = [&](toolkit::ToolId id) {
        return std::find(mandatory.begin(), mandatory.end(), id) != mandatory.end();
    };
    if (!has_mandatory(toolkit::ToolId::model_auxiliary) ||
        !has_mandatory(toolkit::ToolId::exogenous_analysis))
        throw WorkflowError("ToolSchedule: mandatory set must include the anchorer and exogenous analysis");
    if (mode == toolkit::Mode::test && contains(toolkit::ToolId::autoregressive_residual))
        throw WorkflowError("ToolSchedule: residual diagnoser is train-only");
}

std::string ToolSchedule::to_prompt_line() const {
    std::ostringstream out;
    out << "mandatory=";
    for (std::size_t i = 0; i < mandatory.size(); ++i) {
        if (i) out << ",";
        out << toolkit::to_string(mandatory[i]);
    }
    out << " optional=";
    for (std::size_t i = 0; i < optional_tools.size(); ++i) {
        if (i) out << ",";
        out << toolkit::to_string(optional_tools[i]);
    }
    return out.str();
}

ojson ToolSchedule::to_json() const {
    ojson j;
    ojson m = ojson::array(), o = ojson::array();
    for (auto id : mandatory) m.push_back(toolkit::to_string(id));
    for (auto id : optional_tools) o.push_back(toolkit::to_string(id));
    j["mandatory"] = std::move(m);
    j["optional"] = std::move(o);
    j["rationale"] = rationale;
    return j;
}

ToolSchedule ToolSchedule::from_json(const ojson& j) {
    ToolSchedule s;
    for (const auto& t : j.at("mandatory"))
        s.mandatory.push_back(toolkit::tool_from_string(t.get<std::string>()));
    for (const auto& t : j.at("optional"))
        s.optional_tools.push_back(toolkit::tool_from_string(t.get<std::string>()));
    s.rationale = j.at("rationale").get<std::string>();
    return s;
}

// ============================================================================
// MemoryEntry
// ============================================================================

ojson MemoryEntry::to_json() const {
    ojson j;
    j["id"] = id;
    j["lookback"] = matrix_to_json(lookback);
    j["schedule"] = schedule.to_json();
    j["evidence"] = evidence.to_json();
    j["response"] = response_text;
    j["forecast"] = matrix_to_json(forecast);
    j["achieved_mse"] = achieved_mse;
    j["prompt"] = prompt;
    return j;
}

MemoryEntry MemoryEntry::from_json(const ojson& j) {
    MemoryEntry e;
    e.id = j.at("id").get<std::uint64_t>();
    e.lookback = matrix_from_json(j.at("lookback"));
    e.schedule = ToolSchedule::from_json(j.at("schedule"));
    e.evidence = DiagnosticEvidence::from_json(j.at("evidence"));
    e.response_text = j.at("response").get<std::string>();
    e.forecast = matrix_from_json(j.at("forecast"));
    e.achieved_mse = j.at("achieved_mse").get<double>();
    e.prompt = j.at("prompt").get<std::string>();
    return e;
}

// ============================================================================
// Retrieval and updates
// ============================================================================

RetrievalResult retrieve(const StrategyMemory& memory, const std::vector<double>& query_lookback,
                         std::size_t K, double eta) {
    RetrievalResult result;
    result.query = query_lookback;

    std::vector<ScoredEntry> scored;
    for (const auto& entry : memory.entries) {
        const auto seq = entry.lookback.col(memory.target_channel);
        if (seq.size() != query_lookback.size()) continue;
        const double sim = similarity(query_lookback, seq, memory.distance_config);
        if (sim >= eta) scored.push_back(ScoredEntry{&entry, sim});
    }
    // Stable sort keeps insertion order under ties.
    std::stable_sort(scored.begin(), scored.end(),
                     [](const ScoredEntry& a, const ScoredEntry& b) {
                         return a.similarity > b.similarity;
                     });
    if (scored.size() > K) scored.resize(K);
    result.entries = std::move(scored);
    return result;
}

void update(StrategyMemory& memory, MemoryEntry entry, UpdatePolicy policy, double eta_merge) {
    entry.id = memory.next_id++;
    if (policy == UpdatePolicy::merge && !memory.entries.empty()) {
        const auto query = entry.lookback.col(memory.target_channel);
        std::size_t best = memory.entries.size();
        double best_sim = -1;
        for (std::size_t i = 0; i < memory.entries.size(); ++i) {
            const auto seq = memory.entries[i].lookback.col(memory.target_channel);
            if (seq.size() != query.size()) continue;
            const double sim = similarity(query, seq, memory.distance_config);
            if (sim > best_sim) {
                best_sim = sim;
                best = i;
            }
        }
        if (best < memory.entries.size() && best_sim >= eta_merge) {
            MemoryEntry& kept = memory.entries[best];
            // Fuse: the lower-error trajectory wins, lookbacks average.
            if (entry.achieved_mse < kept.achieved_mse) {
                kept.schedule = entry.schedule;
                kept.evidence = entry.evidence;
                kept.response_text = entry.response_text;
                kept.forecast = entry.forecast;
                kept.achieved_mse = entry.achieved_mse;
                kept.prompt = entry.prompt;
            }
            if (kept.lookback.same_shape(entry.lookback)) {
                for (std::size_t i = 0; i < kept.lookback.data().size(); ++i)
                    kept.lookback.data()[i] =
                        0.5 * (kept.lookback.data()[i] + entry.lookback.data()[i]);
            }
            return;
        }
    }
    memory.entries.push_back(std::move(entry));
}

// ============================================================================
// Persistence
// ============================================================================

void StrategyMemory::save(const std::string& entries_path, const std::string& manifest_path) const {
    std::ostringstream lines;
    for (const auto& e : entries) lines << e.to_json().dump() << "\n";
    write_text_file(entries_path, lines.str());

    ojson manifest;
    manifest["schema_version"] = 1;
    manifest["distance_config"] = distance_config.to_json();
    manifest["update_policy"] = to_string(update_policy);
    manifest["target_channel"] = target_channel;
    manifest["eta"] = eta;
    manifest["K"] = K;
    manifest["seed"] = seed;
    manifest["next_id"] = next_id;
    manifest["entry_count"] = entries.size();
    write_text_file(manifest_path, manifest.dump(2) + "\n");
}

StrategyMemory StrategyMemory::load(const std::string& entries_path,
                                    const std::string& manifest_path) {
    StrategyMemory mem;
    const ojson manifest = ojson::parse(read_text_file(manifest_path));
    if (manifest.at("schema_version").get<int>() != 1)
        throw MemoryError("unsupported memory manifest schema");
    mem.distance_config = DistanceConfig::from_json(manifest.at("distance_config"));
    mem.update_policy = update_policy_from_string(manifest.at("update_policy").get<std::string>());
    mem.target_channel = manifest.at("target_channel").get<std::size_t>();
    mem.eta = manifest.at("eta").get<double>();
    mem.K = manifest.at("K").get<std::size_t>();
    mem.seed = manifest.at("seed").get<std::uint64_t>();
    mem.next_id = manifest.at("next_id").get<std::uint64_t>();

    std::istringstream in(read_text_file(entries_path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        mem.entries.push_back(MemoryEntry::from_json(ojson::parse(line)));
    }
    if (mem.entries.size() != manifest.at("entry_count").get<std::size_t>())
        throw MemoryError("memory snapshot entry count does not match manifest");
    return mem;
}

}  // namespace castflow::memory
