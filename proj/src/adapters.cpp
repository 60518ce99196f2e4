#include "castflow/adapters.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include <httplib.h>

namespace castflow::adapters {

// ============================================================================
// Mock planner
// ============================================================================

memory::ToolSchedule MockPolicyAdapter::plan(const workflow::PlanRequest& request) {
    memory::ToolSchedule schedule;
    if (request.retrieved && !request.retrieved->entries.empty()) {
        schedule = request.retrieved->entries.front().entry->schedule;
        schedule.rationale = "adopted retrieved strategy " +
                             std::to_string(request.retrieved->entries.front().entry->id);
    } else {
        schedule = workflow::default_schedule(request.roles, request.mode);
    }
    if (request.transcript_sink) {
        request.transcript_sink->push_back("PLAN REQUEST\n" + request.context);
        request.transcript_sink->push_back("PLAN RESPONSE\n" + schedule.to_json().dump());
    }
    return schedule;
}

// ============================================================================
// Mock forecaster
// ============================================================================

namespace {

double unit_from_seed(std::uint64_t seed) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;  // [0, 1)
}

double target_sigma(const memory::DiagnosticEvidence& ev, std::size_t target) {
    if (ev.state && target < ev.state->channels.size()) return ev.state->channels[target].stddev;
    if (ev.basic && target < ev.basic->channels.size()) return ev.basic->channels[target].stddev;
    if (ev.statistical && target < ev.statistical->channels.size())
        return ev.statistical->channels[target].stddev;
    return std::nan("");
}

}  // namespace

std::string MockPolicyAdapter::forecast(const workflow::ForecastRequest& request) {
    const Window& window = *request.window;
    const std::size_t H = request.horizon;
    const auto& evidence = *request.evidence;

    // Anchor: the ensemble baseline, or the last observed target value when
    // the architecture withholds it.
    std::vector<double> anchor(H, 0.0);
    std::string anchor_note;
    if (request.baseline) {
        for (std::size_t h = 0; h < H; ++h) anchor[h] = request.baseline->values(h, 0);
        anchor_note = "ensemble baseline from cluster " +
                      std::to_string(request.baseline->source_cluster);
    } else {
        const auto xs = window.lookback.col(request.roles.target);
        double last = std::nan("");
        for (double v : xs)
            if (!is_missing(v)) last = v;
        if (is_missing(last)) {
            // Nothing to anchor on; an honest refusal fails the format gate.
            const std::string refusal =
                "No ensemble baseline and no observed target values; cannot forecast.\n";
            if (request.transcript_sink) {
                request.transcript_sink->push_back("FORECAST REQUEST\n" + request.context);
                request.transcript_sink->push_back("FORECAST RESPONSE\n" + refusal);
            }
            return refusal;
        }
        std::fill(anchor.begin(), anchor.end(), last);
        anchor_note = "no baseline provided; anchoring on last observation";
    }

    std::ostringstream reasoning;
    reasoning << "Anchor: " << anchor_note << ".\n";

    // Evidence-guided correction: continue a significant trend, damp it to
    // zero after a structural break, then clip into the quality bounds.
    // Prior reflection feedback switches the candidate to the conservative
    // clipped anchor.
    double slope = 0;
    bool have_slope = false;
    if (evidence.trend) {
        slope = evidence.trend->slope;
        have_slope = true;
    } else if (evidence.changepoints) {
        slope = evidence.changepoints->slope;
        have_slope = true;
    }
    const double sigma = target_sigma(evidence, request.roles.target);
    const bool damped = evidence.changepoints && !evidence.changepoints->changepoints.empty();
    const bool conservative = !request.feedback.empty();

    bool trend_active = false;
    if (!conservative && have_slope && !std::isnan(sigma)) {
        trend_active = sigma > 0 &&
                       std::abs(slope) * static_cast<double>(window.L) >=
                           request.flat_threshold * sigma;
        if (trend_active && damped) {
            trend_active = false;
            reasoning << "Detected changepoints; damping trend continuation to zero.\n";
        }
    }

    double beta = request.beta_trend;
    if (request.sample_seed != 0) {
        beta *= 0.25 + 1.5 * unit_from_seed(request.sample_seed);
    }

    std::vector<double> values = anchor;
    if (trend_active) {
        for (std::size_t h = 0; h < H; ++h)
            values[h] += beta * slope * static_cast<double>(h + 1);
        reasoning << "Trend slope " << num_to_string(slope)
                  << " above the flat gate; applying continuation with beta "
                  << num_to_string(beta) << ".\n";
    } else if (conservative) {
        reasoning << "Reflection feedback received; returning the clipped anchor.\n";
    } else {
        reasoning << "No significant trend signal; keeping the anchor.\n";
    }

    if (request.sample_seed != 0) {
        // Rollout sampling stands in for temperature on the numeric head:
        // a seeded level shift and tilt scaled by the target's dispersion,
        // so every sample in a group is distinct yet reproducible.
        const double scale = !std::isnan(sigma) && sigma > 0 ? sigma : 1.0;
        const double level = 0.2 * scale * (2.0 * unit_from_seed(request.sample_seed ^ 0x5bd1e995ULL) - 1.0);
        const double tilt = 0.3 * scale / static_cast<double>(H) *
                            (2.0 * unit_from_seed(request.sample_seed ^ 0xc2b2ae35ULL) - 1.0);
        for (std::size_t h = 0; h < H; ++h)
            values[h] += level + tilt * static_cast<double>(h + 1);
        reasoning << "Sampled adjustment: level " << num_to_string(level) << ", tilt "
                  << num_to_string(tilt) << " per step.\n";
    }

    const auto bounds = evidence.clip_bounds(request.roles.target);
    if (bounds) {
        for (double& v : values) v = std::clamp(v, bounds->first, bounds->second);
        reasoning << "Clipping into quality bounds [" << num_to_string(bounds->first) << ", "
                  << num_to_string(bounds->second) << "].\n";
    }

    std::ostringstream out;
    out << reasoning.str() << "```\n";
    for (double v : values) out << num_to_string(v) << "\n";
    out << "```\n";

    if (request.transcript_sink) {
        request.transcript_sink->push_back("FORECAST REQUEST\n" + request.context);
        request.transcript_sink->push_back("FORECAST RESPONSE\n" + out.str());
    }
    return out.str();
}

// ============================================================================
// Mock reflector
// ============================================================================

workflow::LogicVerdict MockPolicyAdapter::reflect(const workflow::ReflectRequest& request) {
    workflow::LogicVerdict verdict;
    const Matrix& candidate = *request.candidate;
    const auto& evidence = *request.evidence;

    // Logic check 1: every value inside the kappa-widened quality bounds.
    const auto bounds = evidence.clip_bounds(request.roles.target);
    if (bounds) {
        const double center = 0.5 * (bounds->first + bounds->second);
        const double half = 0.5 * (bounds->second - bounds->first);
        const double lo = center - 2.0 * half;  // widened: kappa' = 2*kappa
        const double hi = center + 2.0 * half;
        for (std::size_t h = 0; h < candidate.rows(); ++h) {
            const double v = candidate(h, 0);
            if (v < lo || v > hi) {
                verdict.ok = false;
                verdict.feedback = "logic check failed: value " + num_to_string(v) +
                                   " at step " + std::to_string(h) +
                                   " outside widened bounds [" + num_to_string(lo) + ", " +
                                   num_to_string(hi) + "]";
                break;
            }
        }
    }

    // Logic check 2: when the trend dominates the window's variance, the
    // candidate must not run against the event label. A pure ramp scores
    // |m|*L/sigma ~= 3.46; the 2.0 gate keeps seasonal windows (whose
    // near-term direction is phase-driven) out of this check.
    constexpr double kDirectionGate = 2.0;
    if (verdict.ok && evidence.event && evidence.event->trend_strength >= kDirectionGate) {
        const double net = candidate(candidate.rows() - 1, 0) - candidate(0, 0);
        const auto label = evidence.event->label;
        if ((label == toolkit::EventLabel::rise && net < 0) ||
            (label == toolkit::EventLabel::fall && net > 0)) {
            verdict.ok = false;
            verdict.feedback = "logic check failed: trajectory direction contradicts event label " +
                               toolkit::to_string(label);
        }
    }

    if (request.transcript_sink) {
        request.transcript_sink->push_back("REFLECT REQUEST\n" + request.response_text);
        request.transcript_sink->push_back(std::string("REFLECT RESPONSE\n") +
                                           (verdict.ok ? "ok" : verdict.feedback));
    }
    return verdict;
}

// ============================================================================
// Remote adapter
// ============================================================================

namespace {

constexpr const char* kDefaultPlannerSystem =
    "You schedule diagnostic tools for a time series forecasting workflow. "
    "Reply with a JSON object {\"mandatory\": [...], \"optional\": [...], \"rationale\": \"...\"} "
    "using only known tool names.";
constexpr const char* kDefaultForecasterSystem =
    "You refine an ensemble forecast baseline using the provided diagnostic evidence. "
    "Reply with reasoning followed by a fenced block of exactly H forecast rows.";
constexpr const char* kDefaultReflectorSystem =
    "You verify a candidate forecast against diagnostic evidence. "
    "Reply with a JSON object {\"logic_ok\": true|false, \"feedback\": \"...\"}.";

// Splits scheme://host[:port] from the path.
void split_endpoint(const std::string& endpoint, std::string& base, std::string& path) {
    const std::size_t scheme = endpoint.find("://");
    const std::size_t host_begin = scheme == std::string::npos ? 0 : scheme + 3;
    const std::size_t slash = endpoint.find('/', host_begin);
    if (slash == std::string::npos) {
        base = endpoint;
        path = "/";
    } else {
        base = endpoint.substr(0, slash);
        path = endpoint.substr(slash);
    }
}

}  // namespace

RemotePolicyAdapter::RemotePolicyAdapter(RemoteAdapterConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty())
        throw ConfigError("remote adapter requires an endpoint");
    if (config_.planner_system.empty()) config_.planner_system = kDefaultPlannerSystem;
    if (config_.forecaster_system.empty()) config_.forecaster_system = kDefaultForecasterSystem;
    if (config_.reflector_system.empty()) config_.reflector_system = kDefaultReflectorSystem;
}

std::string RemotePolicyAdapter::chat(const std::string& role_label, const std::string& model,
                                      const std::string& system_prompt,
                                      const std::string& user_prompt,
                                      std::vector<std::string>* transcript_sink) {
    ojson body;
    body["model"] = model;
    body["messages"] = ojson::array();
    body["messages"].push_back({{"role", "system"}, {"content", system_prompt}});
    body["messages"].push_back({{"role", "user"}, {"content", user_prompt}});
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_tokens;
    const std::string payload = body.dump();

    std::string base, path;
    split_endpoint(config_.endpoint, base, path);

    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string failure;
    for (int attempt = 0; attempt <= config_.retry_budget; ++attempt) {
        httplib::Client client(base);
        client.set_read_timeout(120, 0);
        auto res = client.Post(path, headers, payload, "application/json");
        if (!res) {
            failure = "transport error " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            failure = "HTTP status " + std::to_string(res->status);
            continue;
        }
        if (transcript_sink) {
            transcript_sink->push_back(role_label + " REQUEST\n" + payload);
            transcript_sink->push_back(role_label + " RESPONSE\n" + res->body);
        }
        try {
            const ojson parsed = ojson::parse(res->body);
            if (parsed.contains("choices") && !parsed["choices"].empty())
                return parsed["choices"][0].at("message").at("content").get<std::string>();
            if (parsed.contains("content")) return parsed["content"].get<std::string>();
            failure = "response carries no message content";
        } catch (const std::exception& e) {
            failure = std::string("bad response body: ") + e.what();
        }
    }
    throw WorkflowError(role_label + "_unavailable: " + failure);
}

memory::ToolSchedule RemotePolicyAdapter::plan(const workflow::PlanRequest& request) {
    const std::string content = chat("planner", config_.planner_model, config_.planner_system,
                                     request.context, request.transcript_sink);
    // An unparseable plan is not fatal; the default schedule keeps the run
    // going and the rationale records what happened.
    try {
        const std::size_t begin = content.find('{');
        const std::size_t end = content.rfind('}');
        if (begin == std::string::npos || end == std::string::npos || end <= begin)
            throw Error("no JSON object in planner reply");
        const ojson j = ojson::parse(content.substr(begin, end - begin + 1));
        memory::ToolSchedule schedule;
        for (const auto& t : j.at("mandatory"))
            schedule.mandatory.push_back(toolkit::tool_from_string(t.get<std::string>()));
        for (const auto& t : j.at("optional"))
            schedule.optional_tools.push_back(toolkit::tool_from_string(t.get<std::string>()));
        schedule.rationale = j.value("rationale", "");
        return schedule;
    } catch (const std::exception& e) {
        memory::ToolSchedule schedule = workflow::default_schedule(request.roles, request.mode);
        schedule.rationale = std::string("planner reply unusable (") + e.what() +
                             "); default schedule applied";
        return schedule;
    }
}

std::string RemotePolicyAdapter::forecast(const workflow::ForecastRequest& request) {
    return chat("forecaster", config_.forecaster_model, config_.forecaster_system, request.context,
                request.transcript_sink);
}

workflow::LogicVerdict RemotePolicyAdapter::reflect(const workflow::ReflectRequest& request) {
    std::ostringstream prompt;
    prompt << "[candidate]\n" << request.response_text << "\n[evidence]\n"
           << request.evidence->to_prompt_text(request.roles);
    const std::string content = chat("reflector", config_.reflector_model,
                                     config_.reflector_system, prompt.str(),
                                     request.transcript_sink);
    workflow::LogicVerdict verdict;
    try {
        const std::size_t begin = content.find('{');
        const std::size_t end = content.rfind('}');
        if (begin == std::string::npos || end == std::string::npos || end <= begin)
            throw Error("no JSON object in reflector reply");
        const ojson j = ojson::parse(content.substr(begin, end - begin + 1));
        verdict.ok = j.at("logic_ok").get<bool>();
        verdict.feedback = j.value("feedback", "");
    } catch (const std::exception&) {
        // The format gate is deterministic and local; an unusable logic
        // verdict passes the candidate through.
        verdict.ok = true;
    }
    return verdict;
}

}  // namespace castflow::adapters
