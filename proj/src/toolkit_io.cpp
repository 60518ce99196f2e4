#include <sstream>

#include "castflow/toolkit.hpp"

// Serialization for tool reports. Prompt blocks are stable key-value text
// consumed verbatim by policy prompts: field names and ordering are fixed
// so identical evidence always renders identical context.

namespace castflow::toolkit {

namespace {

std::string chan_label(std::size_t c, const ChannelRoles& roles) {
    std::string name = c < roles.names.size() ? roles.names[c] : ("ch" + std::to_string(c));
    std::string role = "other";
    if (c == roles.target)
        role = "target";
    else
        for (std::size_t e : roles.exogenous)
            if (e == c) role = "covariate";
    return "channel=" + name + " role=" + role;
}

std::vector<std::size_t> target_first(std::size_t n, const ChannelRoles& roles) {
    std::vector<std::size_t> order;
    if (roles.target < n) order.push_back(roles.target);
    for (std::size_t c = 0; c < n; ++c)
        if (c != roles.target) order.push_back(c);
    return order;
}

}  // namespace

// ============================================================================
// StatProfile
// ============================================================================

std::string StatProfile::to_prompt_block(const ChannelRoles& roles) const {
    std::ostringstream out;
    out << "[" << (extended ? "basic_statistics" : "statistical_analysis") << "]\n";
    for (std::size_t c : target_first(channels.size(), roles)) {
        const ChannelStats& s = channels[c];
        out << chan_label(c, roles) << " mean=" << num_to_string(s.mean)
            << " std=" << num_to_string(s.stddev) << " min=" << num_to_string(s.min)
            << " max=" << num_to_string(s.max);
        if (extended)
            out << " median=" << num_to_string(s.median) << " mad=" << num_to_string(s.mad)
                << " spectral_entropy=" << num_to_string(s.spectral_entropy);
        out << "\n";
    }
    return out.str();
}

ojson StatProfile::to_json() const {
    ojson j;
    j["extended"] = extended;
    ojson arr = ojson::array();
    for (const auto& s : channels) {
        ojson c;
        c["mean"] = s.mean;
        c["std"] = s.stddev;
        c["min"] = s.min;
        c["max"] = s.max;
        c["median"] = std::isnan(s.median) ? ojson(nullptr) : ojson(s.median);
        c["mad"] = std::isnan(s.mad) ? ojson(nullptr) : ojson(s.mad);
        c["spectral_entropy"] =
            std::isnan(s.spectral_entropy) ? ojson(nullptr) : ojson(s.spectral_entropy);
        arr.push_back(std::move(c));
    }
    j["channels"] = std::move(arr);
    return j;
}

StatProfile StatProfile::from_json(const ojson& j) {
    StatProfile p;
    p.extended = j.at("extended").get<bool>();
    for (const auto& c : j.at("channels")) {
        ChannelStats s;
        s.mean = c.at("mean").get<double>();
        s.stddev = c.at("std").get<double>();
        s.min = c.at("min").get<double>();
        s.max = c.at("max").get<double>();
        s.median = c.at("median").is_null() ? std::nan("") : c.at("median").get<double>();
        s.mad = c.at("mad").is_null() ? std::nan("") : c.at("mad").get<double>();
        s.spectral_entropy = c.at("spectral_entropy").is_null()
                                 ? std::nan("")
                                 : c.at("spectral_entropy").get<double>();
        p.channels.push_back(s);
    }
    return p;
}

// ============================================================================
// QualityReport
// ============================================================================

std::string QualityReport::to_prompt_block(const ChannelRoles& roles) const {
    std::ostringstream out;
    out << "[data_quality]\n";
    out << "target=" << (roles.target < roles.names.size() ? roles.names[roles.target] : "target")
        << " dropout_ratio=" << num_to_string(dropout_ratio)
        << " clip_low=" << num_to_string(clip_low) << " clip_high=" << num_to_string(clip_high)
        << " degraded=" << (degraded ? "true" : "false") << "\n";
    return out.str();
}

ojson QualityReport::to_json() const {
    ojson j;
    j["dropout_ratio"] = dropout_ratio;
    j["clip_low"] = bounds_defined ? ojson(clip_low) : ojson(nullptr);
    j["clip_high"] = bounds_defined ? ojson(clip_high) : ojson(nullptr);
    j["bounds_defined"] = bounds_defined;
    j["degraded"] = degraded;
    return j;
}

QualityReport QualityReport::from_json(const ojson& j) {
    QualityReport q;
    q.dropout_ratio = j.at("dropout_ratio").get<double>();
    q.bounds_defined = j.at("bounds_defined").get<bool>();
    q.clip_low = j.at("clip_low").is_null() ? std::nan("") : j.at("clip_low").get<double>();
    q.clip_high = j.at("clip_high").is_null() ? std::nan("") : j.at("clip_high").get<double>();
    q.degraded = j.at("degraded").get<bool>();
    return q;
}

// ============================================================================
// DiagnosticState
// ============================================================================

std::string DiagnosticState::to_prompt_block(const ChannelRoles& roles) const {
    std::ostringstream out;
    out << "[comprehensive_feature]\n";
    for (std::size_t c : target_first(channels.size(), roles)) {
        const ChannelState& s = channels[c];
        out << chan_label(c, roles) << " mean=" << num_to_string(s.mean)
            << " std=" << num_to_string(s.stddev) << " mad=" << num_to_string(s.mad)
            << " spectral_entropy=" << num_to_string(s.spectral_entropy)
            << " clip_low=" << num_to_string(s.clip_low)
            << " clip_high=" << num_to_string(s.clip_high) << "\n";
    }
    return out.str();
}

ojson DiagnosticState::to_json() const {
    ojson j;
    j["degraded"] = degraded;
    ojson arr = ojson::array();
    for (const auto& s : channels) {
        ojson c;
        c["mean"] = s.mean;
        c["std"] = s.stddev;
        c["mad"] = s.mad;
        c["spectral_entropy"] = s.spectral_entropy;
        c["clip_low"] = s.clip_low;
        c["clip_high"] = s.clip_high;
        arr.push_back(std::move(c));
    }
    j["channels"] = std::move(arr);
    return j;
}

DiagnosticState DiagnosticState::from_json(const ojson& j) {
    DiagnosticState d;
    d.degraded = j.at("degraded").get<bool>();
    for (const auto& c : j.at("channels")) {
        ChannelState s;
        s.mean = c.at("mean").get<double>();
        s.stddev = c.at("std").get<double>();
        s.mad = c.at("mad").get<double>();
        s.spectral_entropy = c.at("spectral_entropy").get<double>();
        s.clip_low = c.at("clip_low").get<double>();
        s.clip_high = c.at("clip_high").get<double>();
        d.channels.push_back(s);
    }
    return d;
}

// ============================================================================
// DynamicsReport
// ============================================================================

std::string DynamicsReport::to_prompt_block(const ChannelRoles&) const {
    std::ostringstream out;
    out << "[dynamics]\n";
    out << "slope=" << num_to_string(slope)
        << " momentum_reversal=" << (momentum_reversal ? "true" : "false")
        << " changepoints=" << changepoints.size() << "\n";
    for (const auto& cp : changepoints)
        out << "changepoint index=" << cp.index << " delta=" << num_to_string(cp.delta)
            << " delta2=" << num_to_string(cp.delta2) << "\n";
    return out.str();
}

ojson DynamicsReport::to_json() const {
    ojson j;
    j["slope"] = slope;
    j["momentum_reversal"] = momentum_reversal;
    ojson arr = ojson::array();
    for (const auto& cp : changepoints) {
        ojson c;
        c["index"] = cp.index;
        c["delta"] = cp.delta;
        c["delta2"] = cp.delta2;
        arr.push_back(std::move(c));
    }
    j["changepoints"] = std::move(arr);
    return j;
}

DynamicsReport DynamicsReport::from_json(const ojson& j) {
    DynamicsReport r;
    r.slope = j.at("slope").get<double>();
    r.momentum_reversal = j.at("momentum_reversal").get<bool>();
    for (const auto& c : j.at("changepoints")) {
        Changepoint cp;
        cp.index = c.at("index").get<std::size_t>();
        cp.delta = c.at("delta").get<double>();
        cp.delta2 = c.at("delta2").get<double>();
        r.changepoints.push_back(cp);
    }
    return r;
}

// ============================================================================
// CrossChannelReport
// ============================================================================

std::string CrossChannelReport::to_prompt_block(const ChannelRoles& roles) const {
    std::ostringstream out;
    out << "[cross_channel]\n";
    for (const auto& p : pairs) {
        std::string name = p.covariate_channel < roles.names.size()
                               ? roles.names[p.covariate_channel]
                               : ("ch" + std::to_string(p.covariate_channel));
        out << "covariate=" << name << " best_lag=" << p.best_lag
            << " best_rho=" << num_to_string(p.best_rho) << "\n";
    }
    return out.str();
}

ojson CrossChannelReport::to_json() const {
    ojson arr = ojson::array();
    for (const auto& p : pairs) {
        ojson jp;
        jp["covariate_channel"] = p.covariate_channel;
        jp["best_lag"] = p.best_lag;
        jp["best_rho"] = p.best_rho;
        ojson cg = ojson::array();
        for (const auto& lc : p.correlogram) {
            ojson jl;
            jl["lag"] = lc.lag;
            jl["rho"] = lc.rho;
            jl["degenerate"] = lc.degenerate;
            cg.push_back(std::move(jl));
        }
        jp["correlogram"] = std::move(cg);
        arr.push_back(std::move(jp));
    }
    ojson j;
    j["pairs"] = std::move(arr);
    return j;
}

CrossChannelReport CrossChannelReport::from_json(const ojson& j) {
    CrossChannelReport r;
    for (const auto& jp : j.at("pairs")) {
        PairCorrelogram p;
        p.covariate_channel = jp.at("covariate_channel").get<std::size_t>();
        p.best_lag = jp.at("best_lag").get<int>();
        p.best_rho = jp.at("best_rho").get<double>();
        for (const auto& jl : jp.at("correlogram")) {
            LagCorrelation lc;
            lc.lag = jl.at("lag").get<int>();
            lc.rho = jl.at("rho").get<double>();
            lc.degenerate = jl.at("degenerate").get<bool>();
            p.correlogram.push_back(lc);
        }
        r.pairs.push_back(std::move(p));
    }
    return r;
}

// ============================================================================
// EventSummary
// ============================================================================

std::string EventSummary::to_prompt_block(const ChannelRoles&) const {
    std::ostringstream out;
    out << "[event_summary]\n";
    out << "label=" << toolkit::to_string(label)
        << " trend_strength=" << num_to_string(trend_strength)
        << " zero_crossing_rate=" << num_to_string(zero_crossing_rate) << "\n";
    return out.str();
}

ojson EventSummary::to_json() const {
    ojson j;
    j["label"] = toolkit::to_string(label);
    j["trend_strength"] = trend_strength;
    j["zero_crossing_rate"] = zero_crossing_rate;
    return j;
}

EventSummary EventSummary::from_json(const ojson& j) {
    EventSummary e;
    e.label = event_from_string(j.at("label").get<std::string>());
    e.trend_strength = j.at("trend_strength").get<double>();
    e.zero_crossing_rate = j.at("zero_crossing_rate").get<double>();
    return e;
}

// ============================================================================
// ResidualReport
// ============================================================================

std::string ResidualReport::to_prompt_block(const ChannelRoles&) const {
    std::ostringstream out;
    out << "[autoregressive_residual]\n";
    out << "order=" << order << " intercept=" << num_to_string(intercept) << " coefficients=";
    for (std::size_t i = 0; i < coefficients.size(); ++i) {
        if (i) out << ",";
        out << num_to_string(coefficients[i]);
    }
    out << " residual_mean=" << num_to_string(residual_mean)
        << " r1=" << num_to_string(lag1_autocorrelation)
        << " residual_std=" << num_to_string(residual_std) << " train_only=true\n";
    return out.str();
}

ojson ResidualReport::to_json() const {
    ojson j;
    j["order"] = order;
    j["intercept"] = intercept;
    j["coefficients"] = coefficients;
    j["residual_mean"] = residual_mean;
    j["lag1_autocorrelation"] = lag1_autocorrelation;
    j["residual_std"] = residual_std;
    j["train_only"] = train_only;
    return j;
}

ResidualReport ResidualReport::from_json(const ojson& j) {
    ResidualReport r;
    r.order = j.at("order").get<std::size_t>();
    r.intercept = j.at("intercept").get<double>();
    r.coefficients = j.at("coefficients").get<std::vector<double>>();
    r.residual_mean = j.at("residual_mean").get<double>();
    r.lag1_autocorrelation = j.at("lag1_autocorrelation").get<double>();
    r.residual_std = j.at("residual_std").get<double>();
    r.train_only = j.at("train_only").get<bool>();
    return r;
}

// ============================================================================
// ExogenousSummary
// ============================================================================

std::string ExogenousSummary::to_prompt_block(const ChannelRoles&) const {
    std::ostringstream out;
    out << "[exogenous_analysis]\n";
    if (!has_covariates) {
        out << "note=" << note << "\n";
        return out.str();
    }
    for (const auto& f : covariates) out << f.hint << "\n";
    return out.str();
}

ojson ExogenousSummary::to_json() const {
    ojson j;
    j["has_covariates"] = has_covariates;
    j["note"] = note;
    ojson arr = ojson::array();
    for (const auto& f : covariates) {
        ojson c;
        c["channel"] = f.channel;
        c["name"] = f.name;
        c["best_lag"] = f.best_lag;
        c["best_rho"] = f.best_rho;
        c["slope"] = f.slope;
        c["hint"] = f.hint;
        arr.push_back(std::move(c));
    }
    j["covariates"] = std::move(arr);
    return j;
}

ExogenousSummary ExogenousSummary::from_json(const ojson& j) {
    ExogenousSummary s;
    s.has_covariates = j.at("has_covariates").get<bool>();
    s.note = j.at("note").get<std::string>();
    for (const auto& c : j.at("covariates")) {
        CovariateFinding f;
        f.channel = c.at("channel").get<std::size_t>();
        f.name = c.at("name").get<std::string>();
        f.best_lag = c.at("best_lag").get<int>();
        f.best_rho = c.at("best_rho").get<double>();
        f.slope = c.at("slope").get<double>();
        f.hint = c.at("hint").get<std::string>();
        s.covariates.push_back(std::move(f));
    }
    return s;
}

}  // namespace castflow::toolkit
