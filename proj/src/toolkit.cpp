#include "castflow/toolkit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace castflow::toolkit {

std::string to_string(ToolId id) {
    switch (id) {
        case ToolId::model_auxiliary: return "model_auxiliary";
        case ToolId::statistical_analysis: return "statistical_analysis";
        case ToolId::basic_statistics: return "basic_statistics";
        case ToolId::data_quality: return "data_quality";
        case ToolId::comprehensive_feature: return "comprehensive_feature";
        case ToolId::trend_analysis: return "trend_analysis";
        case ToolId::changepoint_trend: return "changepoint_trend";
        case ToolId::cross_channel: return "cross_channel";
        case ToolId::exogenous_analysis: return "exogenous_analysis";
        case ToolId::event_summary: return "event_summary";
        case ToolId::autoregressive_residual: return "autoregressive_residual";
    }
    return "unknown";
}

ToolId tool_from_string(const std::string& s) {
    for (ToolId id : all_tools())
        if (to_string(id) == s) return id;
    throw Error("unknown tool id: " + s);
}

const std::vector<ToolId>& all_tools() {
    static const std::vector<ToolId> tools = {
        ToolId::model_auxiliary,      ToolId::statistical_analysis, ToolId::basic_statistics,
        ToolId::data_quality,         ToolId::comprehensive_feature, ToolId::trend_analysis,
        ToolId::changepoint_trend,    ToolId::cross_channel,         ToolId::exogenous_analysis,
        ToolId::event_summary,        ToolId::autoregressive_residual,
    };
    return tools;
}

Mode mode_from_string(const std::string& s) {
    if (s == "train") return Mode::train;
    if (s == "test") return Mode::test;
    throw ConfigError("unknown mode: " + s);
}

std::string to_string(EventLabel e) {
    switch (e) {
        case EventLabel::rise: return "rise";
        case EventLabel::fall: return "fall";
        case EventLabel::flat: return "flat";
        case EventLabel::oscillation: return "oscillation";
    }
    return "flat";
}

EventLabel event_from_string(const std::string& s) {
    if (s == "rise") return EventLabel::rise;
    if (s == "fall") return EventLabel::fall;
    if (s == "flat") return EventLabel::flat;
    if (s == "oscillation") return EventLabel::oscillation;
    throw Error("unknown event label: " + s);
}

std::size_t effective_max_lag(const ToolkitParams& params, std::size_t L, std::size_t H) {
    if (params.max_lag > 0) return params.max_lag;
    return std::min(H, L / 4);
}

// ============================================================================
// Shared numeric helpers
// ============================================================================

namespace {

std::vector<double> present_values(const std::vector<double>& xs) {
    std::vector<double> out;
    out.reserve(xs.size());
    for (double v : xs)
        if (!is_missing(v)) out.push_back(v);
    return out;
}

struct Moments {
    double mean = 0;
    double stddev = 0;  // population
    double min = 0;
    double max = 0;
    std::size_t count = 0;
};

// Welford's online recurrence; the test oracle uses an independent
// two-pass computation.
Moments moments_of(const std::vector<double>& xs) {
    Moments m;
    double mean = 0, m2 = 0;
    for (double v : xs) {
        if (is_missing(v)) continue;
        ++m.count;
        if (m.count == 1) {
            m.min = m.max = v;
        } else {
            m.min = std::min(m.min, v);
            m.max = std::max(m.max, v);
        }
        const double d = v - mean;
        mean += d / static_cast<double>(m.count);
        m2 += d * (v - mean);
    }
    m.mean = mean;
    m.stddev = m.count > 0 ? std::sqrt(m2 / static_cast<double>(m.count)) : 0.0;
    return m;
}

std::string channel_name(std::size_t channel, const ChannelRoles& roles) {
    if (channel < roles.names.size()) return roles.names[channel];
    return "ch" + std::to_string(channel);
}

}  // namespace

double median_of(std::vector<double> values) {
    if (values.empty()) throw ToolError("median: insufficient_data (empty)");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double spectral_entropy_of(const std::vector<double>& x) {
    const std::size_t n = x.size();
    const std::size_t bins = n / 2;
    if (bins == 0) return 0.0;

    double energy = 0;
    for (double v : x) energy += v * v;

    // Direct DFT; window lengths are small enough that O(n^2) is fine here.
    std::vector<double> power(bins);
    double total = 0;
    for (std::size_t k = 1; k <= bins; ++k) {
        double re = 0, im = 0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                               static_cast<double>(t) / static_cast<double>(n);
            re += x[t] * std::cos(ang);
            im += x[t] * std::sin(ang);
        }
        power[k - 1] = re * re + im * im;
        total += power[k - 1];
    }

    // A spectrum whose non-DC power sits at the numeric noise floor is
    // treated as zero-power (constant series convention).
    if (total <= 1e-24 * std::max(energy, 1e-300)) return 0.0;

    double entropy = 0;
    for (double p : power) {
        const double pk = p / total;
        if (pk > 0) entropy -= pk * std::log(pk);
    }
    return std::max(entropy, 0.0);
}

// ============================================================================
// Profiler tools
// ============================================================================

StatProfile statistical_analysis(const Window& window) {
    StatProfile profile;
    for (std::size_t c = 0; c < window.lookback.cols(); ++c) {
        const Moments m = moments_of(window.lookback.col(c));
        if (m.count < 2)
            throw ToolError("statistical_analysis: insufficient_data on channel " + std::to_string(c));
        ChannelStats cs;
        cs.mean = m.mean;
        cs.stddev = m.stddev;
        cs.min = m.min;
        cs.max = m.max;
        profile.channels.push_back(cs);
    }
    return profile;
}

StatProfile basic_statistics(const Window& window) {
    StatProfile profile = statistical_analysis(window);
    profile.extended = true;
    for (std::size_t c = 0; c < window.lookback.cols(); ++c) {
        auto xs = present_values(window.lookback.col(c));
        if (xs.size() < 4)
            throw ToolError("basic_statistics: insufficient_data on channel " + std::to_string(c));
        ChannelStats& cs = profile.channels[c];
        cs.median = median_of(xs);
        std::vector<double> dev;
        dev.reserve(xs.size());
        for (double v : xs) dev.push_back(std::abs(v - cs.median));
        cs.mad = median_of(std::move(dev));
        cs.spectral_entropy = spectral_entropy_of(xs);
    }
    return profile;
}

QualityReport data_quality(const Window& window, const ChannelRoles& roles, double kappa,
                           double dropout_threshold) {
    QualityReport q;
    const auto& lb = window.lookback;
    std::size_t missing = 0;
    for (double v : lb.data())
        if (is_missing(v)) ++missing;
    q.dropout_ratio = lb.data().empty() ? 0.0
                                        : static_cast<double>(missing) /
                                              static_cast<double>(lb.data().size());

    const Moments m = moments_of(lb.col(roles.target));
    if (m.count > 0) {
        q.clip_low = m.mean - kappa * m.stddev;
        q.clip_high = m.mean + kappa * m.stddev;
        q.bounds_defined = true;
    }
    q.degraded = q.dropout_ratio > dropout_threshold || !q.bounds_defined;
    return q;
}

DiagnosticState comprehensive_feature(const Window& window, const ChannelRoles& roles, double kappa,
                                      double dropout_threshold) {
    const StatProfile basic = basic_statistics(window);
    const QualityReport quality = data_quality(window, roles, kappa, dropout_threshold);

    DiagnosticState state;
    state.degraded = quality.degraded;
    for (std::size_t c = 0; c < basic.channels.size(); ++c) {
        const ChannelStats& cs = basic.channels[c];
        DiagnosticState::ChannelState s;
        s.mean = cs.mean;
        s.stddev = cs.stddev;
        s.mad = cs.mad;
        s.spectral_entropy = cs.spectral_entropy;
        s.clip_low = cs.mean - kappa * cs.stddev;
        s.clip_high = cs.mean + kappa * cs.stddev;
        state.channels.push_back(s);
    }
    return state;
}

// ============================================================================
// Dynamics tools
// ============================================================================

namespace {

// Least-squares slope over (t, x_t) with t = 0..L-1; missing rows drop out
// but keep their original time index.
double slope_of(const std::vector<double>& xs) {
    double st = 0, sx = 0;
    std::size_t n = 0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        if (is_missing(xs[t])) continue;
        st += static_cast<double>(t);
        sx += xs[t];
        ++n;
    }
    if (n < 2) return 0.0;
    const double tbar = st / static_cast<double>(n);
    const double xbar = sx / static_cast<double>(n);
    double num = 0, den = 0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        if (is_missing(xs[t])) continue;
        const double dt = static_cast<double>(t) - tbar;
        num += dt * (xs[t] - xbar);
        den += dt * dt;
    }
    return den > 0 ? num / den : 0.0;
}

}  // namespace

DynamicsReport trend_analysis(const Window& window, const ChannelRoles& roles) {
    if (window.L < 2) throw ToolError("trend_analysis: insufficient_data");
    DynamicsReport r;
    r.slope = slope_of(window.lookback.col(roles.target));
    return r;
}

DynamicsReport changepoint_trend(const Window& window, const ChannelRoles& roles, double sensitivity) {
    if (window.L < 3) throw ToolError("changepoint_trend: insufficient_data");
    const auto xs = window.lookback.col(roles.target);

    DynamicsReport r;
    r.slope = slope_of(xs);

    // First and second differences; entries touching a missing value are
    // undefined and excluded.
    std::vector<double> d1(xs.size(), std::nan(""));
    for (std::size_t t = 1; t < xs.size(); ++t)
        if (!is_missing(xs[t]) && !is_missing(xs[t - 1])) d1[t] = xs[t] - xs[t - 1];
    std::vector<double> d2(xs.size(), std::nan(""));
    std::vector<double> d2_defined;
    for (std::size_t t = 2; t < xs.size(); ++t)
        if (!is_missing(d1[t]) && !is_missing(d1[t - 1])) {
            d2[t] = d1[t] - d1[t - 1];
            d2_defined.push_back(d2[t]);
        }

    if (!d2_defined.empty()) {
        const double med = median_of(d2_defined);
        std::vector<double> dev;
        dev.reserve(d2_defined.size());
        for (double v : d2_defined) dev.push_back(std::abs(v - med));
        const double mad = median_of(std::move(dev));
        const double threshold = sensitivity * mad;
        for (std::size_t t = 2; t < xs.size(); ++t)
            if (!is_missing(d2[t]) && std::abs(d2[t]) > threshold)
                r.changepoints.push_back(Changepoint{t, d1[t], d2[t]});
    }

    // Reversal: the latest step moves against the window-mean step.
    double sum_d1 = 0;
    std::size_t n_d1 = 0;
    double last_d1 = std::nan("");
    for (std::size_t t = 1; t < xs.size(); ++t) {
        if (is_missing(d1[t])) continue;
        sum_d1 += d1[t];
        ++n_d1;
        last_d1 = d1[t];
    }
    if (n_d1 > 0 && !is_missing(last_d1)) {
        const double mean_d1 = sum_d1 / static_cast<double>(n_d1);
        r.momentum_reversal = last_d1 * mean_d1 < 0;
    }
    return r;
}

// ============================================================================
// Cross-channel tools
// ============================================================================

namespace {

// Pearson correlation of the overlapping pairs (x_t, y_{t+lag}); missing
// pairs drop out. Means are taken over the overlap so a perfectly shifted
// copy scores exactly 1 at its lag.
LagCorrelation shifted_correlation(const std::vector<double>& x, const std::vector<double>& y,
                                   int lag) {
    const auto n = static_cast<long>(x.size());
    LagCorrelation out;
    out.lag = lag;

    std::vector<double> xs, ys;
    for (long t = 0; t < n; ++t) {
        const long u = t + lag;
        if (u < 0 || u >= n) continue;
        const double a = x[static_cast<std::size_t>(t)];
        const double b = y[static_cast<std::size_t>(u)];
        if (is_missing(a) || is_missing(b)) continue;
        xs.push_back(a);
        ys.push_back(b);
    }
    if (xs.size() < 2) {
        out.degenerate = true;
        return out;
    }
    const auto m = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= m;
    my /= m;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double a = xs[i] - mx;
        const double b = ys[i] - my;
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if (sxx <= 0 || syy <= 0) {
        out.degenerate = true;
        return out;
    }
    out.rho = sxy / std::sqrt(sxx * syy);
    return out;
}

PairCorrelogram correlate_pair(const std::vector<double>& x, const std::vector<double>& y,
                               std::size_t covariate_channel, std::size_t max_lag) {
    PairCorrelogram pair;
    pair.covariate_channel = covariate_channel;
    const int lag_limit = static_cast<int>(max_lag);
    double best_abs = -1;
    for (int lag = -lag_limit; lag <= lag_limit; ++lag) {
        LagCorrelation lc = shifted_correlation(x, y, lag);
        if (std::abs(lc.rho) > best_abs) {
            best_abs = std::abs(lc.rho);
            pair.best_lag = lag;
            pair.best_rho = lc.rho;
        }
        pair.correlogram.push_back(lc);
    }
    return pair;
}

}  // namespace

CrossChannelReport cross_channel(const Window& window, const ChannelRoles& roles,
                                 std::size_t max_lag) {
    if (roles.exogenous.empty())
        throw ToolError("cross_channel: insufficient_data (no covariate channels)");
    if (window.L < 2 * max_lag + 4)
        throw ToolError("cross_channel: insufficient_data (window too short for lag range)");

    const auto target = window.lookback.col(roles.target);
    CrossChannelReport report;
    for (std::size_t cov : roles.exogenous)
        report.pairs.push_back(correlate_pair(target, window.lookback.col(cov), cov, max_lag));
    return report;
}

ExogenousSummary exogenous_analysis(const Window& window, const ChannelRoles& roles,
                                    std::size_t max_lag) {
    ExogenousSummary summary;
    if (roles.exogenous.empty()) {
        summary.note = "no covariate channels configured";
        return summary;
    }
    summary.has_covariates = true;

    const CrossChannelReport cross = cross_channel(window, roles, max_lag);
    for (const auto& pair : cross.pairs) {
        CovariateFinding f;
        f.channel = pair.covariate_channel;
        f.name = channel_name(pair.covariate_channel, roles);
        f.best_lag = pair.best_lag;
        f.best_rho = pair.best_rho;
        f.slope = slope_of(window.lookback.col(pair.covariate_channel));

        std::string relation;
        if (pair.best_lag > 0)
            relation = "leading indicator with lag " + std::to_string(pair.best_lag);
        else if (pair.best_lag < 0)
            relation = "trailing indicator with lag " + std::to_string(-pair.best_lag);
        else
            relation = "synchronous indicator";
        f.hint = f.name + ": " + relation + ", rho=" + num_to_string(f.best_rho) +
                 ", slope=" + num_to_string(f.slope);
        summary.covariates.push_back(std::move(f));
    }
    return summary;
}

// ============================================================================
// Event summary
// ============================================================================

EventSummary event_summary(const Window& window, const ChannelRoles& roles, double flat_threshold,
                           double osc_threshold) {
    if (window.L < 4) throw ToolError("event_summary: insufficient_data");
    const auto xs = window.lookback.col(roles.target);

    EventSummary e;
    const Moments m = moments_of(xs);
    const double slope = slope_of(xs);
    e.trend_strength = m.stddev > 0
                           ? std::abs(slope) * static_cast<double>(window.L) / m.stddev
                           : 0.0;

    std::vector<double> diffs;
    for (std::size_t t = 1; t < xs.size(); ++t)
        if (!is_missing(xs[t]) && !is_missing(xs[t - 1])) diffs.push_back(xs[t] - xs[t - 1]);
    if (diffs.size() >= 2) {
        double mean_d = 0;
        for (double d : diffs) mean_d += d;
        mean_d /= static_cast<double>(diffs.size());
        std::size_t crossings = 0;
        for (std::size_t i = 1; i < diffs.size(); ++i)
            if ((diffs[i] - mean_d) * (diffs[i - 1] - mean_d) < 0) ++crossings;
        e.zero_crossing_rate =
            static_cast<double>(crossings) / static_cast<double>(diffs.size() - 1);
    }

    // Precedence: oscillation, then flat, then slope sign. A zero-variance
    // series is flat by definition.
    if (e.zero_crossing_rate > osc_threshold)
        e.label = EventLabel::oscillation;
    else if (m.stddev == 0 ||
             std::abs(slope) * static_cast<double>(window.L) < flat_threshold * m.stddev)
        e.label = EventLabel::flat;
    else
        e.label = slope > 0 ? EventLabel::rise : EventLabel::fall;
    return e;
}

// ============================================================================
// Residual diagnoser
// ============================================================================

namespace {

struct ArFit {
    std::size_t order = 0;
    double intercept = 0;
    std::vector<double> coefficients;
    std::vector<double> residuals;
    double rss = 0;
    double aic = 0;
    bool ok = false;
};

ArFit fit_ar(const std::vector<double>& xs, std::size_t p) {
    // Rows with a missing value anywhere in their lag frame drop out.
    std::vector<std::size_t> rows;
    for (std::size_t t = p; t < xs.size(); ++t) {
        bool clean = !is_missing(xs[t]);
        for (std::size_t i = 1; clean && i <= p; ++i) clean = !is_missing(xs[t - i]);
        if (clean) rows.push_back(t);
    }
    ArFit fit;
    fit.order = p;
    if (rows.size() < p + 2) return fit;

    Matrix design(rows.size(), p + 1, 1.0);
    std::vector<double> target(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t t = rows[r];
        target[r] = xs[t];
        for (std::size_t i = 1; i <= p; ++i) design(r, i) = xs[t - i];
    }

    LstsqResult ls = lstsq(design, target);
    if (ls.rank == 0) return fit;
    fit.intercept = ls.coeffs[0];
    fit.coefficients.assign(ls.coeffs.begin() + 1, ls.coeffs.end());

    fit.residuals.resize(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const std::size_t t = rows[r];
        double pred = fit.intercept;
        for (std::size_t i = 1; i <= p; ++i) pred += fit.coefficients[i - 1] * xs[t - i];
        fit.residuals[r] = xs[t] - pred;
        fit.rss += fit.residuals[r] * fit.residuals[r];
    }

    const auto n = static_cast<double>(rows.size());
    const double k = static_cast<double>(p) + 1.0;
    fit.aic = fit.rss <= 1e-300 ? -std::numeric_limits<double>::infinity()
                                : n * std::log(fit.rss / n) + 2.0 * k;
    fit.ok = true;
    return fit;
}

}  // namespace

std::optional<ResidualReport> autoregressive_residual(const Window& window,
                                                      const ChannelRoles& roles, std::size_t p_max,
                                                      Mode mode) {
    if (mode == Mode::test) return std::nullopt;  // leakage guard, bypassed in testing
    if (p_max == 0) throw ToolError("autoregressive_residual: p_max must be positive");
    if (window.L < p_max + 10)
        throw ToolError("autoregressive_residual: insufficient_data (need L >= p_max + 10)");

    const auto xs = window.lookback.col(roles.target);

    ArFit best;
    bool any = false;
    for (std::size_t p = 1; p <= p_max; ++p) {
        ArFit fit = fit_ar(xs, p);
        if (!fit.ok) continue;
        if (!any || fit.aic < best.aic) {
            best = std::move(fit);
            any = true;
        }
    }
    if (!any) throw ToolError("autoregressive_residual: degenerate_fit");

    ResidualReport rep;
    rep.order = best.order;
    rep.intercept = best.intercept;
    rep.coefficients = best.coefficients;

    const auto n = static_cast<double>(best.residuals.size());
    double mean = 0;
    for (double e : best.residuals) mean += e;
    rep.residual_mean = mean / n;

    double num = 0, den = 0;
    for (std::size_t i = 0; i < best.residuals.size(); ++i) {
        den += best.residuals[i] * best.residuals[i];
        if (i > 0) num += best.residuals[i] * best.residuals[i - 1];
    }
    rep.lag1_autocorrelation = den > 0 ? num / den : 0.0;

    double var = 0;
    for (double e : best.residuals) var += (e - rep.residual_mean) * (e - rep.residual_mean);
    rep.residual_std = std::sqrt(var / n);
    rep.train_only = true;
    return rep;
}

}  // namespace castflow::toolkit
