#pragma once

#include <optional>
#include <string>
#include <vector>

#include "castflow/core.hpp"
#include "castflow/textio.hpp"

namespace castflow::toolkit {

enum class ToolId {
    model_auxiliary,
    statistical_analysis,
    basic_statistics,
    data_quality,
    comprehensive_feature,
    trend_analysis,
    changepoint_trend,
    cross_channel,
    exogenous_analysis,
    event_summary,
    autoregressive_residual,
};

std::string to_string(ToolId id);
ToolId tool_from_string(const std::string& s);
const std::vector<ToolId>& all_tools();

enum class Mode { train, test };
inline std::string to_string(Mode m) { return m == Mode::train ? "train" : "test"; }
Mode mode_from_string(const std::string& s);

struct ToolkitParams {
    double kappa = 3.0;
    double dropout_threshold = 0.1;
    double changepoint_sensitivity = 3.0;
    double osc_threshold = 0.4;   // zero crossings per step
    double flat_threshold = 0.1;  // |m|*L relative to sigma
    std::size_t max_lag = 0;      // 0 = auto: min(H, L/4)
    std::size_t p_max = 10;
};

// ============================================================================
// Report types
// ============================================================================

struct ChannelStats {
    double mean = 0;
    double stddev = 0;
    double min = 0;
    double max = 0;
    // Extended fields, populated by basic_statistics only.
    double median = std::nan("");
    double mad = std::nan("");
    double spectral_entropy = std::nan("");
};

struct StatProfile {
    std::vector<ChannelStats> channels;
    bool extended = false;

    std::string to_prompt_block(const ChannelRoles& roles) const;
    ojson to_json() const;
    static StatProfile from_json(const ojson& j);
};

struct QualityReport {
    double dropout_ratio = 0;
    double clip_low = std::nan("");
    double clip_high = std::nan("");
    bool bounds_defined = false;
    bool degraded = false;

    std::string to_prompt_block(const ChannelRoles& roles) const;
    ojson to_json() const;
    static QualityReport from_json(const ojson& j);
};

// Per-channel tuple <mean, sigma, MAD, S_spec, clip bounds> aggregated from
// the three profiler tools.
struct DiagnosticState {
    struct ChannelState {
        double mean = 0;
        double stddev = 0;
        double mad = 0;
        double spectral_entropy = 0;
        double clip_low = 0;
        double clip_high = 0;
    };
    std::vector<ChannelState> channels;
    bool degraded = false;

    std::string to_prompt_block(const ChannelRoles& roles) const;
    ojson to_json() const;
    static DiagnosticState from_json(const ojson& j);
};

struct Changepoint {
    std::size_t index = 0;       // position in the lookback, in [2, L-1]
    double delta = 0;            // first difference at that index
    double delta2 = 0;           // second difference at that index
};

struct DynamicsReport {
    double slope = 0;
    std::vector<Changepoint> changepoints;
    bool momentum_reversal = false;

    std::string to_prompt_block(const ChannelRoles& roles) const;
    ojson to_json() const;
    static DynamicsReport from_json(const ojson& j);
};

struct LagCorrelation {
    int lag = 0;
    double rho = 0;
    bool degenerate = false;  // zero-variance overlap
};

struct PairCorrelogram {
    std::size_t covariate_channel = 0;
    int best_lag = 0;
    double best_rho = 0;
    std::vector<LagCorrelation> correlogram;
};

struct CrossChannelReport {
    std::vector<PairCorrelogram> pairs;

    std::string to_prompt_block(const ChannelRoles& roles) const;
    ojson to_json() const;
    static CrossChannelReport from_json(const ojson& j);
};

enum class EventLabel { rise, fall, flat, oscillation };
std::string to_string(EventLabel e);
EventLabel event_from_string(const std::string& s);

struct EventSummary {
    EventLabel label = EventLabel::flat;
    double trend_strength = 0;     // |m|*L / sigma, 0 when sigma == 0
    double zero_crossing_rate = 0; // sign changes per step of centered diffs

    std::string to_prompt_block(const ChannelRoles& roles) const;
    ojson to_json() const;
    static EventSummary from_json(const ojson& j);
};

struct ResidualReport {
    std::size_t order = 1;
    double intercept = 0;
    std::vector<double> coefficients;
    double residual_mean = 0;
    double lag1_autocorrelation = 0;
    double residual_std = 0;
    bool train_only = true;

    std::string to_prompt_block(const ChannelRoles& roles) const;
    ojson to_json() const;
    static ResidualReport from_json(const ojson& j);
};

struct CovariateFinding {
    std::size_t channel = 0;
    std::string name;
    int best_lag = 0;
    double best_rho = 0;
    double slope = 0;
    std::string hint;
};

struct ExogenousSummary {
    std::vector<CovariateFinding> covariates;
    bool has_covariates = false;
    std::string note;  // explanatory flag when no covariates exist

    std::string to_prompt_block(const ChannelRoles& roles) const;
    ojson to_json() const;
    static ExogenousSummary from_json(const ojson& j);
};

// ============================================================================
// Tools
// ============================================================================

// Every tool reads only the lookback; Window.future never enters these paths.

StatProfile statistical_analysis(const Window& window);
StatProfile basic_statistics(const Window& window);
QualityReport data_quality(const Window& window, const ChannelRoles& roles, double kappa,
                           double dropout_threshold);
DiagnosticState comprehensive_feature(const Window& window, const ChannelRoles& roles, double kappa,
                                      double dropout_threshold = 0.1);
DynamicsReport trend_analysis(const Window& window, const ChannelRoles& roles);
DynamicsReport changepoint_trend(const Window& window, const ChannelRoles& roles, double sensitivity);
CrossChannelReport cross_channel(const Window& window, const ChannelRoles& roles, std::size_t max_lag);
ExogenousSummary exogenous_analysis(const Window& window, const ChannelRoles& roles,
                                    std::size_t max_lag);
EventSummary event_summary(const Window& window, const ChannelRoles& roles, double flat_threshold,
                           double osc_threshold);
std::optional<ResidualReport> autoregressive_residual(const Window& window, const ChannelRoles& roles,
                                                      std::size_t p_max, Mode mode);

std::size_t effective_max_lag(const ToolkitParams& params, std::size_t L, std::size_t H);

// Shared helpers, exposed for cross-checking in tests.
double median_of(std::vector<double> values);            // mean-of-middle-two for even counts
double spectral_entropy_of(const std::vector<double>& x); // natural log, DC excluded

}  // namespace castflow::toolkit
