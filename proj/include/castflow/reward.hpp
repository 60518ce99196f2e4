#pragma once

#include <string>
#include <vector>

#include "castflow/memory.hpp"
#include "castflow/workflow.hpp"

namespace castflow::reward {

enum class Variant { hybrid, absolute_mse, relative_mse, absolute_mae };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct RewardConfig {
    double P_violation = 1.0;
    double alpha = 0.8;     // sine-decay amplitude
    double gamma = 1.0;     // dataset-specific error upper bound
    double lambda = 2.0;    // relative-gain multiplier
    double nu = 1.0;        // dataset-specific normalization factor
    double delta = 1.0;     // clip bound
    double exp_rate = 1.0;  // exponential decay beyond gamma
    Variant variant = Variant::hybrid;
    std::size_t group_size = 8;

    void validate() const;
    ojson to_json() const;
    static RewardConfig from_json(const ojson& j);
};

// 1 - alpha*sin(pi*eps/(2*gamma)) below gamma, then
// (1 - alpha)*exp(-exp_rate*(eps - gamma)/gamma); continuous at the knee.
double absolute_utility(double eps, double alpha, double gamma, double exp_rate);

// Clip(lambda*(L_base - L_agent)/nu, -delta, delta).
double relative_gain(double loss_base, double loss_agent, double lambda, double nu, double delta);

struct RewardBreakdown {
    bool valid = false;
    double absolute_term = 0;
    double relative_term_pre_clip = 0;
    double relative_term = 0;
    double total = 0;
    double loss_agent = 0;
    double loss_base = 0;

    ojson to_json() const;
    static RewardBreakdown from_json(const ojson& j);
};

// Invalid trajectories (fallback-completed or format-failed) earn the flat
// violation penalty; valid ones combine the terms the variant selects.
RewardBreakdown compute_reward(const workflow::Trajectory& trajectory, const Matrix& truth,
                               const RewardConfig& config);

struct GroupAdvantage {
    std::vector<double> rewards;
    double mean = 0;
    double stddev = 0;  // population
    std::vector<double> advantages;
};

// A_i = (R_i - mu_R)/sigma_R with population statistics; a degenerate group
// (sigma <= 1e-12) gets all-zero advantages.
GroupAdvantage group_advantages(const std::vector<double>& rewards);

// Linear-interpolation percentile of sorted values (p in [0,1]).
double percentile(std::vector<double> values, double p);

struct Calibration {
    double gamma = 0;  // 90th percentile of validation baseline MSE
    double nu = 0;     // median validation baseline MSE
};

// Requires at least 20 validation baseline losses.
Calibration calibrate(const std::vector<double>& validation_baseline_losses);

// ============================================================================
// Corpus export
// ============================================================================

struct SftRecord {
    std::uint64_t id = 0;
    std::string prompt;
    std::string response;
};

// One record per memory entry: the forecasting context paired with the
// minimum-error response selected during exploration.
void export_sft_corpus(const memory::StrategyMemory& memory, const std::string& path);
std::vector<SftRecord> read_sft_corpus(const std::string& path);

struct RolloutRecord {
    std::size_t origin = 0;
    std::string prompt;
    std::vector<std::string> responses;
    std::vector<RewardBreakdown> breakdowns;
    GroupAdvantage advantages;
};

void export_rollouts(const std::vector<RolloutRecord>& groups, const std::string& path);
std::vector<RolloutRecord> read_rollouts(const std::string& path);

}  // namespace castflow::reward
