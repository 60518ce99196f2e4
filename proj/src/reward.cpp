#include "castflow/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace castflow::reward {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::hybrid: return "hybrid";
        case Variant::absolute_mse: return "absolute_mse";
        case Variant::relative_mse: return "relative_mse";
        case Variant::absolute_mae: return "absolute_mae";
    }
    return "hybrid";
}

Variant variant_from_string(const std::string& s) {
    if (s == "hybrid") return Variant::hybrid;
    if (s == "absolute_mse") return Variant::absolute_mse;
    if (s == "relative_mse") return Variant::relative_mse;
    if (s == "absolute_mae") return Variant::absolute_mae;
    throw ConfigError("unknown reward variant: " + s);
}

void RewardConfig::validate() const {
    if (P_violation <= 0 || gamma <= 0 || lambda <= 0 || nu <= 0 || delta <= 0 || exp_rate <= 0)
        throw RewardError("RewardConfig: parameters must be positive");
    if (alpha <= 0 || alpha > 1) throw RewardError("RewardConfig: alpha must be in (0, 1]");
    if (group_size < 2) throw RewardError("RewardConfig: group_size must be at least 2");
}

ojson RewardConfig::to_json() const {
    ojson j;
    j["P_violation"] = P_violation;
    j["alpha"] = alpha;
    j["gamma"] = gamma;
    j["lambda"] = lambda;
    j["nu"] = nu;
    j["delta"] = delta;
    j["exp_rate"] = exp_rate;
    j["variant"] = to_string(variant);
    j["group_size"] = group_size;
    return j;
}

RewardConfig RewardConfig::from_json(const ojson& j) {
    RewardConfig c;
    c.P_violation = j.at("P_violation").get<double>();
    c.alpha = j.at("alpha").get<double>();
    c.gamma = j.at("gamma").get<double>();
    c.lambda = j.at("lambda").get<double>();
    c.nu = j.at("nu").get<double>();
    c.delta = j.at("delta").get<double>();
    c.exp_rate = j.at("exp_rate").get<double>();
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.group_size = j.at("group_size").get<std::size_t>();
    return c;
}

// ============================================================================
// Reward terms
// ============================================================================

double absolute_utility(double eps, double alpha, double gamma, double exp_rate) {
    if (eps < 0) throw RewardError("absolute_utility: negative error");
    if (gamma <= 0) throw RewardError("absolute_utility: gamma must be positive");
    if (eps < gamma) return 1.0 - alpha * std::sin(std::numbers::pi * eps / (2.0 * gamma));
    return (1.0 - alpha) * std::exp(-exp_rate * (eps - gamma) / gamma);
}

double relative_gain(double loss_base, double loss_agent, double lambda, double nu, double delta) {
    return std::clamp(lambda * (loss_base - loss_agent) / nu, -delta, delta);
}

RewardBreakdown compute_reward(const workflow::Trajectory& trajectory, const Matrix& truth,
                               const RewardConfig& config) {
    config.validate();
    if (truth.empty()) throw RewardError("compute_reward: missing ground truth");
    if (!trajectory.baseline) throw RewardError("compute_reward: trajectory carries no baseline");
    if (trajectory.final_forecast.values.empty())
        throw RewardError("compute_reward: trajectory carries no final forecast");

    RewardBreakdown breakdown;
    // Fallback completion means the loop never produced a structurally
    // valid candidate; it is scored as a violation.
    const bool structurally_valid =
        !trajectory.fallback && trajectory.final_forecast.produced_by != Provenance::fallback;
    if (!structurally_valid) {
        breakdown.valid = false;
        breakdown.total = -config.P_violation;
        return breakdown;
    }

    breakdown.valid = true;
    breakdown.loss_agent = mse(trajectory.final_forecast.values, truth);
    breakdown.loss_base = mse(trajectory.baseline->values, truth);

    const double abs_error = config.variant == Variant::absolute_mae
                                 ? mae(trajectory.final_forecast.values, truth)
                                 : breakdown.loss_agent;
    const double abs_term =
        absolute_utility(abs_error, config.alpha, config.gamma, config.exp_rate);
    const double rel_pre =
        config.lambda * (breakdown.loss_base - breakdown.loss_agent) / config.nu;
    const double rel_term = relative_gain(breakdown.loss_base, breakdown.loss_agent, config.lambda,
                                          config.nu, config.delta);

    switch (config.variant) {
        case Variant::hybrid:
            breakdown.absolute_term = abs_term;
            breakdown.relative_term_pre_clip = rel_pre;
            breakdown.relative_term = rel_term;
            break;
        case Variant::absolute_mse:
        case Variant::absolute_mae:
            breakdown.absolute_term = abs_term;
            break;
        case Variant::relative_mse:
            breakdown.relative_term_pre_clip = rel_pre;
            breakdown.relative_term = rel_term;
            break;
    }
    breakdown.total = breakdown.absolute_term + breakdown.relative_term;
    return breakdown;
}

// ============================================================================
// GRPO advantages
// ============================================================================

GroupAdvantage group_advantages(const std::vector<double>& rewards) {
    if (rewards.size() < 2) throw AdvantageError("group_advantages: need at least 2 rewards");
    GroupAdvantage g;
    g.rewards = rewards;
    const auto n = static_cast<double>(rewards.size());
    for (double r : rewards) g.mean += r;
    g.mean /= n;
    double var = 0;
    for (double r : rewards) var += (r - g.mean) * (r - g.mean);
    g.stddev = std::sqrt(var / n);

    g.advantages.resize(rewards.size(), 0.0);
    if (g.stddev > 1e-12)
        for (std::size_t i = 0; i < rewards.size(); ++i)
            g.advantages[i] = (rewards[i] - g.mean) / g.stddev;
    return g;
}

// ============================================================================
// Calibration
// ============================================================================

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw CalibrationError("percentile: empty input");
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= values.size()) return values.back();
    return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

Calibration calibrate(const std::vector<double>& validation_baseline_losses) {
    if (validation_baseline_losses.size() < 20)
        throw CalibrationError("calibrate: need at least 20 validation trajectories, have " +
                               std::to_string(validation_baseline_losses.size()));
    Calibration c;
    c.gamma = percentile(validation_baseline_losses, 0.9);
    c.nu = percentile(validation_baseline_losses, 0.5);
    return c;
}

// ============================================================================
// Breakdown serialization
// ============================================================================

ojson RewardBreakdown::to_json() const {
    ojson j;
    j["valid"] = valid;
    j["absolute_term"] = absolute_term;
    j["relative_term_pre_clip"] = relative_term_pre_clip;
    j["relative_term"] = relative_term;
    j["total"] = total;
    j["loss_agent"] = loss_agent;
    j["loss_base"] = loss_base;
    return j;
}

RewardBreakdown RewardBreakdown::from_json(const ojson& j) {
    RewardBreakdown b;
    b.valid = j.at("valid").get<bool>();
    b.absolute_term = j.at("absolute_term").get<double>();
    b.relative_term_pre_clip = j.at("relative_term_pre_clip").get<double>();
    b.relative_term = j.at("relative_term").get<double>();
    b.total = j.at("total").get<double>();
    b.loss_agent = j.at("loss_agent").get<double>();
    b.loss_base = j.at("loss_base").get<double>();
    return b;
}

// ============================================================================
// Corpus export
// ============================================================================

void export_sft_corpus(const memory::StrategyMemory& memory, const std::string& path) {
    std::ostringstream out;
    for (const auto& entry : memory.entries) {
        ojson j;
        j["schema_version"] = 1;
        j["id"] = entry.id;
        j["prompt"] = entry.prompt;
        j["response"] = entry.response_text;
        out << j.dump() << "\n";
    }
    try {
        write_text_file(path, out.str());
    } catch (const Error& e) {
        throw ExportError(e.what());
    }
}

std::vector<SftRecord> read_sft_corpus(const std::string& path) {
    std::vector<SftRecord> records;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const ojson j = ojson::parse(line);
        if (j.at("schema_version").get<int>() != 1)
            throw ExportError("unsupported sft corpus schema");
        records.push_back(SftRecord{j.at("id").get<std::uint64_t>(),
                                    j.at("prompt").get<std::string>(),
                                    j.at("response").get<std::string>()});
    }
    return records;
}

void export_rollouts(const std::vector<RolloutRecord>& groups, const std::string& path) {
    std::ostringstream out;
    for (const auto& g : groups) {
        ojson j;
        j["schema_version"] = 1;
        j["origin"] = g.origin;
        j["prompt"] = g.prompt;
        j["group_size"] = g.responses.size();
        j["responses"] = g.responses;
        ojson rewards = ojson::array();
        for (const auto& b : g.breakdowns) rewards.push_back(b.total);
        j["rewards"] = std::move(rewards);
        // group statistics double as the empirical trajectory objective
        j["reward_mean"] = g.advantages.mean;
        j["reward_std"] = g.advantages.stddev;
        j["advantages"] = g.advantages.advantages;
        ojson breakdowns = ojson::array();
        for (const auto& b : g.breakdowns) breakdowns.push_back(b.to_json());
        j["breakdowns"] = std::move(breakdowns);
        out << j.dump() << "\n";
    }
    try {
        write_text_file(path, out.str());
    } catch (const Error& e) {
        throw ExportError(e.what());
    }
}

std::vector<RolloutRecord> read_rollouts(const std::string& path) {
    std::vector<RolloutRecord> groups;
    std::istringstream in(read_text_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const ojson j = ojson::parse(line);
        if (j.at("schema_version").get<int>() != 1) throw ExportError("unsupported rollout schema");
        RolloutRecord g;
        g.origin = j.at("origin").get<std::size_t>();
        g.prompt = j.at("prompt").get<std::string>();
        g.responses = j.at("responses").get<std::vector<std::string>>();
        for (const auto& b : j.at("breakdowns")) g.breakdowns.push_back(RewardBreakdown::from_json(b));
        g.advantages.advantages = j.at("advantages").get<std::vector<double>>();
        g.advantages.rewards = j.at("rewards").get<std::vector<double>>();
        g.advantages.mean = j.at("reward_mean").get<double>();
        g.advantages.stddev = j.at("reward_std").get<double>();
        groups.push_back(std::move(g));
    }
    return groups;
}

}  // namespace castflow::reward
