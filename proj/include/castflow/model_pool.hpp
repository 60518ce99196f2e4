#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "castflow/core.hpp"
#include "castflow/distance.hpp"
#include "castflow/textio.hpp"

namespace castflow::pool {

// Hyperparameters the classical models need; one shared bundle keeps the
// config surface flat.
struct PoolModelConfig {
    std::size_t seasonal_period = 24;
    std::size_t moving_average_q = 12;
    double es_alpha = 0.3;
    std::size_t ar_order = 4;
};

// A pool member fits on the lookback it is handed and predicts the horizon
// in one call; it never sees future values.
class PoolModel {
public:
    virtual ~PoolModel() = default;
    virtual const std::string& id() const = 0;
    virtual std::vector<double> forecast(const std::vector<double>& lookback,
                                         std::size_t horizon) const = 0;
};

using ModelPool = std::vector<std::unique_ptr<PoolModel>>;

// Built-in names: naive, seasonal_naive, linear_trend, moving_average,
// exponential_smoothing, autoregressive.
std::unique_ptr<PoolModel> make_model(const std::string& name, const PoolModelConfig& config);
ModelPool make_pool(const std::vector<std::string>& names, const PoolModelConfig& config);

// External model behind the plugin protocol: the child process receives the
// lookback as CSV on stdin and must emit exactly H forecast rows as CSV on
// stdout.
std::unique_ptr<PoolModel> make_plugin_model(const std::string& id, const std::string& command);

Forecast run_pool_model(const PoolModel& model, const Window& window, std::size_t target_channel);

// ============================================================================
// Case library
// ============================================================================

struct Cluster {
    Matrix medoid;  // a member window's lookback
    std::size_t member_count = 0;
    std::map<std::string, double> model_losses;  // historical validation MSE per model
};

struct CaseLibrary {
    std::size_t L = 0;
    std::size_t H = 0;
    std::size_t target_channel = 0;
    memory::DistanceConfig distance_config;
    std::vector<std::string> pool_manifest;
    std::vector<Cluster> clusters;

    void save(const std::string& path) const;  // length-prefixed binary, magic + version
    static CaseLibrary load(const std::string& path);
};

struct EnsembleBaseline {
    Matrix values;  // H x 1, target channel
    std::map<std::string, double> weights;
    std::size_t source_cluster = 0;
    double retrieval_distance = 0;
    bool query_degenerate = false;             // constant query flattened by z-scoring
    std::vector<std::string> excluded_models;  // failed and renormalized away

    std::string to_prompt_block() const;
    ojson to_json() const;
    static EnsembleBaseline from_json(const ojson& j);
};

// Windows are clustered by K-medoids under the composite distance over
// target-channel lookbacks; each cluster then scores every pool model by
// mean MSE against the member windows' true futures.
CaseLibrary build_case_library(const TimeSeries& train, std::size_t L, std::size_t H,
                               std::size_t stride, std::size_t k_clusters, const ModelPool& pool,
                               std::uint64_t seed, int workers);

// Softmax over negated losses, stabilized by shifting by the minimum loss.
std::map<std::string, double> ensemble_weights(const std::map<std::string, double>& losses);

// Retrieves the nearest medoid cluster and returns the loss-weighted sum of
// the pool forecasts on the current window. A failing model is excluded and
// the remaining weights renormalize.
EnsembleBaseline anchor_forecast(const Window& window, const CaseLibrary& library,
                                 const ModelPool& pool);

}  // namespace castflow::pool
