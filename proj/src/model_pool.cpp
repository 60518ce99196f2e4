#include "castflow/model_pool.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "castflow/parallel.hpp"

namespace castflow::pool {

namespace {

// Forward-fill then back-fill; models want gap-free input.
std::vector<double> fill_missing(const std::vector<double>& xs) {
    std::vector<double> out = xs;
    double last = std::nan("");
    for (double& v : out) {
        if (is_missing(v))
            v = last;
        else
            last = v;
    }
    double next = std::nan("");
    for (std::size_t i = out.size(); i-- > 0;) {
        if (is_missing(out[i]))
            out[i] = next;
        else
            next = out[i];
    }
    for (double v : out)
        if (is_missing(v)) throw ModelError("insufficient_data: all values missing");
    return out;
}

double slope_intercept(const std::vector<double>& xs, double& intercept) {
    const auto n = static_cast<double>(xs.size());
    double st = 0, sx = 0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        st += static_cast<double>(t);
        sx += xs[t];
    }
    const double tbar = st / n;
    const double xbar = sx / n;
    double num = 0, den = 0;
    for (std::size_t t = 0; t < xs.size(); ++t) {
        const double dt = static_cast<double>(t) - tbar;
        num += dt * (xs[t] - xbar);
        den += dt * dt;
    }
    const double m = den > 0 ? num / den : 0.0;
    intercept = xbar - m * tbar;
    return m;
}

class NaiveModel final : public PoolModel {
public:
    const std::string& id() const override {
        static const std::string name = "naive";
        return name;
    }
    std::vector<double> forecast(const std::vector<double>& lookback,
                                 std::size_t horizon) const override {
        const auto xs = fill_missing(lookback);
        return std::vector<double>(horizon, xs.back());
    }
};

class SeasonalNaiveModel final : public PoolModel {
public:
    explicit SeasonalNaiveModel(std::size_t period) : period_(period) {}
    const std::string& id() const override {
        static const std::string name = "seasonal_naive";
        return name;
    }
    std::vector<double> forecast(const std::vector<double>& lookback,
                                 std::size_t horizon) const override {
        if (period_ == 0) throw ModelError("seasonal_naive: period must be positive");
        if (lookback.size() < period_)
            throw ModelError("seasonal_naive: insufficient_data (lookback shorter than period)");
        const auto xs = fill_missing(lookback);
        std::vector<double> out(horizon);
        const std::size_t base = xs.size() - period_;
        for (std::size_t h = 0; h < horizon; ++h) out[h] = xs[base + h % period_];
        return out;
    }

private:
    std::size_t period_;
};

class LinearTrendModel final : public PoolModel {
public:
    const std::string& id() const override {
        static const std::string name = "linear_trend";
        return name;
    }
    std::vector<double> forecast(const std::vector<double>& lookback,
                                 std::size_t horizon) const override {
        if (lookback.size() < 2) throw ModelError("linear_trend: insufficient_data");
        const auto xs = fill_missing(lookback);
        double intercept = 0;
        const double m = slope_intercept(xs, intercept);
        std::vector<double> out(horizon);
        for (std::size_t h = 0; h < horizon; ++h)
            out[h] = intercept + m * static_cast<double>(xs.size() + h);
        return out;
    }
};

class MovingAverageModel final : public PoolModel {
public:
    explicit MovingAverageModel(std::size_t q) : q_(q) {}
    const std::string& id() const override {
        static const std::string name = "moving_average";
        return name;
    }
    std::vector<double> forecast(const std::vector<double>& lookback,
                                 std::size_t horizon) const override {
        if (q_ == 0) throw ModelError("moving_average: q must be positive");
        if (lookback.size() < q_) throw ModelError("moving_average: insufficient_data");
        const auto xs = fill_missing(lookback);
        double s = 0;
        for (std::size_t i = xs.size() - q_; i < xs.size(); ++i) s += xs[i];
        return std::vector<double>(horizon, s / static_cast<double>(q_));
    }

private:
    std::size_t q_;
};

class ExponentialSmoothingModel final : public PoolModel {
public:
    explicit ExponentialSmoothingModel(double alpha) : alpha_(alpha) {}
    const std::string& id() const override {
        static const std::string name = "exponential_smoothing";
        return name;
    }
    std::vector<double> forecast(const std::vector<double>& lookback,
                                 std::size_t horizon) const override {
        if (alpha_ <= 0 || alpha_ > 1) throw ModelError("exponential_smoothing: alpha in (0,1]");
        const auto xs = fill_missing(lookback);
        double level = xs.front();
        for (std::size_t i = 1; i < xs.size(); ++i) level = alpha_ * xs[i] + (1 - alpha_) * level;
        return std::vector<double>(horizon, level);
    }

private:
    double alpha_;
};

class AutoregressiveModel final : public PoolModel {
public:
    explicit AutoregressiveModel(std::size_t p) : p_(p) {}
    const std::string& id() const override {
        static const std::string name = "autoregressive";
        return name;
    }
    std::vector<double> forecast(const std::vector<double>& lookback,
                                 std::size_t horizon) const override {
        if (p_ == 0) throw ModelError("autoregressive: order must be positive");
        if (lookback.size() < p_ + 2) throw ModelError("autoregressive: insufficient_data");
        auto xs = fill_missing(lookback);

        const std::size_t rows = xs.size() - p_;
        Matrix design(rows, p_ + 1, 1.0);
        std::vector<double> target(rows);
        for (std::size_t r = 0; r < rows; ++r) {
            const std::size_t t = r + p_;
            target[r] = xs[t];
            for (std::size_t i = 1; i <= p_; ++i) design(r, i) = xs[t - i];
        }
        const LstsqResult fit = lstsq(design, target);
        if (fit.rank == 0) throw ModelError("autoregressive: degenerate_fit");

        // Iterate the fitted recurrence forward over its own predictions.
        std::vector<double> out(horizon);
        for (std::size_t h = 0; h < horizon; ++h) {
            double pred = fit.coeffs[0];
            for (std::size_t i = 1; i <= p_; ++i) pred += fit.coeffs[i] * xs[xs.size() - i];
            xs.push_back(pred);
            out[h] = pred;
        }
        return out;
    }

private:
    std::size_t p_;
};

class PluginModel final : public PoolModel {
public:
    PluginModel(std::string id, std::string command)
        : id_(std::move(id)), command_(std::move(command)) {}
    const std::string& id() const override { return id_; }

    std::vector<double> forecast(const std::vector<double>& lookback,
                                 std::size_t horizon) const override;

private:
    std::string id_;
    std::string command_;
};

std::vector<double> PluginModel::forecast(const std::vector<double>& lookback,
                                          std::size_t horizon) const {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path();
    const auto tag = std::to_string(
        std::hash<std::string>{}(id_ + std::to_string(reinterpret_cast<std::uintptr_t>(this))));
    const fs::path in_path = dir / ("castflow_plugin_" + tag + ".in.csv");
    const fs::path out_path = dir / ("castflow_plugin_" + tag + ".out.csv");

    {
        std::ofstream in(in_path);
        for (double v : lookback) in << num_to_string(v) << "\n";
    }
    const std::string cmd = command_ + " " + std::to_string(horizon) + " < " + in_path.string() +
                            " > " + out_path.string();
    const int rc = std::system(cmd.c_str());
    std::vector<double> out;
    if (rc == 0) {
        std::ifstream res(out_path);
        std::string line;
        while (std::getline(res, line)) {
            if (line.empty()) continue;
            out.push_back(std::stod(line));
        }
    }
    std::error_code ec;
    fs::remove(in_path, ec);
    fs::remove(out_path, ec);
    if (rc != 0) throw ModelError("plugin '" + id_ + "' exited with status " + std::to_string(rc));
    if (out.size() != horizon)
        throw ModelError("plugin '" + id_ + "' emitted " + std::to_string(out.size()) +
                         " rows, expected " + std::to_string(horizon));
    return out;
}

}  // namespace

std::unique_ptr<PoolModel> make_model(const std::string& name, const PoolModelConfig& config) {
    if (name == "naive") return std::make_unique<NaiveModel>();
    if (name == "seasonal_naive") return std::make_unique<SeasonalNaiveModel>(config.seasonal_period);
    if (name == "linear_trend") return std::make_unique<LinearTrendModel>();
    if (name == "moving_average") return std::make_unique<MovingAverageModel>(config.moving_average_q);
    if (name == "exponential_smoothing")
        return std::make_unique<ExponentialSmoothingModel>(config.es_alpha);
    if (name == "autoregressive") return std::make_unique<AutoregressiveModel>(config.ar_order);
    throw ModelError("unknown pool model: " + name);
}

ModelPool make_pool(const std::vector<std::string>& names, const PoolModelConfig& config) {
    ModelPool pool;
    for (const auto& n : names) pool.push_back(make_model(n, config));
    return pool;
}

std::unique_ptr<PoolModel> make_plugin_model(const std::string& id, const std::string& command) {
    return std::make_unique<PluginModel>(id, command);
}

Forecast run_pool_model(const PoolModel& model, const Window& window, std::size_t target_channel) {
    const auto values = model.forecast(window.lookback.col(target_channel), window.H);
    Forecast f;
    f.values = Matrix::column(values);
    f.produced_by = Provenance::baseline;
    f.validate(window.H);
    return f;
}

// ============================================================================
// Ensemble weighting
// ============================================================================

std::map<std::string, double> ensemble_weights(const std::map<std::string, double>& losses) {
    if (losses.empty()) throw EnsembleError("ensemble_weights: empty loss map");
    double min_loss = std::numeric_limits<double>::infinity();
    for (const auto& [name, loss] : losses) {
        if (!std::isfinite(loss)) throw EnsembleError("ensemble_weights: non-finite loss for " + name);
        min_loss = std::min(min_loss, loss);
    }
    // Shift by the minimum before exponentiating; softmax is invariant to
    // the shift and this keeps exp() in range.
    std::map<std::string, double> weights;
    double total = 0;
    for (const auto& [name, loss] : losses) {
        const double w = std::exp(-(loss - min_loss));
        weights[name] = w;
        total += w;
    }
    for (auto& [name, w] : weights) w /= total;
    return weights;
}

// ============================================================================
// Library construction
// ============================================================================

CaseLibrary build_case_library(const TimeSeries& train, std::size_t L, std::size_t H,
                               std::size_t stride, std::size_t k_clusters, const ModelPool& pool,
                               std::uint64_t seed, int workers) {
    if (pool.empty()) throw LibraryError("build_case_library: empty model pool");
    if (k_clusters == 0) throw LibraryError("build_case_library: k_clusters must be positive");

    std::vector<Window> windows;
    try {
        windows = make_windows(train, L, H, stride, /*with_future=*/true);
    } catch (const Error& e) {
        throw LibraryError(std::string("build_case_library: ") + e.what());
    }
    if (windows.size() < 2 * k_clusters)
        throw LibraryError("build_case_library: need at least 2*k windows, have " +
                           std::to_string(windows.size()));

    const std::size_t target = train.target_channel;
    std::vector<std::vector<double>> sequences;
    sequences.reserve(windows.size());
    for (const auto& w : windows) sequences.push_back(w.lookback.col(target));

    CaseLibrary lib;
    lib.L = L;
    lib.H = H;
    lib.target_channel = target;
    lib.distance_config = memory::calibrate_distance_scales(sequences, memory::DistanceConfig{}, workers);
    for (const auto& m : pool) lib.pool_manifest.push_back(m->id());

    memory::KMedoidsResult clustering;
    try {
        clustering = memory::k_medoids(
            windows.size(),
            [&](std::size_t i, std::size_t j) {
                return memory::composite_distance(sequences[i], sequences[j], lib.distance_config);
            },
            k_clusters, /*max_iter=*/100, seed, workers);
    } catch (const ClusterError& e) {
        throw LibraryError(std::string("build_case_library: ") + e.what());
    }

    // Historical validation loss: each model forecasts every window from its
    // lookback alone and is scored against the window's true future.
    std::vector<std::vector<double>> losses(pool.size(),
                                            std::vector<double>(windows.size(), 0.0));
    par::index_for(windows.size(), workers, [&](std::size_t wi) {
        const Matrix truth = Matrix::column(windows[wi].future->col(target));
        for (std::size_t mi = 0; mi < pool.size(); ++mi) {
            const Forecast f = run_pool_model(*pool[mi], windows[wi], target);
            losses[mi][wi] = mse(f.values, truth);
        }
    });

    lib.clusters.resize(clustering.medoids.size());
    for (std::size_t c = 0; c < clustering.medoids.size(); ++c) {
        lib.clusters[c].medoid = windows[clustering.medoids[c]].lookback;
    }
    for (std::size_t wi = 0; wi < windows.size(); ++wi)
        ++lib.clusters[clustering.assignment[wi]].member_count;
    for (std::size_t c = 0; c < lib.clusters.size(); ++c) {
        for (std::size_t mi = 0; mi < pool.size(); ++mi) {
            double sum = 0;
            std::size_t count = 0;
            for (std::size_t wi = 0; wi < windows.size(); ++wi) {
                if (clustering.assignment[wi] != c) continue;
                sum += losses[mi][wi];
                ++count;
            }
            lib.clusters[c].model_losses[pool[mi]->id()] =
                count > 0 ? sum / static_cast<double>(count) : 0.0;
        }
    }
    return lib;
}

// ============================================================================
// Anchoring
// ============================================================================

EnsembleBaseline anchor_forecast(const Window& window, const CaseLibrary& library,
                                 const ModelPool& pool) {
    if (library.clusters.empty()) throw EnsembleError("anchor_forecast: empty library");
    if (window.L != library.L)
        throw EnsembleError("anchor_forecast: window L does not match library");
    if (pool.size() != library.pool_manifest.size())
        throw EnsembleError("anchor_forecast: pool does not match library manifest");
    for (std::size_t i = 0; i < pool.size(); ++i)
        if (pool[i]->id() != library.pool_manifest[i])
            throw EnsembleError("anchor_forecast: pool does not match library manifest");

    const auto query = window.lookback.col(library.target_channel);

    EnsembleBaseline base;
    base.query_degenerate = memory::z_normalize(query).degenerate;

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < library.clusters.size(); ++c) {
        const double d = memory::composite_distance(
            query, library.clusters[c].medoid.col(library.target_channel), library.distance_config);
        if (d < best) {
            best = d;
            base.source_cluster = c;
        }
    }
    base.retrieval_distance = best;

    // Run every pool member; a failure drops that model and the surviving
    // losses are re-softmaxed.
    std::map<std::string, double> usable_losses;
    std::map<std::string, Matrix> forecasts;
    const auto& losses = library.clusters[base.source_cluster].model_losses;
    for (const auto& m : pool) {
        const auto it = losses.find(m->id());
        if (it == losses.end()) continue;
        try {
            const Forecast f = run_pool_model(*m, window, library.target_channel);
            forecasts[m->id()] = f.values;
            usable_losses[m->id()] = it->second;
        } catch (const Error&) {
            base.excluded_models.push_back(m->id());
        }
    }
    if (usable_losses.empty())
        throw EnsembleError("anchor_forecast: every pool model failed on this window");

    base.weights = ensemble_weights(usable_losses);
    base.values = Matrix(window.H, 1, 0.0);
    for (const auto& [name, w] : base.weights) {
        const Matrix& f = forecasts.at(name);
        for (std::size_t h = 0; h < window.H; ++h) base.values(h, 0) += w * f(h, 0);
    }
    return base;
}

// ============================================================================
// EnsembleBaseline serialization
// ============================================================================

std::string EnsembleBaseline::to_prompt_block() const {
    std::ostringstream out;
    out << "[model_auxiliary]\n";
    out << "source_cluster=" << source_cluster
        << " retrieval_distance=" << num_to_string(retrieval_distance) << "\n";
    out << "weights:";
    for (const auto& [name, w] : weights) out << " " << name << "=" << num_to_string(w);
    out << "\n";
    out << "baseline:";
    for (std::size_t h = 0; h < values.rows(); ++h) out << " " << num_to_string(values(h, 0));
    out << "\n";
    return out.str();
}

ojson EnsembleBaseline::to_json() const {
    ojson j;
    j["values"] = matrix_to_json(values);
    ojson w;
    for (const auto& [name, weight] : weights) w[name] = weight;
    j["weights"] = std::move(w);
    j["source_cluster"] = source_cluster;
    j["retrieval_distance"] = retrieval_distance;
    j["query_degenerate"] = query_degenerate;
    j["excluded_models"] = excluded_models;
    return j;
}

EnsembleBaseline EnsembleBaseline::from_json(const ojson& j) {
    EnsembleBaseline b;
    b.values = matrix_from_json(j.at("values"));
    for (const auto& [name, weight] : j.at("weights").items())
        b.weights[name] = weight.get<double>();
    b.source_cluster = j.at("source_cluster").get<std::size_t>();
    b.retrieval_distance = j.at("retrieval_distance").get<double>();
    b.query_degenerate = j.at("query_degenerate").get<bool>();
    b.excluded_models = j.at("excluded_models").get<std::vector<std::string>>();
    return b;
}

// ============================================================================
// Library snapshot (binary, versioned)
// ============================================================================

namespace {

constexpr char kMagic[4] = {'C', 'F', 'L', 'B'};
constexpr std::uint8_t kVersion = 1;

void put_u64(std::ofstream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

void put_f64(std::ofstream& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_string(std::ofstream& out, const std::string& s) {
    put_u64(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint64_t get_u64(std::ifstream& in) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw LibraryError("library snapshot truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

double get_f64(std::ifstream& in) { return std::bit_cast<double>(get_u64(in)); }

std::string get_string(std::ifstream& in) {
    const std::uint64_t n = get_u64(in);
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw LibraryError("library snapshot truncated");
    return s;
}

void put_matrix(std::ofstream& out, const Matrix& m) {
    put_u64(out, m.rows());
    put_u64(out, m.cols());
    for (double v : m.data()) put_f64(out, v);
}

Matrix get_matrix(std::ifstream& in) {
    const std::uint64_t rows = get_u64(in);
    const std::uint64_t cols = get_u64(in);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = get_f64(in);
    return m;
}

}  // namespace

void CaseLibrary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw LibraryError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    out.put(static_cast<char>(kVersion));
    put_u64(out, L);
    put_u64(out, H);
    put_u64(out, target_channel);
    put_f64(out, distance_config.w_dtw);
    put_f64(out, distance_config.w_euc);
    put_f64(out, distance_config.w_cos);
    put_f64(out, distance_config.scale_dtw);
    put_f64(out, distance_config.scale_euc);
    put_f64(out, distance_config.scale_cos);
    put_u64(out, pool_manifest.size());
    for (const auto& id : pool_manifest) put_string(out, id);
    put_u64(out, clusters.size());
    for (const auto& c : clusters) {
        put_u64(out, c.member_count);
        put_matrix(out, c.medoid);
        for (const auto& id : pool_manifest) put_f64(out, c.model_losses.at(id));
    }
    if (!out) throw LibraryError("write failed: " + path);
}

CaseLibrary CaseLibrary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LibraryError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw LibraryError("not a case library snapshot: " + path);
    const int version = in.get();
    if (version != kVersion)
        throw LibraryError("unsupported library snapshot version " + std::to_string(version));

    CaseLibrary lib;
    lib.L = get_u64(in);
    lib.H = get_u64(in);
    lib.target_channel = get_u64(in);
    lib.distance_config.w_dtw = get_f64(in);
    lib.distance_config.w_euc = get_f64(in);
    lib.distance_config.w_cos = get_f64(in);
    lib.distance_config.scale_dtw = get_f64(in);
    lib.distance_config.scale_euc = get_f64(in);
    lib.distance_config.scale_cos = get_f64(in);
    const std::uint64_t n_models = get_u64(in);
    for (std::uint64_t i = 0; i < n_models; ++i) lib.pool_manifest.push_back(get_string(in));
    const std::uint64_t n_clusters = get_u64(in);
    for (std::uint64_t c = 0; c < n_clusters; ++c) {
        Cluster cluster;
        cluster.member_count = get_u64(in);
        cluster.medoid = get_matrix(in);
        for (const auto& id : lib.pool_manifest) cluster.model_losses[id] = get_f64(in);
        lib.clusters.push_back(std::move(cluster));
    }
    return lib;
}

}  // namespace castflow::pool
