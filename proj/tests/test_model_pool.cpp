#include <doctest.h>

#include <filesystem>
#include <numbers>
#include <random>

#include "castflow/model_pool.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace castflow;
using namespace castflow::pool;

namespace {

TimeSeries two_regime_series(std::size_t length, std::uint64_t seed) {
    // first half sine-dominated, second half ramp-dominated
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    std::vector<double> xs(length);
    for (std::size_t t = 0; t < length; ++t) {
        if (t < length / 2)
            xs[t] = 5.0 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 12.0) +
                    noise(rng);
        else
            xs[t] = 0.4 * static_cast<double>(t - length / 2) + noise(rng);
    }
    return testutil::series_from_column(xs);
}

}  // namespace

TEST_SUITE("model_pool") {

TEST_CASE("naive repeats the last value") {
    auto model = make_model("naive", PoolModelConfig{});
    auto out = model->forecast({1, 2, 3, 5}, 4);
    for (double v : out) CHECK(v == 5.0);
}

TEST_CASE("seasonal naive repeats the last full period") {
    PoolModelConfig cfg;
    cfg.seasonal_period = 4;
    auto model = make_model("seasonal_naive", cfg);
    auto out = model->forecast({1, 2, 3, 4, 1, 2, 3, 4}, 4);
    CHECK(out == std::vector<double>{1, 2, 3, 4});
    auto wrapped = model->forecast({1, 2, 3, 4, 1, 2, 3, 4}, 6);
    CHECK(wrapped == std::vector<double>{1, 2, 3, 4, 1, 2});
    CHECK_THROWS_AS(model->forecast({1, 2, 3}, 2), ModelError);
}

TEST_CASE("linear trend extrapolates the least-squares slope") {
    auto model = make_model("linear_trend", PoolModelConfig{});
    std::vector<double> xs(10);
    for (std::size_t t = 0; t < 10; ++t) xs[t] = 3.0 * static_cast<double>(t);
    auto out = model->forecast(xs, 2);
    CHECK(out[0] == doctest::Approx(30.0).epsilon(1e-10));
    CHECK(out[1] == doctest::Approx(33.0).epsilon(1e-10));
}

TEST_CASE("moving average and exponential smoothing basics") {
    PoolModelConfig cfg;
    cfg.moving_average_q = 3;
    auto ma = make_model("moving_average", cfg);
    auto out = ma->forecast({10, 1, 2, 3}, 2);
    CHECK(out[0] == doctest::Approx(2.0));
    CHECK(out[1] == doctest::Approx(2.0));

    cfg.es_alpha = 1.0;  // alpha 1 degenerates to naive
    auto es = make_model("exponential_smoothing", cfg);
    auto es_out = es->forecast({4, 7, 9}, 3);
    for (double v : es_out) CHECK(v == doctest::Approx(9.0));
}

TEST_CASE("autoregressive model tracks an AR(1) process") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<double> xs(150);
    xs[0] = 1.0;
    for (std::size_t t = 1; t < xs.size(); ++t) xs[t] = 0.9 * xs[t - 1] + noise(rng);
    PoolModelConfig cfg;
    cfg.ar_order = 2;
    auto model = make_model("autoregressive", cfg);
    auto out = model->forecast(xs, 3);
    // forecasts should stay within the process's plausible range
    for (double v : out) CHECK(std::abs(v) < 5.0);
    CHECK_THROWS_AS(model->forecast({1, 2, 3}, 2), ModelError);
}

TEST_CASE("models never see future values") {
    auto series = two_regime_series(120, 32);
    auto windows = make_windows(series, 24, 8, 8, true);
    auto pool = make_pool({"naive", "seasonal_naive", "linear_trend"}, PoolModelConfig{
                              .seasonal_period = 12, .moving_average_q = 6, .es_alpha = 0.3,
                              .ar_order = 2});
    for (auto& w : windows) {
        Window dirty = w;
        dirty.future = Matrix(w.H, w.lookback.cols(), 1e9);
        for (const auto& m : pool) {
            auto clean_f = run_pool_model(*m, w, 0);
            auto dirty_f = run_pool_model(*m, dirty, 0);
            CHECK(bitwise_equal(clean_f.values, dirty_f.values));
        }
    }
}

TEST_CASE("ensemble weights: softmax of negated losses") {
    auto equal = ensemble_weights({{"a", 2.0}, {"b", 2.0}});
    CHECK(equal["a"] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(equal["b"] == doctest::Approx(0.5).epsilon(1e-12));

    auto skewed = ensemble_weights({{"a", 0.0}, {"b", std::log(3.0)}});
    CHECK(skewed["a"] == doctest::Approx(0.75).epsilon(1e-9));
    CHECK(skewed["b"] == doctest::Approx(0.25).epsilon(1e-9));

    auto single = ensemble_weights({{"only", 3.7}});
    CHECK(single["only"] == 1.0);

    CHECK_THROWS_AS(ensemble_weights({}), EnsembleError);
    CHECK_THROWS_AS(ensemble_weights({{"a", std::nan("")}}), EnsembleError);
}

TEST_CASE("weights form a strict simplex and are monotone in losses") {
    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> loss(0.0, 20.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::map<std::string, double> losses;
        const int n = 2 + trial % 5;
        for (int i = 0; i < n; ++i) losses["m" + std::to_string(i)] = loss(rng);
        auto weights = ensemble_weights(losses);
        double sum = 0;
        for (const auto& [name, w] : weights) {
            CHECK(w > 0.0);
            sum += w;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

        // lowering one loss strictly raises its weight and lowers the rest
        auto lowered = losses;
        lowered["m0"] -= 0.5;
        auto w2 = ensemble_weights(lowered);
        CHECK(w2["m0"] > weights["m0"]);
        for (const auto& [name, w] : weights)
            if (name != "m0") CHECK(w2[name] < w);
    }
}

TEST_CASE("case library clusters two regimes with high purity") {
    // stride equals the sine period so same-regime windows share phase
    auto series = two_regime_series(400, 34);
    PoolModelConfig cfg;
    cfg.seasonal_period = 12;
    cfg.moving_average_q = 6;
    cfg.ar_order = 2;
    auto pool = make_pool({"naive", "seasonal_naive", "linear_trend"}, cfg);
    auto library = build_case_library(series, 24, 8, 12, 2, pool, 7, 1);
    REQUIRE(library.clusters.size() == 2);
    CHECK(library.pool_manifest.size() == 3);
    for (const auto& cluster : library.clusters) {
        CHECK(cluster.member_count > 0);
        CHECK(cluster.medoid.rows() == 24);
        for (const auto& [name, loss] : cluster.model_losses) CHECK(loss >= 0.0);
    }

    // membership purity: windows fully inside one regime should separate
    auto windows = make_windows(series, 24, 8, 12, true);
    auto assignment_of = [&](const Window& w) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t c = 0; c < library.clusters.size(); ++c) {
            const double d = memory::composite_distance(
                w.lookback.col(0), library.clusters[c].medoid.col(0), library.distance_config);
            if (d < best) {
                best = d;
                arg = c;
            }
        }
        return arg;
    };
    std::size_t sine_total = 0, sine_majority = 0, ramp_total = 0, ramp_majority = 0;
    std::map<std::size_t, std::size_t> sine_votes, ramp_votes;
    for (const auto& w : windows) {
        if (w.origin_index + w.H < 200) ++sine_votes[assignment_of(w)];
        if (w.origin_index >= 224) ++ramp_votes[assignment_of(w)];
    }
    std::size_t sine_cluster = 0;
    for (auto& [c, n] : sine_votes) {
        sine_total += n;
        if (n > sine_majority) {
            sine_majority = n;
            sine_cluster = c;
        }
    }
    for (auto& [c, n] : ramp_votes) {
        ramp_total += n;
        ramp_majority = std::max(ramp_majority, n);
    }
    CHECK(static_cast<double>(sine_majority) >= 0.9 * static_cast<double>(sine_total));
    CHECK(static_cast<double>(ramp_majority) >= 0.9 * static_cast<double>(ramp_total));

    // a sine-regime query anchors in the sine cluster
    for (const auto& w : windows) {
        if (w.origin_index + w.H >= 200) continue;
        auto baseline = anchor_forecast(w, library, pool);
        CHECK(baseline.source_cluster == assignment_of(w));
        if (assignment_of(w) == sine_cluster) CHECK(baseline.source_cluster == sine_cluster);
    }
}

TEST_CASE("k=1 library carries the global mean loss per model") {
    auto series = two_regime_series(200, 35);
    PoolModelConfig cfg;
    cfg.seasonal_period = 12;
    auto pool = make_pool({"naive", "linear_trend"}, cfg);
    auto library = build_case_library(series, 24, 8, 8, 1, pool, 7, 1);
    REQUIRE(library.clusters.size() == 1);

    auto windows = make_windows(series, 24, 8, 8, true);
    CHECK(library.clusters[0].member_count == windows.size());
    for (const auto& m : pool) {
        double sum = 0;
        for (const auto& w : windows) {
            auto f = run_pool_model(*m, w, 0);
            sum += mse(f.values, Matrix::column(w.future->col(0)));
        }
        const double expect = sum / static_cast<double>(windows.size());
        CHECK(library.clusters[0].model_losses.at(m->id()) ==
              doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("identical windows make the medoid the common window") {
    std::vector<double> pattern{1, 3, 2, 4, 1, 3, 2, 4, 1, 3, 2, 4};
    std::vector<double> repeated;
    for (int i = 0; i < 10; ++i) repeated.insert(repeated.end(), pattern.begin(), pattern.end());
    auto series = testutil::series_from_column(repeated);
    auto pool = make_pool({"naive"}, PoolModelConfig{});
    auto library = build_case_library(series, 12, 4, 12, 1, pool, 7, 1);
    REQUIRE(library.clusters.size() == 1);
    for (std::size_t r = 0; r < 12; ++r)
        CHECK(library.clusters[0].medoid(r, 0) == pattern[r]);
}

TEST_CASE("library build rejects too few windows") {
    auto series = two_regime_series(60, 36);
    auto pool = make_pool({"naive"}, PoolModelConfig{});
    CHECK_THROWS_AS(build_case_library(series, 24, 8, 8, 4, pool, 7, 1), LibraryError);
}

TEST_CASE("anchor with one cluster and one model equals that model's forecast") {
    auto series = two_regime_series(200, 37);
    auto pool = make_pool({"naive"}, PoolModelConfig{});
    auto library = build_case_library(series, 24, 8, 8, 1, pool, 7, 1);

    auto windows = make_windows(series, 24, 8, 8, true);
    auto baseline = anchor_forecast(windows[3], library, pool);
    auto direct = run_pool_model(*pool[0], windows[3], 0);
    CHECK(bitwise_equal(baseline.values, direct.values));
    CHECK(baseline.weights.at("naive") == 1.0);
}

TEST_CASE("query equal to a medoid retrieves that cluster at distance zero") {
    auto series = two_regime_series(400, 38);
    PoolModelConfig cfg;
    cfg.seasonal_period = 12;
    auto pool = make_pool({"naive", "seasonal_naive"}, cfg);
    auto library = build_case_library(series, 24, 8, 8, 2, pool, 7, 1);

    for (std::size_t c = 0; c < library.clusters.size(); ++c) {
        Window query;
        query.L = 24;
        query.H = 8;
        query.lookback = library.clusters[c].medoid;
        query.origin_index = 23;
        auto baseline = anchor_forecast(query, library, pool);
        CHECK(baseline.source_cluster == c);
        CHECK(baseline.retrieval_distance == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("ensemble output is the weighted model sum and weights sum to one") {
    auto series = two_regime_series(400, 39);
    PoolModelConfig cfg;
    cfg.seasonal_period = 12;
    cfg.moving_average_q = 6;
    cfg.es_alpha = 0.3;
    cfg.ar_order = 2;
    auto pool = make_pool({"naive", "seasonal_naive", "linear_trend", "moving_average",
                           "exponential_smoothing", "autoregressive"},
                          cfg);
    auto library = build_case_library(series, 24, 8, 8, 3, pool, 7, 1);
    auto windows = make_windows(series, 24, 8, 8, true);

    for (const auto& w : windows) {
        auto baseline = anchor_forecast(w, library, pool);
        double sum = 0;
        for (const auto& [name, weight] : baseline.weights) sum += weight;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

        Matrix expect(w.H, 1, 0.0);
        for (const auto& m : pool) {
            auto f = run_pool_model(*m, w, 0);
            const double weight = baseline.weights.at(m->id());
            for (std::size_t h = 0; h < w.H; ++h) expect(h, 0) += weight * f.values(h, 0);
        }
        for (std::size_t h = 0; h < w.H; ++h)
            CHECK(baseline.values(h, 0) == doctest::Approx(expect(h, 0)).epsilon(1e-9));

        // leakage: poisoning the future changes nothing
        Window dirty = w;
        dirty.future = Matrix(w.H, w.lookback.cols(), -1e12);
        auto poisoned = anchor_forecast(dirty, library, pool);
        CHECK(bitwise_equal(baseline.values, poisoned.values));
    }
}

TEST_CASE("failing pool members are excluded and weights renormalize") {
    CaseLibrary library;
    library.L = 8;
    library.H = 3;
    library.target_channel = 0;
    library.pool_manifest = {"naive", "broken"};
    Cluster cluster;
    cluster.medoid = Matrix::column({1, 2, 3, 4, 5, 6, 7, 8});
    cluster.member_count = 1;
    cluster.model_losses = {{"naive", 1.0}, {"broken", 1.0}};
    library.clusters.push_back(cluster);

    ModelPool pool;
    pool.push_back(make_model("naive", PoolModelConfig{}));
    pool.push_back(make_plugin_model("broken", "false"));

    Window w;
    w.L = 8;
    w.H = 3;
    w.lookback = Matrix::column({2, 4, 6, 8, 10, 12, 14, 16});
    w.origin_index = 7;

    auto baseline = anchor_forecast(w, library, pool);
    REQUIRE(baseline.excluded_models == std::vector<std::string>{"broken"});
    CHECK(baseline.weights.at("naive") == 1.0);
    for (std::size_t h = 0; h < 3; ++h) CHECK(baseline.values(h, 0) == 16.0);
}

TEST_CASE("plugin protocol: csv on stdin, H rows on stdout") {
    const std::string command = std::string("python3 ") + CASTFLOW_TEST_FIXTURES + "/plugin_naive.py";
    auto plugin = make_plugin_model("plugin_naive", command);
    auto out = plugin->forecast({1.5, 2.5, 3.25}, 4);
    REQUIRE(out.size() == 4);
    for (double v : out) CHECK(v == doctest::Approx(3.25));
}

TEST_CASE("library snapshot round-trips byte-identically") {
    namespace fs = std::filesystem;
    auto series = two_regime_series(300, 40);
    PoolModelConfig cfg;
    cfg.seasonal_period = 12;
    auto pool = make_pool({"naive", "seasonal_naive"}, cfg);
    auto library = build_case_library(series, 24, 8, 8, 2, pool, 7, 1);

    const auto dir = fs::temp_directory_path();
    const std::string p1 = (dir / "castflow_lib_a.bin").string();
    const std::string p2 = (dir / "castflow_lib_b.bin").string();
    library.save(p1);
    auto loaded = CaseLibrary::load(p1);
    loaded.save(p2);
    CHECK(read_text_file(p1) == read_text_file(p2));

    CHECK(loaded.L == library.L);
    CHECK(loaded.clusters.size() == library.clusters.size());
    CHECK(loaded.clusters[0].model_losses == library.clusters[0].model_losses);
    fs::remove(p1);
    fs::remove(p2);

    CHECK_THROWS_AS(CaseLibrary::load((dir / "missing_library.bin").string()), LibraryError);
}

}  // TEST_SUITE
