#include <doctest.h>

#include <numbers>
#include <random>

#include "castflow/distance.hpp"
#include "castflow/parallel.hpp"
#include "oracles.hpp"

using namespace castflow;
using namespace castflow::memory;

TEST_SUITE("distance") {

TEST_CASE("dtw basics") {
    std::vector<double> a{1, 2, 3, 2, 1};
    CHECK(dtw_distance(a, a) == 0.0);

    std::vector<double> zeros{0, 0, 0};
    std::vector<double> ones{1, 1, 1};
    CHECK(dtw_distance(zeros, ones) == doctest::Approx(3.0));
    CHECK(dtw_distance(ones, zeros) == doctest::Approx(3.0));
}

TEST_CASE("dtw matches the full-table oracle on random pairs") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<std::size_t> len(3, 40);
    for (int trial = 0; trial < 60; ++trial) {
        auto a = oracle::noisy_series(len(rng), 1000 + static_cast<std::uint64_t>(trial));
        auto b = oracle::noisy_series(len(rng), 2000 + static_cast<std::uint64_t>(trial));
        const double got = dtw_distance(a, b);
        CHECK(got == doctest::Approx(oracle::full_table_dtw(a, b)).epsilon(1e-10));
        CHECK(got == doctest::Approx(dtw_distance(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("composite distance identity and shift invariance") {
    DistanceConfig config;
    auto a = oracle::noisy_series(32, 22);
    CHECK(composite_distance(a, a, config) == 0.0);
    CHECK(similarity(a, a, config) == 1.0);

    auto shifted = a;
    for (auto& v : shifted) v += 42.0;
    CHECK(composite_distance(a, shifted, config) == doctest::Approx(0.0).epsilon(1e-12));

    // constant sequences z-normalize to zero vectors and still match
    std::vector<double> c1(16, 5.0), c2(16, 9.0);
    CHECK(composite_distance(c1, c2, config) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("anticorrelated sequences are farther than noisy copies") {
    DistanceConfig config;
    auto a = oracle::noisy_series(48, 23);
    std::vector<double> anti(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) anti[i] = -a[i];
    auto noisy = a;
    std::mt19937_64 rng(24);
    std::normal_distribution<double> d(0.0, 0.05);
    for (auto& v : noisy) v += d(rng);
    CHECK(similarity(a, anti, config) < similarity(a, noisy, config));
}

TEST_CASE("composite distance is symmetric and similarity lives in (0, 1]") {
    DistanceConfig config;
    for (int trial = 0; trial < 40; ++trial) {
        auto a = oracle::random_walk(24, 3000 + static_cast<std::uint64_t>(trial));
        auto b = oracle::random_walk(24, 4000 + static_cast<std::uint64_t>(trial));
        const double ab = composite_distance(a, b, config);
        const double ba = composite_distance(b, a, config);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
        const double sim = similarity(a, b, config);
        CHECK(sim > 0.0);
        CHECK(sim <= 1.0);
    }
    CHECK_THROWS_AS(composite_distance(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3},
                                       config),
                    DistanceError);
}

TEST_CASE("scale calibration divides each term by its in-batch median") {
    std::vector<std::vector<double>> batch;
    for (std::uint64_t s = 0; s < 8; ++s) batch.push_back(oracle::random_walk(20, 100 + s));
    const DistanceConfig calibrated = calibrate_distance_scales(batch, DistanceConfig{}, 1);

    std::vector<double> dtws, eucs, coss;
    for (std::size_t i = 0; i < batch.size(); ++i)
        for (std::size_t j = i + 1; j < batch.size(); ++j) {
            const CompositeTerms t = composite_terms(batch[i], batch[j]);
            dtws.push_back(t.dtw);
            eucs.push_back(t.euclidean);
            coss.push_back(t.cosine_dist);
        }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    CHECK(calibrated.scale_dtw == doctest::Approx(median(dtws)).epsilon(1e-12));
    CHECK(calibrated.scale_euc == doctest::Approx(median(eucs)).epsilon(1e-12));
    CHECK(calibrated.scale_cos == doctest::Approx(median(coss)).epsilon(1e-12));
}

// ----------------------------------------------------------------------------
// K-medoids
// ----------------------------------------------------------------------------

namespace {

std::function<double(std::size_t, std::size_t)> point_distance(const std::vector<double>& pts) {
    return [&pts](std::size_t i, std::size_t j) { return std::abs(pts[i] - pts[j]); };
}

double assignment_cost(const std::vector<double>& pts, const std::vector<std::size_t>& medoids) {
    double cost = 0;
    for (double p : pts) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t m : medoids) best = std::min(best, std::abs(p - pts[m]));
        cost += best;
    }
    return cost;
}

}  // namespace

TEST_CASE("k equal to item count gives singleton clusters at zero cost") {
    std::vector<double> pts{1, 5, 9, 14};
    auto result = k_medoids(pts.size(), point_distance(pts), pts.size(), 20, 7, 1);
    CHECK(result.total_cost == 0.0);
    CHECK(result.medoids.size() == pts.size());
}

TEST_CASE("two tight groups are recovered exactly against the exhaustive oracle") {
    std::vector<double> pts{0.0, 0.1, 0.2, 10.0, 10.1, 10.2};
    auto result = k_medoids(pts.size(), point_distance(pts), 2, 50, 7, 1);

    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            best_cost = std::min(best_cost, assignment_cost(pts, {i, j}));
    CHECK(result.total_cost == doctest::Approx(best_cost).epsilon(1e-12));

    for (std::size_t i = 0; i < 3; ++i) CHECK(result.assignment[i] == result.assignment[0]);
    for (std::size_t i = 3; i < 6; ++i) CHECK(result.assignment[i] == result.assignment[3]);
    CHECK(result.assignment[0] != result.assignment[3]);
}

TEST_CASE("k=1 medoid minimizes total distance over every candidate") {
    auto pts = oracle::noisy_series(15, 25);
    auto result = k_medoids(pts.size(), point_distance(pts), 1, 20, 7, 1);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t cand = 0; cand < pts.size(); ++cand)
        best = std::min(best, assignment_cost(pts, {cand}));
    CHECK(result.total_cost == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("identical items make the shared value the medoid") {
    std::vector<double> pts(8, 3.25);
    auto result = k_medoids(pts.size(), point_distance(pts), 1, 20, 7, 1);
    CHECK(pts[result.medoids[0]] == 3.25);
    CHECK(result.total_cost == 0.0);
}

TEST_CASE("swap iterations never increase the objective") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto pts = oracle::noisy_series(40, 5000 + seed, 0.0, 10.0);
        auto result = k_medoids(pts.size(), point_distance(pts), 4, 50, seed, 1);
        for (std::size_t i = 1; i < result.iteration_costs.size(); ++i)
            CHECK(result.iteration_costs[i] <= result.iteration_costs[i - 1] + 1e-12);
    }
}

TEST_CASE("k_medoids rejects k larger than the item count") {
    std::vector<double> pts{1, 2, 3};
    CHECK_THROWS_AS(k_medoids(3, point_distance(pts), 4, 10, 7, 1), ClusterError);
}

TEST_CASE("clustering separates sine windows from ramp windows") {
    std::vector<std::vector<double>> sequences;
    std::mt19937_64 rng(26);
    std::normal_distribution<double> noise(0.0, 0.05);
    for (int i = 0; i < 12; ++i) {
        std::vector<double> sine(32), ramp(32);
        for (std::size_t t = 0; t < 32; ++t) {
            sine[t] = std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 8.0 +
                               0.3 * static_cast<double>(i)) +
                      noise(rng);
            ramp[t] = 0.5 * static_cast<double>(t) + static_cast<double>(i) + noise(rng);
        }
        sequences.push_back(sine);
        sequences.push_back(ramp);
    }
    const DistanceConfig config = calibrate_distance_scales(sequences, DistanceConfig{}, 1);
    auto result = k_medoids(
        sequences.size(),
        [&](std::size_t i, std::size_t j) {
            return composite_distance(sequences[i], sequences[j], config);
        },
        2, 50, 7, 1);

    // even indices are sines, odd are ramps
    std::size_t agree = 0;
    for (std::size_t i = 0; i < sequences.size(); ++i)
        if ((result.assignment[i] == result.assignment[0]) == (i % 2 == 0)) ++agree;
    CHECK(static_cast<double>(agree) / static_cast<double>(sequences.size()) >= 0.9);
}

// ----------------------------------------------------------------------------
// Parallel kernels
// ----------------------------------------------------------------------------

TEST_CASE("parallel pairwise matrix is bitwise identical to the serial reference") {
    std::vector<std::vector<double>> sequences;
    for (std::uint64_t s = 0; s < 24; ++s) sequences.push_back(oracle::random_walk(48, 6000 + s));
    const DistanceConfig config;
    auto dist = [&](std::size_t i, std::size_t j) {
        return composite_distance(sequences[i], sequences[j], config);
    };
    const auto serial = par::pairwise_matrix_serial(sequences.size(), dist);
    const auto parallel = par::pairwise_matrix(sequences.size(), dist, par::max_workers());
    CHECK(serial == parallel);
    const auto two_workers = par::pairwise_matrix(sequences.size(), dist, 2);
    CHECK(serial == two_workers);
}

TEST_CASE("index_for propagates exceptions from workers") {
    CHECK_THROWS_AS(par::index_for(8, par::max_workers(),
                                   [](std::size_t i) {
                                       if (i == 5) throw DistanceError("boom");
                                   }),
                    DistanceError);
}

}  // TEST_SUITE
