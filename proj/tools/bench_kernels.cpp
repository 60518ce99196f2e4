// Benchmark comparing the serial reference kernels against their
// OpenMP-parallel counterparts: the pairwise composite-distance matrix and
// batch anchor forecasting across windows.

#include <chrono>
#include <cstdio>
#include <random>
#include <vector>

#include "castflow/distance.hpp"
#include "castflow/model_pool.hpp"
#include "castflow/parallel.hpp"

using namespace castflow;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<std::vector<double>> synthetic_sequences(std::size_t n, std::size_t length,
                                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<std::vector<double>> out(n, std::vector<double>(length));
    for (auto& seq : out) {
        double level = noise(rng) * 5.0;
        for (std::size_t t = 0; t < length; ++t)
            seq[t] = level + 4.0 * std::sin(0.26 * static_cast<double>(t)) + noise(rng);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n = argc > 1 ? static_cast<std::size_t>(std::atoll(argv[1])) : 160;
    std::size_t length = argc > 2 ? static_cast<std::size_t>(std::atoll(argv[2])) : 96;
    const int workers = par::max_workers();

    std::printf("kernel benchmark: %zu sequences of length %zu, %d workers\n", n, length, workers);

    const auto sequences = synthetic_sequences(n, length, 7);
    const memory::DistanceConfig config;
    auto dist = [&](std::size_t i, std::size_t j) {
        return memory::composite_distance(sequences[i], sequences[j], config);
    };

    auto t0 = std::chrono::steady_clock::now();
    const auto serial = par::pairwise_matrix_serial(n, dist);
    const double serial_s = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    const auto parallel = par::pairwise_matrix(n, dist, workers);
    const double parallel_s = seconds_since(t0);

    const bool identical = serial == parallel;
    std::printf("pairwise composite distance (%zux%zu)\n", n, n);
    std::printf("  serial    %8.3f s\n", serial_s);
    std::printf("  openmp    %8.3f s   speedup %.2fx   identical=%s\n", parallel_s,
                parallel_s > 0 ? serial_s / parallel_s : 0.0, identical ? "yes" : "NO");

    // Batch anchoring: one model-pool forecast per window.
    const pool::ModelPool models = pool::make_pool(
        {"naive", "seasonal_naive", "linear_trend", "moving_average", "exponential_smoothing",
         "autoregressive"},
        pool::PoolModelConfig{});
    std::vector<Window> windows(n);
    for (std::size_t i = 0; i < n; ++i) {
        windows[i].L = length;
        windows[i].H = 24;
        windows[i].lookback = Matrix::column(sequences[i]);
    }

    auto run_batch = [&](int w) {
        std::vector<double> sums(n, 0.0);
        par::index_for(n, w, [&](std::size_t i) {
            double acc = 0;
            for (const auto& m : models) {
                const Forecast f = pool::run_pool_model(*m, windows[i], 0);
                for (std::size_t h = 0; h < f.values.rows(); ++h) acc += f.values(h, 0);
            }
            sums[i] = acc;
        });
        return sums;
    };

    t0 = std::chrono::steady_clock::now();
    const auto batch_serial = run_batch(1);
    const double batch_serial_s = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto batch_parallel = run_batch(workers);
    const double batch_parallel_s = seconds_since(t0);

    std::printf("batch pool forecasting (%zu windows x %zu models)\n", n, models.size());
    std::printf("  serial    %8.3f s\n", batch_serial_s);
    std::printf("  openmp    %8.3f s   speedup %.2fx   identical=%s\n", batch_parallel_s,
                batch_parallel_s > 0 ? batch_serial_s / batch_parallel_s : 0.0,
                batch_serial == batch_parallel ? "yes" : "NO");

    return identical && batch_serial == batch_parallel ? 0 : 1;
}
