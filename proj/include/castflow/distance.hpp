#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "castflow/errors.hpp"
#include "castflow/textio.hpp"

namespace castflow::memory {

struct ZScored {
    std::vector<double> values;
    bool degenerate = false;  // sigma == 0: normalized to all-zeros
};

// Per-sequence z-score using the sequence's own mean and population sigma.
ZScored z_normalize(std::span<const double> xs);

// Classic DP alignment with squared-difference local cost and unit steps.
double dtw_distance(std::span<const double> a, std::span<const double> b);

double euclidean_distance(std::span<const double> a, std::span<const double> b);

// Conventions for zero vectors: both zero -> 1 (identical), one zero -> 0.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

struct DistanceConfig {
    double w_dtw = 1.0 / 3.0;
    double w_euc = 1.0 / 3.0;
    double w_cos = 1.0 / 3.0;
    // In-batch medians of the raw terms; they put the three metrics on a
    // comparable scale. 1.0 until calibrated.
    double scale_dtw = 1.0;
    double scale_euc = 1.0;
    double scale_cos = 1.0;

    ojson to_json() const;
    static DistanceConfig from_json(const ojson& j);
};

struct CompositeTerms {
    double dtw = 0;
    double euclidean = 0;
    double cosine_dist = 0;  // 1 - cosine similarity
};

// Raw terms on z-normalized copies of the inputs.
CompositeTerms composite_terms(std::span<const double> a, std::span<const double> b);

double composite_distance(std::span<const double> a, std::span<const double> b,
                          const DistanceConfig& config);

// sim = 1 / (1 + d), in (0, 1].
double similarity(std::span<const double> a, std::span<const double> b,
                  const DistanceConfig& config);

// Median of each raw term over all pairs in the batch; zero medians fall
// back to 1 so degenerate batches stay usable.
DistanceConfig calibrate_distance_scales(const std::vector<std::vector<double>>& sequences,
                                         const DistanceConfig& base, int workers);

// ============================================================================
// K-medoids (PAM build + swap)
// ============================================================================

struct KMedoidsResult {
    std::vector<std::size_t> medoids;     // item indices, one per cluster
    std::vector<std::size_t> assignment;  // item -> cluster position
    std::vector<double> iteration_costs;  // cost after build, then after each swap
    double total_cost = 0;
};

// Greedy PAM build followed by best-improvement swaps; the build is
// deterministic, so results do not depend on the seed.
KMedoidsResult k_medoids(std::size_t item_count,
                         const std::function<double(std::size_t, std::size_t)>& distance,
                         std::size_t k, std::size_t max_iter, std::uint64_t seed, int workers);

// Same algorithm on a precomputed row-major distance matrix.
KMedoidsResult k_medoids_matrix(std::size_t item_count, const std::vector<double>& dist_matrix,
                                std::size_t k, std::size_t max_iter);

}  // namespace castflow::memory
