#include "castflow/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "castflow/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace castflow::par {

int max_workers() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void index_for(std::size_t n, int workers, const std::function<void(std::size_t)>& f) {
#ifdef _OPENMP
    if (workers != 1 && n > 1) {
        std::exception_ptr error;
        const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
        for (long i = 0; i < static_cast<long>(n); ++i) {
            try {
                f(static_cast<std::size_t>(i));
            } catch (...) {
#pragma omp critical
                if (!error) error = std::current_exception();
            }
        }
        if (error) std::rethrow_exception(error);
        return;
    }
#else
    (void)workers;
#endif
    for (std::size_t i = 0; i < n; ++i) f(i);
}

std::vector<double> pairwise_matrix_serial(
    std::size_t n, const std::function<double(std::size_t, std::size_t)>& d) {
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const double v = d(i, j);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    return m;
}

std::vector<double> pairwise_matrix(std::size_t n,
                                    const std::function<double(std::size_t, std::size_t)>& d,
                                    int workers) {
    std::vector<double> m(n * n, 0.0);
    // Each row owns its upper-triangle slots; entries are independent, so
    // the result matches the serial reference exactly.
    index_for(n, workers, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < n; ++j) m[i * n + j] = d(i, j);
    });
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) m[j * n + i] = m[i * n + j];
    return m;
}

}  // namespace castflow::par

namespace castflow::memory {

ZScored z_normalize(std::span<const double> xs) {
    if (xs.empty()) throw DistanceError("z_normalize: empty sequence");
    double mean = 0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(xs.size());
    double var = 0;
    for (double v : xs) var += (v - mean) * (v - mean);
    const double sigma = std::sqrt(var / static_cast<double>(xs.size()));

    ZScored out;
    out.values.resize(xs.size());
    if (sigma == 0) {
        out.degenerate = true;  // constant sequence flattens to zeros
        return out;
    }
    for (std::size_t i = 0; i < xs.size(); ++i) out.values[i] = (xs[i] - mean) / sigma;
    return out;
}

double dtw_distance(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw DistanceError("dtw_distance: empty sequence");
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    const double inf = std::numeric_limits<double>::infinity();

    // Two rolling rows; the test oracle keeps the full DP table instead.
    std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
    prev[0] = 0;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = inf;
        for (std::size_t j = 1; j <= m; ++j) {
            const double diff = a[i - 1] - b[j - 1];
            cur[j] = diff * diff + std::min({prev[j], cur[j - 1], prev[j - 1]});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DistanceError("euclidean_distance: length mismatch");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DistanceError("cosine_similarity: length mismatch");
    bool identical = true;
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        identical = identical && a[i] == b[i];
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (identical) return 1.0;  // keeps d(a, a) exactly zero
    if (na == 0 || nb == 0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

ojson DistanceConfig::to_json() const {
    ojson j;
    j["w_dtw"] = w_dtw;
    j["w_euc"] = w_euc;
    j["w_cos"] = w_cos;
    j["scale_dtw"] = scale_dtw;
    j["scale_euc"] = scale_euc;
    j["scale_cos"] = scale_cos;
    return j;
}

DistanceConfig DistanceConfig::from_json(const ojson& j) {
    DistanceConfig c;
    c.w_dtw = j.at("w_dtw").get<double>();
    c.w_euc = j.at("w_euc").get<double>();
    c.w_cos = j.at("w_cos").get<double>();
    c.scale_dtw = j.at("scale_dtw").get<double>();
    c.scale_euc = j.at("scale_euc").get<double>();
    c.scale_cos = j.at("scale_cos").get<double>();
    return c;
}

CompositeTerms composite_terms(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DistanceError("composite_terms: length mismatch");
    const ZScored za = z_normalize(a);
    const ZScored zb = z_normalize(b);
    CompositeTerms t;
    t.dtw = dtw_distance(za.values, zb.values);
    t.euclidean = euclidean_distance(za.values, zb.values);
    t.cosine_dist = 1.0 - cosine_similarity(za.values, zb.values);
    return t;
}

double composite_distance(std::span<const double> a, std::span<const double> b,
                          const DistanceConfig& config) {
    const CompositeTerms t = composite_terms(a, b);
    return config.w_dtw * t.dtw / config.scale_dtw + config.w_euc * t.euclidean / config.scale_euc +
           config.w_cos * t.cosine_dist / config.scale_cos;
}

double similarity(std::span<const double> a, std::span<const double> b,
                  const DistanceConfig& config) {
    return 1.0 / (1.0 + composite_distance(a, b, config));
}

namespace {

double median_or_one(std::vector<double> v) {
    if (v.empty()) return 1.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double med = n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    return med > 0 ? med : 1.0;
}

}  // namespace

DistanceConfig calibrate_distance_scales(const std::vector<std::vector<double>>& sequences,
                                         const DistanceConfig& base, int workers) {
    const std::size_t n = sequences.size();
    DistanceConfig out = base;
    if (n < 2) return out;

    const std::size_t pairs = n * (n - 1) / 2;
    std::vector<CompositeTerms> terms(pairs);
    // Flattened upper-triangle pair index -> (i, j).
    par::index_for(pairs, workers, [&](std::size_t p) {
        std::size_t i = 0, rank = p;
        while (rank >= n - 1 - i) {
            rank -= n - 1 - i;
            ++i;
        }
        const std::size_t j = i + 1 + rank;
        terms[p] = composite_terms(sequences[i], sequences[j]);
    });

    std::vector<double> dtws(pairs), eucs(pairs), coss(pairs);
    for (std::size_t p = 0; p < pairs; ++p) {
        dtws[p] = terms[p].dtw;
        eucs[p] = terms[p].euclidean;
        coss[p] = terms[p].cosine_dist;
    }
    out.scale_dtw = median_or_one(std::move(dtws));
    out.scale_euc = median_or_one(std::move(eucs));
    out.scale_cos = median_or_one(std::move(coss));
    return out;
}

// ============================================================================
// K-medoids
// ============================================================================

KMedoidsResult k_medoids_matrix(std::size_t n, const std::vector<double>& d, std::size_t k,
                                std::size_t max_iter) {
    if (k == 0) throw ClusterError("k_medoids: k must be positive");
    if (k > n) throw ClusterError("k_medoids: k exceeds item count");
    if (d.size() != n * n) throw ClusterError("k_medoids: bad distance matrix size");

    auto dist = [&](std::size_t i, std::size_t j) { return d[i * n + j]; };

    std::vector<std::size_t> medoids;
    std::vector<bool> is_medoid(n, false);

    // BUILD: first medoid minimizes total distance, the rest maximize the
    // reduction of every item's nearest-medoid distance. Ties pick the
    // lowest index.
    {
        std::size_t best = 0;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            double c = 0;
            for (std::size_t j = 0; j < n; ++j) c += dist(i, j);
            if (c < best_cost) {
                best_cost = c;
                best = i;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = true;
    }
    std::vector<double> nearest(n);
    for (std::size_t j = 0; j < n; ++j) nearest[j] = dist(medoids[0], j);

    while (medoids.size() < k) {
        std::size_t best = n;
        double best_gain = -1.0;
        for (std::size_t c = 0; c < n; ++c) {
            if (is_medoid[c]) continue;
            double gain = 0;
            for (std::size_t j = 0; j < n; ++j) gain += std::max(0.0, nearest[j] - dist(c, j));
            if (gain > best_gain) {
                best_gain = gain;
                best = c;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = true;
        for (std::size_t j = 0; j < n; ++j) nearest[j] = std::min(nearest[j], dist(best, j));
    }

    auto total_cost = [&]() {
        double c = 0;
        for (std::size_t j = 0; j < n; ++j) {
            double m = std::numeric_limits<double>::infinity();
            for (std::size_t mi : medoids) m = std::min(m, dist(mi, j));
            c += m;
        }
        return c;
    };

    KMedoidsResult result;
    result.iteration_costs.push_back(total_cost());

    // SWAP: apply the single best strictly-improving (medoid, candidate)
    // exchange until none remains or max_iter is hit.
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        std::vector<double> d1(n), d2(n);
        std::vector<std::size_t> a1(n);
        for (std::size_t j = 0; j < n; ++j) {
            double first = std::numeric_limits<double>::infinity();
            double second = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
                const double dd = dist(medoids[mi], j);
                if (dd < first) {
                    second = first;
                    first = dd;
                    arg = mi;
                } else if (dd < second) {
                    second = dd;
                }
            }
            d1[j] = first;
            d2[j] = second;
            a1[j] = arg;
        }

        double best_delta = -1e-12;
        std::size_t best_m = 0, best_h = n;
        for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
            for (std::size_t h = 0; h < n; ++h) {
                if (is_medoid[h]) continue;
                double delta = 0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double keep = a1[j] == mi ? d2[j] : d1[j];
                    delta += std::min(keep, dist(h, j)) - d1[j];
                }
                if (delta < best_delta) {
                    best_delta = delta;
                    best_m = mi;
                    best_h = h;
                }
            }
        }
        if (best_h == n) break;
        is_medoid[medoids[best_m]] = false;
        is_medoid[best_h] = true;
        medoids[best_m] = best_h;
        result.iteration_costs.push_back(total_cost());
    }

    result.medoids = medoids;
    result.assignment.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t mi = 0; mi < medoids.size(); ++mi) {
            const double dd = dist(medoids[mi], j);
            if (dd < best) {
                best = dd;
                arg = mi;
            }
        }
        result.assignment[j] = arg;
    }
    result.total_cost = result.iteration_costs.back();
    return result;
}

KMedoidsResult k_medoids(std::size_t item_count,
                         const std::function<double(std::size_t, std::size_t)>& distance,
                         std::size_t k, std::size_t max_iter, std::uint64_t seed, int workers) {
    (void)seed;  // greedy build; results are seed-independent
    if (k > item_count) throw ClusterError("k_medoids: k exceeds item count");
    const std::vector<double> matrix = par::pairwise_matrix(item_count, distance, workers);
    return k_medoids_matrix(item_count, matrix, k, max_iter);
}

}  // namespace castflow::memory
