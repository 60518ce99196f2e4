#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "castflow/errors.hpp"
#include "castflow/matrix.hpp"

namespace castflow {

inline bool is_missing(double v) { return std::isnan(v); }

enum class Provenance { baseline, candidate, refined, fallback };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

// Which columns play which role. Tools and prompts receive this alongside
// the raw window since windows themselves carry no channel metadata.
struct ChannelRoles {
    std::size_t target = 0;
    std::vector<std::size_t> exogenous;
    std::vector<std::string> names;

    const std::string& target_name() const { return names[target]; }
};

// ============================================================================
// Domain types
// ============================================================================

struct TimeSeries {
    std::vector<std::string> timestamps;  // ISO-8601 strings or integer indices
    Matrix values;                        // length x channels, NaN = missing
    std::vector<std::string> channel_names;
    std::size_t target_channel = 0;
    std::vector<std::size_t> exogenous_channels;
    std::string frequency;

    std::size_t length() const { return values.rows(); }
    std::size_t channels() const { return values.cols(); }

    ChannelRoles roles() const { return ChannelRoles{target_channel, exogenous_channels, channel_names}; }

    // Contiguous sub-series [begin, begin + count).
    TimeSeries slice(std::size_t begin, std::size_t count) const;

    // Throws Error when a structural invariant is broken: non-increasing
    // timestamps, row/timestamp count mismatch, target listed as exogenous,
    // or an out-of-range channel index.
    void validate() const;
};

struct Window {
    Matrix lookback;               // L x C
    std::optional<Matrix> future;  // H x C, only for train/validation instances
    std::size_t origin_index = 0;  // parent index of the last lookback row
    std::size_t L = 0;
    std::size_t H = 0;

    void validate() const;
};

struct SplitSpec {
    double train_fraction = 0.7;
    double validation_fraction = 0.1;
    double test_fraction = 0.2;
    std::size_t stride = 1;

    void validate() const;
};

struct Forecast {
    Matrix values;  // H x C_target
    Provenance produced_by = Provenance::candidate;

    void validate(std::size_t horizon) const;
};

struct SplitResult {
    TimeSeries train;
    TimeSeries validation;
    TimeSeries test;
};

// ============================================================================
// Operations
// ============================================================================

// Three contiguous chronological segments; train/validation take
// floor(fraction * length) rows and the remainder goes to test.
SplitResult chronological_split(const TimeSeries& series, const SplitSpec& spec);

// Sliding windows starting at row 0 and advancing by stride. Count is
// floor((length - L - H*with_future) / stride) + 1.
std::vector<Window> make_windows(const TimeSeries& series, std::size_t L, std::size_t H,
                                 std::size_t stride, bool with_future);

double mse(const Matrix& pred, const Matrix& truth);
double mae(const Matrix& pred, const Matrix& truth);
inline double mse(const Forecast& pred, const Matrix& truth) { return mse(pred.values, truth); }
inline double mae(const Forecast& pred, const Matrix& truth) { return mae(pred.values, truth); }

// ============================================================================
// CSV ingestion
// ============================================================================

// First column is the timestamp, the rest are real-valued channels. A header
// row is required; blank, "na" and "nan" cells become the NaN sentinel.
// Channel roles come from the caller, never inferred from the data.
TimeSeries read_series_csv(const std::string& path, const std::string& target_name,
                           const std::vector<std::string>& exogenous_names,
                           const std::string& frequency);

TimeSeries parse_series_csv(const std::string& content, const std::string& target_name,
                            const std::vector<std::string>& exogenous_names,
                            const std::string& frequency);

// Per-channel fraction of missing entries, in channel order.
std::vector<double> channel_dropout(const TimeSeries& series);

}  // namespace castflow
