#include "castflow/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace castflow {

std::string to_string(Provenance p) {
    switch (p) {
        case Provenance::baseline: return "baseline";
        case Provenance::candidate: return "candidate";
        case Provenance::refined: return "refined";
        case Provenance::fallback: return "fallback";
    }
    return "candidate";
}

Provenance provenance_from_string(const std::string& s) {
    if (s == "baseline") return Provenance::baseline;
    if (s == "candidate") return Provenance::candidate;
    if (s == "refined") return Provenance::refined;
    if (s == "fallback") return Provenance::fallback;
    throw Error("unknown provenance tag: " + s);
}

// ============================================================================
// TimeSeries
// ============================================================================

namespace {

// Timestamps are either all numeric (compared as numbers) or text labels
// such as ISO-8601 dates, which order correctly as strings.
bool timestamp_less(const std::string& a, const std::string& b) {
    double na = 0, nb = 0;
    auto ra = std::from_chars(a.data(), a.data() + a.size(), na);
    auto rb = std::from_chars(b.data(), b.data() + b.size(), nb);
    bool numeric = ra.ec == std::errc{} && ra.ptr == a.data() + a.size() &&
                   rb.ec == std::errc{} && rb.ptr == b.data() + b.size();
    if (numeric) return na < nb;
    return a < b;
}

}  // namespace

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t count) const {
    TimeSeries out;
    out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + begin + count);
    out.values = values.slice_rows(begin, count);
    out.channel_names = channel_names;
    out.target_channel = target_channel;
    out.exogenous_channels = exogenous_channels;
    out.frequency = frequency;
    return out;
}

void TimeSeries::validate() const {
    if (timestamps.size() != values.rows())
        throw Error("TimeSeries: timestamp count does not match value rows");
    for (std::size_t i = 1; i < timestamps.size(); ++i)
        if (!timestamp_less(timestamps[i - 1], timestamps[i]))
            throw Error("TimeSeries: timestamps not strictly increasing at row " + std::to_string(i));
    if (!channel_names.empty() && channel_names.size() != values.cols())
        throw Error("TimeSeries: channel name count does not match columns");
    if (target_channel >= values.cols())
        throw Error("TimeSeries: target channel out of range");
    for (std::size_t e : exogenous_channels) {
        if (e >= values.cols()) throw Error("TimeSeries: exogenous channel out of range");
        if (e == target_channel) throw Error("TimeSeries: target channel listed as exogenous");
    }
}

void Window::validate() const {
    if (L == 0 || H == 0) throw Error("Window: L and H must be positive");
    if (lookback.rows() != L) throw Error("Window: lookback row count != L");
    if (future && future->rows() != H) throw Error("Window: future row count != H");
    if (future && future->cols() != lookback.cols())
        throw Error("Window: future column count != lookback column count");
}

void SplitSpec::validate() const {
    if (train_fraction <= 0 || validation_fraction <= 0 || test_fraction <= 0)
        throw SplitError("SplitSpec: fractions must be positive");
    double sum = train_fraction + validation_fraction + test_fraction;
    if (std::abs(sum - 1.0) > 1e-9)
        throw SplitError("SplitSpec: fractions must sum to 1");
    if (stride == 0) throw ConfigError("SplitSpec: stride must be positive");
}

void Forecast::validate(std::size_t horizon) const {
    if (values.rows() != horizon)
        throw Error("Forecast: expected " + std::to_string(horizon) + " rows, got " +
                    std::to_string(values.rows()));
    if (!values.all_finite()) throw Error("Forecast: non-finite entries");
}

// ============================================================================
// Splitting and windowing
// ============================================================================

SplitResult chronological_split(const TimeSeries& series, const SplitSpec& spec) {
    spec.validate();
    const std::size_t n = series.length();
    if (n < 10) throw SplitError("chronological_split: series shorter than 10 rows");

    const auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::floor(spec.validation_fraction * static_cast<double>(n)));
    const std::size_t n_test = n - n_train - n_val;  // remainder rows land in test
    if (n_train == 0 || n_val == 0 || n_test == 0)
        throw SplitError("chronological_split: a segment would be empty");

    SplitResult out;
    out.train = series.slice(0, n_train);
    out.validation = series.slice(n_train, n_val);
    out.test = series.slice(n_train + n_val, n_test);
    return out;
}

std::vector<Window> make_windows(const TimeSeries& series, std::size_t L, std::size_t H,
                                 std::size_t stride, bool with_future) {
    if (stride == 0) throw ConfigError("make_windows: stride must be positive");
    if (L == 0 || H == 0) throw ConfigError("make_windows: L and H must be positive");
    const std::size_t n = series.length();
    const std::size_t need = L + (with_future ? H : 0);
    if (need > n) throw ConfigError("make_windows: window does not fit in series");

    const std::size_t count = (n - need) / stride + 1;
    std::vector<Window> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t start = i * stride;
        Window w;
        w.L = L;
        w.H = H;
        w.lookback = series.values.slice_rows(start, L);
        w.origin_index = start + L - 1;
        if (with_future) w.future = series.values.slice_rows(start + L, H);
        w.validate();
        out.push_back(std::move(w));
    }
    return out;
}

// ============================================================================
// Metrics
// ============================================================================

double mse(const Matrix& pred, const Matrix& truth) {
    if (!pred.same_shape(truth)) throw MetricError("mse: shape mismatch");
    if (pred.empty()) throw MetricError("mse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data().size(); ++i) {
        const double d = pred.data()[i] - truth.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.data().size());
}

double mae(const Matrix& pred, const Matrix& truth) {
    if (!pred.same_shape(truth)) throw MetricError("mae: shape mismatch");
    if (pred.empty()) throw MetricError("mae: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data().size(); ++i)
        acc += std::abs(pred.data()[i] - truth.data()[i]);
    return acc / static_cast<double>(pred.data().size());
}

// ============================================================================
// CSV ingestion
// ============================================================================

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

bool is_missing_token(const std::string& s) {
    if (s.empty()) return true;
    std::string low;
    for (char c : s) low += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return low == "na" || low == "nan" || low == "null";
}

double parse_cell(const std::string& raw, std::size_t line_no) {
    const std::string s = trimmed(raw);
    if (is_missing_token(s)) return std::nan("");
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw IngestError("line " + std::to_string(line_no) + ": not a number: '" + s + "'");
    return v;
}

}  // namespace

TimeSeries parse_series_csv(const std::string& content, const std::string& target_name,
                            const std::vector<std::string>& exogenous_names,
                            const std::string& frequency) {
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line) || trimmed(line).empty())
        throw IngestError("missing header row");

    auto header = split_csv_line(line);
    if (header.size() < 2) throw IngestError("header must name a timestamp column and at least one channel");
    for (auto& h : header) h = trimmed(h);

    // Reject a header that is actually a data row (all-numeric cells).
    bool all_numeric = true;
    for (const auto& h : header) {
        double v;
        auto res = std::from_chars(h.data(), h.data() + h.size(), v);
        if (res.ec != std::errc{} || res.ptr != h.data() + h.size()) {
            all_numeric = false;
            break;
        }
    }
    if (all_numeric) throw IngestError("first row looks like data; a header row is required");

    std::vector<std::string> names(header.begin() + 1, header.end());

    TimeSeries series;
    series.channel_names = names;
    series.frequency = frequency;

    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trimmed(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw IngestError("line " + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        series.timestamps.push_back(trimmed(fields[0]));
        std::vector<double> row(names.size());
        for (std::size_t c = 0; c < names.size(); ++c) row[c] = parse_cell(fields[c + 1], line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IngestError("no data rows");
    series.values = Matrix::from_rows(rows);

    auto find_channel = [&](const std::string& name) -> std::size_t {
        auto it = std::find(names.begin(), names.end(), name);
        if (it == names.end()) throw IngestError("channel not found in header: '" + name + "'");
        return static_cast<std::size_t>(it - names.begin());
    };
    series.target_channel = find_channel(target_name);
    for (const auto& e : exogenous_names) series.exogenous_channels.push_back(find_channel(e));

    try {
        series.validate();
    } catch (const Error& err) {
        throw IngestError(err.what());
    }
    return series;
}

TimeSeries read_series_csv(const std::string& path, const std::string& target_name,
                           const std::vector<std::string>& exogenous_names,
                           const std::string& frequency) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_series_csv(ss.str(), target_name, exogenous_names, frequency);
}

std::vector<double> channel_dropout(const TimeSeries& series) {
    std::vector<double> out(series.channels(), 0.0);
    if (series.length() == 0) return out;
    for (std::size_t c = 0; c < series.channels(); ++c) {
        std::size_t missing = 0;
        for (std::size_t r = 0; r < series.length(); ++r)
            if (is_missing(series.values(r, c))) ++missing;
        out[c] = static_cast<double>(missing) / static_cast<double>(series.length());
    }
    return out;
}

// ============================================================================
// Least squares (rank-revealing QR)
// ============================================================================

LstsqResult lstsq(const Matrix& a, const std::vector<double>& b) {
    const std::size_t n = a.rows();
    const std::size_t m = a.cols();
    if (n == 0 || m == 0 || b.size() != n) throw Error("lstsq: bad dimensions");

    Matrix r = a;
    std::vector<double> y = b;
    std::vector<std::size_t> perm(m);
    for (std::size_t j = 0; j < m; ++j) perm[j] = j;

    auto col_norm2 = [&](std::size_t col, std::size_t from) {
        double s = 0;
        for (std::size_t i = from; i < n; ++i) s += r(i, col) * r(i, col);
        return s;
    };

    double max_norm = 0;
    for (std::size_t j = 0; j < m; ++j) max_norm = std::max(max_norm, col_norm2(j, 0));
    const double tol2 = max_norm * static_cast<double>(std::max(n, m)) * 1e-24;

    std::size_t rank = 0;
    const std::size_t steps = std::min(n, m);
    for (std::size_t k = 0; k < steps; ++k) {
        // Pivot on the column with the largest remaining norm.
        std::size_t best = k;
        double best_norm = col_norm2(k, k);
        for (std::size_t j = k + 1; j < m; ++j) {
            double nj = col_norm2(j, k);
            if (nj > best_norm) {
                best_norm = nj;
                best = j;
            }
        }
        if (best_norm <= tol2) break;
        if (best != k) {
            for (std::size_t i = 0; i < n; ++i) std::swap(r(i, k), r(i, best));
            std::swap(perm[k], perm[best]);
        }

        // Householder reflector for column k.
        double norm = std::sqrt(best_norm);
        double alpha = r(k, k) >= 0 ? -norm : norm;
        std::vector<double> v(n - k);
        v[0] = r(k, k) - alpha;
        for (std::size_t i = k + 1; i < n; ++i) v[i - k] = r(i, k);
        double vtv = 0;
        for (double x : v) vtv += x * x;
        if (vtv > 0) {
            for (std::size_t j = k; j < m; ++j) {
                double dot = 0;
                for (std::size_t i = k; i < n; ++i) dot += v[i - k] * r(i, j);
                double f = 2.0 * dot / vtv;
                for (std::size_t i = k; i < n; ++i) r(i, j) -= f * v[i - k];
            }
            double dot = 0;
            for (std::size_t i = k; i < n; ++i) dot += v[i - k] * y[i];
            double f = 2.0 * dot / vtv;
            for (std::size_t i = k; i < n; ++i) y[i] -= f * v[i - k];
        }
        r(k, k) = alpha;
        for (std::size_t i = k + 1; i < n; ++i) r(i, k) = 0;
        ++rank;
    }

    std::vector<double> x(m, 0.0);
    for (std::size_t ii = rank; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t j = ii + 1; j < rank; ++j) s -= r(ii, j) * x[perm[j]];
        x[perm[ii]] = s / r(ii, ii);
    }

    return LstsqResult{std::move(x), rank};
}

}  // namespace castflow
