#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <vector>

#include "castflow/errors.hpp"

namespace castflow {

// Dense row-major matrix of doubles. Missing observations are NaN.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) return Matrix{};
        Matrix m(rows.size(), rows.front().size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].size() != m.cols_) throw Error("from_rows: ragged row lengths");
            for (std::size_t c = 0; c < m.cols_; ++c) m(r, c) = rows[r][c];
        }
        return m;
    }

    static Matrix column(const std::vector<double>& values) {
        Matrix m(values.size(), 1);
        for (std::size_t r = 0; r < values.size(); ++r) m(r, 0) = values[r];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::vector<double> col(std::size_t c) const {
        std::vector<double> out(rows_);
        for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
        return out;
    }

    std::vector<double> row(std::size_t r) const {
        std::vector<double> out(cols_);
        for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
        return out;
    }

    // Contiguous row slice [begin, begin + count).
    Matrix slice_rows(std::size_t begin, std::size_t count) const {
        Matrix m(count, cols_);
        std::memcpy(m.data_.data(), data_.data() + begin * cols_, count * cols_ * sizeof(double));
        return m;
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// Bit-level equality; unlike operator== this treats NaN slots as equal
// when their bit patterns match.
inline bool bitwise_equal(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return false;
    return a.data().empty() ||
           std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(double)) == 0;
}

struct LstsqResult {
    std::vector<double> coeffs;
    std::size_t rank = 0;
};

// Minimum-residual least squares via column-pivoted Householder QR.
// Rank-deficient systems get zero coefficients on dependent columns, so a
// perfectly collinear design still yields a usable particular solution.
LstsqResult lstsq(const Matrix& a, const std::vector<double>& b);

}  // namespace castflow
