#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "castflow/errors.hpp"
#include "castflow/matrix.hpp"

namespace castflow {

// Ordered JSON keeps field order fixed so serialized records are
// byte-stable across runs.
using ojson = nlohmann::ordered_json;

// Shortest round-trip decimal form; identical bits always produce
// identical text.
inline std::string num_to_string(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return std::string(buf);
}

inline ojson matrix_to_json(const Matrix& m) {
    ojson rows = ojson::array();
    for (std::size_t r = 0; r < m.rows(); ++r) {
        ojson row = ojson::array();
        for (std::size_t c = 0; c < m.cols(); ++c) {
            double v = m(r, c);
            if (std::isnan(v))
                row.push_back(nullptr);
            else
                row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const ojson& j) {
    if (!j.is_array()) throw Error("matrix_from_json: expected array of rows");
    if (j.empty()) return Matrix{};
    Matrix m(j.size(), j.front().size());
    for (std::size_t r = 0; r < j.size(); ++r) {
        const auto& row = j[r];
        if (row.size() != m.cols()) throw Error("matrix_from_json: ragged rows");
        for (std::size_t c = 0; c < m.cols(); ++c)
            m(r, c) = row[c].is_null() ? std::nan("") : row[c].get<double>();
    }
    return m;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace castflow
