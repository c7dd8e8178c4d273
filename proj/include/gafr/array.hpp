#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <random>
#include <string>
#include <vector>

#include "gafr/errors.hpp"

namespace gafr {

// Dense row-major matrix of doubles. The only array type in the library;
// vectors are n x 1 or 1 x n.
struct Array2 {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Array2() = default;
    Array2(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
    Array2(int r, int c, double fill) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

    static Array2 zeros(int r, int c) { return Array2(r, c); }
    static Array2 ones(int r, int c) { return Array2(r, c, 1.0); }

    static Array2 identity(int n) {
        Array2 out(n, n);
        for (int i = 0; i < n; ++i) out.at(i, i) = 1.0;
        return out;
    }

    static Array2 from_rows(std::initializer_list<std::initializer_list<double>> rs) {
        Array2 out(static_cast<int>(rs.size()), rs.size() ? static_cast<int>(rs.begin()->size()) : 0);
        int i = 0;
        for (const auto& r : rs) {
            if (static_cast<int>(r.size()) != out.cols)
                throw DimensionError("from_rows: ragged initializer");
            int j = 0;
            for (double v : r) out.at(i, j++) = v;
            ++i;
        }
        return out;
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return data.size(); }

    bool same_shape(const Array2& o) const { return rows == o.rows && cols == o.cols; }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        return std::to_string(rows) + "x" + std::to_string(cols);
    }
};

inline bool operator==(const Array2& a, const Array2& b) {
    return a.rows == b.rows && a.cols == b.cols && a.data == b.data;
}

// Gaussian-filled array, one rng draw per entry in row-major order.
inline Array2 random_normal(int rows, int cols, std::mt19937_64& rng, double stddev = 1.0) {
    Array2 out(rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (double& v : out.data) v = dist(rng);
    return out;
}

}  // namespace gafr
