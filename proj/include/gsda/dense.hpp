#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace gsda {

// Row-major dense matrix of doubles.
struct Dense {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Dense() = default;
    Dense(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double* row(size_t i) { return data.data() + i * cols; }
    const double* row(size_t i) const { return data.data() + i * cols; }

    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool same_shape(const Dense& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t k = 0; k < n; ++k) s += a[k] * b[k];
    return s;
}

// y += alpha * x
inline void axpy(double alpha, const double* x, double* y, size_t n) {
    for (size_t k = 0; k < n; ++k) y[k] += alpha * x[k];
}

inline void axpy(double alpha, const Dense& x, Dense& y) {
    axpy(alpha, x.data.data(), y.data.data(), y.data.size());
}

inline double norm2(const double* a, size_t n) {
    return std::sqrt(dot(a, a, n));
}

inline double sq_dist(const double* a, const double* b, size_t n) {
    double s = 0.0;
    for (size_t k = 0; k < n; ++k) {
        const double d = a[k] - b[k];
        s += d * d;
    }
    return s;
}

inline bool all_finite(const Dense& m) {
    for (double v : m.data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace gsda
