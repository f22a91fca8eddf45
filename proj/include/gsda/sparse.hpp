#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "gsda/dense.hpp"
#include "gsda/threads.hpp"

namespace gsda {

// Row-compressed sparse matrix. Column indices are strictly increasing
// within a row and explicit zeros are never stored.
struct SparseMatrix {
    size_t n_rows = 0;
    size_t n_cols = 0;
    std::vector<size_t> row_offsets;  // length n_rows + 1
    std::vector<size_t> col_indices;
    std::vector<double> values;

    size_t nnz() const { return col_indices.size(); }

    static SparseMatrix identity(size_t n) {
        SparseMatrix m;
        m.n_rows = m.n_cols = n;
        m.row_offsets.resize(n + 1);
        m.col_indices.resize(n);
        m.values.assign(n, 1.0);
        for (size_t i = 0; i < n; ++i) {
            m.row_offsets[i] = i;
            m.col_indices[i] = i;
        }
        m.row_offsets[n] = n;
        return m;
    }

    // Duplicate entries are summed; entries that cancel to zero are dropped.
    static SparseMatrix from_triplets(size_t n_rows, size_t n_cols,
                                      std::vector<std::tuple<size_t, size_t, double>> triplets) {
        std::sort(triplets.begin(), triplets.end(),
                  [](const auto& a, const auto& b) {
                      return std::get<0>(a) != std::get<0>(b) ? std::get<0>(a) < std::get<0>(b)
                                                              : std::get<1>(a) < std::get<1>(b);
                  });
        SparseMatrix m;
        m.n_rows = n_rows;
        m.n_cols = n_cols;
        m.row_offsets.assign(n_rows + 1, 0);
        m.col_indices.reserve(triplets.size());
        m.values.reserve(triplets.size());
        size_t k = 0;
        for (size_t r = 0; r < n_rows; ++r) {
            while (k < triplets.size() && std::get<0>(triplets[k]) == r) {
                const size_t c = std::get<1>(triplets[k]);
                if (c >= n_cols) throw std::invalid_argument("triplet column out of range");
                double v = std::get<2>(triplets[k]);
                ++k;
                while (k < triplets.size() && std::get<0>(triplets[k]) == r &&
                       std::get<1>(triplets[k]) == c) {
                    v += std::get<2>(triplets[k]);
                    ++k;
                }
                if (v != 0.0) {
                    m.col_indices.push_back(c);
                    m.values.push_back(v);
                }
            }
            m.row_offsets[r + 1] = m.col_indices.size();
        }
        if (k < triplets.size()) throw std::invalid_argument("triplet row out of range");
        return m;
    }

    void validate() const {
        if (row_offsets.size() != n_rows + 1) throw std::logic_error("bad offsets length");
        if (row_offsets.front() != 0 || row_offsets.back() != nnz())
            throw std::logic_error("bad offset bounds");
        for (size_t r = 0; r < n_rows; ++r) {
            if (row_offsets[r] > row_offsets[r + 1]) throw std::logic_error("offsets not monotone");
            for (size_t k = row_offsets[r]; k < row_offsets[r + 1]; ++k) {
                if (col_indices[k] >= n_cols) throw std::logic_error("column out of range");
                if (k > row_offsets[r] && col_indices[k - 1] >= col_indices[k])
                    throw std::logic_error("columns not strictly increasing");
                if (values[k] == 0.0) throw std::logic_error("explicit zero stored");
            }
        }
    }
};

// Sparse-dense product. Accumulation is row-major and in column order, so
// the result is bit-identical at any worker count.
inline Dense spmm(const SparseMatrix& m, const Dense& x) {
    if (m.n_cols != x.rows) throw std::invalid_argument("spmm: dimension mismatch");
    Dense y(m.n_rows, x.cols);
    const size_t d = x.cols;
    parallel_for(m.n_rows, [&](size_t lo, size_t hi) {
        for (size_t r = lo; r < hi; ++r) {
            double* out = y.row(r);
            for (size_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k) {
                axpy(m.values[k], x.row(m.col_indices[k]), out, d);
            }
        }
    });
    return y;
}

// Sparse-sparse product with a dense accumulator per row. Intended for the
// modest graphs where exact adjacency powers are requested.
inline SparseMatrix spgemm(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.n_cols != b.n_rows) throw std::invalid_argument("spgemm: dimension mismatch");
    SparseMatrix c;
    c.n_rows = a.n_rows;
    c.n_cols = b.n_cols;
    c.row_offsets.assign(a.n_rows + 1, 0);
    std::vector<double> acc(b.n_cols, 0.0);
    std::vector<char> seen(b.n_cols, 0);
    std::vector<size_t> marks;
    marks.reserve(b.n_cols);
    for (size_t r = 0; r < a.n_rows; ++r) {
        for (size_t ka = a.row_offsets[r]; ka < a.row_offsets[r + 1]; ++ka) {
            const size_t j = a.col_indices[ka];
            const double av = a.values[ka];
            for (size_t kb = b.row_offsets[j]; kb < b.row_offsets[j + 1]; ++kb) {
                const size_t col = b.col_indices[kb];
                if (!seen[col]) {
                    seen[col] = 1;
                    marks.push_back(col);
                }
                acc[col] += av * b.values[kb];
            }
        }
        std::sort(marks.begin(), marks.end());
        for (size_t col : marks) {
            if (acc[col] != 0.0) {
                c.col_indices.push_back(col);
                c.values.push_back(acc[col]);
            }
            acc[col] = 0.0;
            seen[col] = 0;
        }
        marks.clear();
        c.row_offsets[r + 1] = c.col_indices.size();
    }
    return c;
}

inline double frobenius_norm(const SparseMatrix& m) {
    double s = 0.0;
    for (double v : m.values) s += v * v;
    return std::sqrt(s);
}

inline Dense to_dense(const SparseMatrix& m) {
    Dense d(m.n_rows, m.n_cols);
    for (size_t r = 0; r < m.n_rows; ++r)
        for (size_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k)
            d.at(r, m.col_indices[k]) = m.values[k];
    return d;
}

}  // namespace gsda
