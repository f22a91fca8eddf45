#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gsda/graph.hpp"

namespace gsda {

// Degree-damped user weights: 1 / (ln(1 + d_u) + eps).
inline std::vector<double> user_weights(const std::vector<double>& degrees, double epsilon = 1e-8) {
    if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    std::vector<double> w(degrees.size());
    for (size_t u = 0; u < degrees.size(); ++u) w[u] = 1.0 / (std::log1p(degrees[u]) + epsilon);
    return w;
}

inline std::vector<double> user_weights(const std::vector<size_t>& degrees, double epsilon = 1e-8) {
    return user_weights(std::vector<double>(degrees.begin(), degrees.end()), epsilon);
}

// Weighted item popularity: p_i = sum_u w_u * a_hat[u, M+i]. Only user rows
// are scanned, so self-loop entries never contribute.
inline std::vector<double> item_popularity(const AdjacencySet& adj,
                                           const std::vector<double>& weights) {
    if (weights.size() != adj.m_users) throw std::invalid_argument("one weight per user required");
    std::vector<double> pop(adj.n_items, 0.0);
    const SparseMatrix& a = adj.a_hat;
    for (size_t u = 0; u < adj.m_users; ++u) {
        for (size_t k = a.row_offsets[u]; k < a.row_offsets[u + 1]; ++k) {
            const size_t c = a.col_indices[k];
            if (c >= adj.m_users) pop[c - adj.m_users] += weights[u] * a.values[k];
        }
    }
    return pop;
}

// Gini coefficient of the popularity values: the mean absolute difference
// over all pairs, normalized by twice the mean. Computed through the
// O(n log n) sorted form; the [0, 1) clamp only guards float round-off at
// the degenerate extremes. All-zero input degenerates to 0.
inline double gini(const std::vector<double>& values) {
    if (values.empty()) throw std::invalid_argument("gini of empty list");
    const size_t n = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    if (!(mean > 0.0)) return 0.0;

    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    // sum_{i,j} |x_i - x_j| = 2 * sum_k (2k - n + 1) * x_(k)
    double weighted = 0.0;
    for (size_t k = 0; k < n; ++k)
        weighted += (2.0 * static_cast<double>(k) - static_cast<double>(n) + 1.0) * sorted[k];
    const double g = weighted / (static_cast<double>(n) * static_cast<double>(n) * mean);
    return std::clamp(g, 0.0, 1.0 - 1e-12);
}

struct PopularityStats {
    std::vector<double> user_weight;  // length M
    std::vector<double> item_pop;     // length N
    double gini = 0.0;
    double epsilon = 1e-8;
};

inline PopularityStats compute_popularity_stats(const AdjacencySet& adj,
                                                const std::vector<size_t>& user_degrees,
                                                double epsilon = 1e-8) {
    PopularityStats st;
    st.epsilon = epsilon;
    st.user_weight = user_weights(user_degrees, epsilon);
    st.item_pop = item_popularity(adj, st.user_weight);
    st.gini = gini(st.item_pop);
    return st;
}

// Mixing weight for the two contrastive branches, kept off the exact
// endpoints so both branches always receive gradient.
inline double contrast_weight(const PopularityStats& st) {
    return std::clamp(st.gini, 0.01, 0.99);
}

}  // namespace gsda
