#pragma once

#include <cmath>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "gsda/dataset.hpp"
#include "gsda/rng.hpp"
#include "gsda/sparse.hpp"

namespace gsda {

// Symmetrically normalized bipartite adjacency with self-loops. Nodes are
// users [0, M) followed by items [M, M+N). `degrees` are the row sums of
// A+I, i.e. interaction count + 1.
struct AdjacencySet {
    SparseMatrix a_hat;
    std::vector<double> degrees;
    size_t m_users = 0;
    size_t n_items = 0;

    size_t n_nodes() const { return m_users + n_items; }
};

// `allow_isolated` admits degree-0 nodes (a self-loop keeps their row well
// defined); the strict default rejects them as a data-quality guard.
inline AdjacencySet build_adjacency(const InteractionDataset& ds, bool allow_isolated = false) {
    if (ds.interactions.empty()) throw std::runtime_error("no interactions");
    if (!allow_isolated) {
        for (size_t u = 0; u < ds.m_users; ++u)
            if (ds.user_degree[u] == 0)
                throw std::runtime_error("isolated user node " + std::to_string(u));
        for (size_t i = 0; i < ds.n_items; ++i)
            if (ds.item_degree[i] == 0)
                throw std::runtime_error("isolated item node " + std::to_string(i));
    }

    const size_t m = ds.m_users;
    const size_t n = ds.n_items;
    AdjacencySet adj;
    adj.m_users = m;
    adj.n_items = n;
    adj.degrees.resize(m + n);
    for (size_t u = 0; u < m; ++u) adj.degrees[u] = static_cast<double>(ds.user_degree[u] + 1);
    for (size_t i = 0; i < n; ++i) adj.degrees[m + i] = static_cast<double>(ds.item_degree[i] + 1);

    std::vector<std::tuple<size_t, size_t, double>> triplets;
    triplets.reserve(2 * ds.interactions.size() + m + n);
    for (const auto& [u, i] : ds.interactions) {
        const size_t r = u;
        const size_t c = m + i;
        const double w = 1.0 / std::sqrt(adj.degrees[r] * adj.degrees[c]);
        triplets.emplace_back(r, c, w);
        triplets.emplace_back(c, r, w);
    }
    for (size_t v = 0; v < m + n; ++v) triplets.emplace_back(v, v, 1.0 / adj.degrees[v]);
    adj.a_hat = SparseMatrix::from_triplets(m + n, m + n, std::move(triplets));
    return adj;
}

inline bool is_connected(const AdjacencySet& adj) {
    const size_t n = adj.n_nodes();
    if (n == 0) return true;
    std::vector<char> seen(n, 0);
    std::queue<size_t> frontier;
    frontier.push(0);
    seen[0] = 1;
    size_t visited = 1;
    const SparseMatrix& a = adj.a_hat;
    while (!frontier.empty()) {
        const size_t v = frontier.front();
        frontier.pop();
        for (size_t k = a.row_offsets[v]; k < a.row_offsets[v + 1]; ++k) {
            const size_t w = a.col_indices[k];
            if (!seen[w]) {
                seen[w] = 1;
                ++visited;
                frontier.push(w);
            }
        }
    }
    return visited == n;
}

// Frobenius norms of adjacency powers l = 0..L and the normalized layer
// weights derived from them.
struct LayerWeights {
    std::vector<double> norms;    // length L+1, norms[0] = sqrt(M+N)
    std::vector<double> weights;  // length L+1, sums to 1
};

struct NormEstimator {
    enum class Kind { exact, hutchinson };
    Kind kind = Kind::exact;
    size_t probes = 256;
    uint64_t seed = 0;

    static NormEstimator exact() { return {}; }
    static NormEstimator hutchinson(size_t probes, uint64_t seed) {
        return {Kind::hutchinson, probes, seed};
    }
};

// Exact powers densify quickly, so larger graphs default to randomized
// estimation: ||B||_F^2 = E||B z||^2 over Rademacher probes z.
inline NormEstimator default_norm_estimator(size_t n_nodes, uint64_t seed = 0) {
    return n_nodes < 5000 ? NormEstimator::exact() : NormEstimator::hutchinson(256, seed);
}

inline LayerWeights layer_weights(const AdjacencySet& adj, size_t layers,
                                  const NormEstimator& est = NormEstimator::exact()) {
    if (layers < 1) throw std::invalid_argument("layer_weights requires L >= 1");
    const size_t n = adj.n_nodes();
    LayerWeights lw;
    lw.norms.resize(layers + 1);
    lw.norms[0] = std::sqrt(static_cast<double>(n));

    if (est.kind == NormEstimator::Kind::exact) {
        SparseMatrix power = adj.a_hat;
        lw.norms[1] = frobenius_norm(power);
        for (size_t l = 2; l <= layers; ++l) {
            power = spgemm(power, adj.a_hat);
            lw.norms[l] = frobenius_norm(power);
        }
    } else {
        if (est.probes < 1) throw std::invalid_argument("hutchinson requires probes >= 1");
        std::vector<double> sq_acc(layers + 1, 0.0);
        Rng rng(est.seed);
        Dense z(n, 1);
        for (size_t p = 0; p < est.probes; ++p) {
            for (size_t v = 0; v < n; ++v) z.at(v, 0) = rng.sign();
            Dense cur = z;
            for (size_t l = 1; l <= layers; ++l) {
                cur = spmm(adj.a_hat, cur);
                sq_acc[l] += dot(cur.data.data(), cur.data.data(), n);
            }
        }
        for (size_t l = 1; l <= layers; ++l)
            lw.norms[l] = std::sqrt(sq_acc[l] / static_cast<double>(est.probes));
    }

    double total = 0.0;
    for (double x : lw.norms) {
        if (!(x > 0.0)) throw std::runtime_error("non-positive layer norm");
        total += x;
    }
    lw.weights.resize(layers + 1);
    for (size_t l = 0; l <= layers; ++l) lw.weights[l] = lw.norms[l] / total;
    return lw;
}

// Extremal entry difference of the dense l-th adjacency power. Converges to
// zero on connected graphs as the power grows, reflecting progressive
// uniformization of propagation weights.
struct SpreadResult {
    double spread = 0.0;
    bool connected = true;  // false flags a violated precondition, not an error
};

inline SpreadResult entry_spread(const AdjacencySet& adj, size_t l, size_t node_cap = 2000) {
    if (l < 1) throw std::invalid_argument("entry_spread requires l >= 1");
    const size_t n = adj.n_nodes();
    if (n > node_cap) throw std::runtime_error("spread requires small graph");

    SpreadResult res;
    res.connected = is_connected(adj);

    Dense power(n, n);
    for (size_t v = 0; v < n; ++v) power.at(v, v) = 1.0;
    for (size_t step = 0; step < l; ++step) power = spmm(adj.a_hat, power);

    double lo = power.data[0], hi = power.data[0];
    for (double v : power.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    res.spread = hi - lo;
    return res;
}

}  // namespace gsda
