#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gsda/dense.hpp"
#include "gsda/graph.hpp"
#include "gsda/rng.hpp"

namespace gsda {

// Base embeddings plus every propagated layer. layers[0] is the base matrix
// itself; layers[l] = a_hat * layers[l-1].
struct EmbeddingState {
    std::vector<Dense> layers;  // length L+1
    size_t dim = 0;

    size_t depth() const { return layers.empty() ? 0 : layers.size() - 1; }
    const Dense& x0() const { return layers.front(); }
    const Dense& layer(size_t l) const { return layers[l]; }
};

// Mean-over-layers readout split into user and item blocks.
struct FinalEmbeddings {
    Dense z;  // M x D users
    Dense e;  // N x D items
};

// Xavier-uniform base embeddings: entries in [-a, a], a = sqrt(6 / (2 * dim)).
inline Dense init_embeddings(size_t m_users, size_t n_items, size_t dim, uint64_t seed) {
    if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
    const double a = std::sqrt(6.0 / static_cast<double>(dim + dim));
    Dense x0(m_users + n_items, dim);
    Rng rng(seed);
    for (double& v : x0.data) v = rng.uniform(-a, a);
    return x0;
}

inline EmbeddingState propagate(const Dense& x0, const AdjacencySet& adj, size_t layers) {
    if (x0.rows != adj.n_nodes()) throw std::invalid_argument("propagate: node count mismatch");
    EmbeddingState st;
    st.dim = x0.cols;
    st.layers.reserve(layers + 1);
    st.layers.push_back(x0);
    for (size_t l = 1; l <= layers; ++l) st.layers.push_back(spmm(adj.a_hat, st.layers.back()));
    return st;
}

inline FinalEmbeddings finalize(const EmbeddingState& st, size_t m_users) {
    const size_t nodes = st.x0().rows;
    const size_t dim = st.dim;
    const double inv = 1.0 / static_cast<double>(st.layers.size());
    Dense mean(nodes, dim);
    for (const Dense& layer : st.layers) axpy(inv, layer.data.data(), mean.data.data(), mean.data.size());

    FinalEmbeddings fin;
    fin.z = Dense(m_users, dim);
    fin.e = Dense(nodes - m_users, dim);
    std::copy(mean.data.begin(), mean.data.begin() + m_users * dim, fin.z.data.begin());
    std::copy(mean.data.begin() + m_users * dim, mean.data.end(), fin.e.data.begin());
    return fin;
}

inline double score(const FinalEmbeddings& fin, size_t user, size_t item) {
    if (user >= fin.z.rows) throw std::out_of_range("score: user id out of range");
    if (item >= fin.e.rows) throw std::out_of_range("score: item id out of range");
    return dot(fin.z.row(user), fin.e.row(item), fin.z.cols);
}

namespace detail {
// x += eps * (sign(x) ⊙ |δ|) / ||δ||, one fresh δ per node. The added vector
// always has norm exactly eps because the sign factor is ±1 per component.
inline void add_sign_aligned_noise(Dense& x, double eps, Rng& rng) {
    const size_t d = x.cols;
    std::vector<double> delta(d);
    for (size_t r = 0; r < x.rows; ++r) {
        double* row = x.row(r);
        double norm_sq = 0.0;
        for (size_t k = 0; k < d; ++k) {
            delta[k] = rng.next_double();
            norm_sq += delta[k] * delta[k];
        }
        const double norm = std::sqrt(norm_sq);
        if (norm == 0.0) continue;
        const double s = eps / norm;
        for (size_t k = 0; k < d; ++k) row[k] += (row[k] >= 0.0 ? s : -s) * delta[k];
    }
}

inline EmbeddingState propagate_perturbed(const Dense& x0, const AdjacencySet& adj, size_t layers,
                                          double eps, uint64_t stream_seed) {
    EmbeddingState st;
    st.dim = x0.cols;
    st.layers.reserve(layers + 1);
    st.layers.push_back(x0);
    Rng rng(stream_seed);
    for (size_t l = 1; l <= layers; ++l) {
        Dense next = spmm(adj.a_hat, st.layers.back());
        add_sign_aligned_noise(next, eps, rng);
        st.layers.push_back(std::move(next));
    }
    return st;
}
}  // namespace detail

// Two stochastic propagation passes for contrastive learning. Each view adds
// per-node noise of fixed norm after every propagation step, from its own
// seeded stream.
inline std::pair<EmbeddingState, EmbeddingState> perturbed_views(const EmbeddingState& st,
                                                                 const AdjacencySet& adj,
                                                                 double eps, uint64_t seed) {
    if (!(eps > 0.0)) throw std::invalid_argument("perturbed_views requires eps > 0");
    return {detail::propagate_perturbed(st.x0(), adj, st.depth(), eps, derive_seed(seed, 1)),
            detail::propagate_perturbed(st.x0(), adj, st.depth(), eps, derive_seed(seed, 2))};
}

// CSV export, one row per node: node_id,role,dim_0..dim_{D-1}
inline void write_embeddings_csv(const std::filesystem::path& path, const Dense& z, const Dense& e) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(17);
    out << "node_id,role";
    for (size_t k = 0; k < z.cols; ++k) out << ",dim_" << k;
    out << '\n';
    for (size_t r = 0; r < z.rows; ++r) {
        out << r << ",user";
        for (size_t k = 0; k < z.cols; ++k) out << ',' << z.at(r, k);
        out << '\n';
    }
    for (size_t r = 0; r < e.rows; ++r) {
        out << (z.rows + r) << ",item";
        for (size_t k = 0; k < e.cols; ++k) out << ',' << e.at(r, k);
        out << '\n';
    }
}

// Reads the export format back; returns the stacked matrix and the user count.
inline std::pair<Dense, size_t> read_embeddings_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty embedding file " + path.string());
    size_t dim = 0;
    for (char c : line) dim += (c == ',');
    dim -= 1;  // node_id,role columns

    std::vector<double> values;
    size_t rows = 0;
    size_t m_users = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        size_t pos = line.find(',');
        const size_t role_end = line.find(',', pos + 1);
        if (line.compare(pos + 1, role_end - pos - 1, "user") == 0) ++m_users;
        pos = role_end;
        while (pos != std::string::npos) {
            const size_t next = line.find(',', pos + 1);
            values.push_back(std::stod(line.substr(pos + 1, next - pos - 1)));
            pos = next;
        }
    }
    if (rows == 0 || values.size() != rows * dim)
        throw std::runtime_error("malformed embedding file " + path.string());
    Dense x(rows, dim);
    x.data = std::move(values);
    return {std::move(x), m_users};
}

}  // namespace gsda
