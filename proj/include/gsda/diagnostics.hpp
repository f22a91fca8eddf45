#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gsda/model.hpp"
#include "gsda/rng.hpp"

namespace gsda {

// Seeded (popular item, unpopular item) pairs: one side from the top
// popularity half, the other from the bottom half.
struct PairSample {
    std::vector<std::pair<uint32_t, uint32_t>> pairs;
    uint64_t seed = 0;
    size_t requested = 0;
    bool truncated = false;  // fewer valid pairs than requested
};

inline PairSample sample_item_pairs(const std::vector<size_t>& item_degree, size_t count,
                                    uint64_t seed) {
    PairSample ps;
    ps.seed = seed;
    ps.requested = count;
    std::vector<uint32_t> order(item_degree.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        return item_degree[a] != item_degree[b] ? item_degree[a] > item_degree[b] : a < b;
    });
    const size_t n_top = order.size() / 2;
    const size_t n_bottom = order.size() - n_top;
    if (n_top == 0 || n_bottom == 0) {
        ps.truncated = true;
        return ps;
    }
    const size_t available = n_top * n_bottom;
    if (available <= count) {
        ps.truncated = available < count;
        for (size_t a = 0; a < n_top; ++a)
            for (size_t b = 0; b < n_bottom; ++b) ps.pairs.emplace_back(order[a], order[n_top + b]);
        return ps;
    }
    Rng rng(seed);
    std::vector<char> taken(available, 0);
    while (ps.pairs.size() < count) {
        const size_t a = rng.uniform_index(n_top);
        const size_t b = rng.uniform_index(n_bottom);
        if (taken[a * n_bottom + b]) continue;
        taken[a * n_bottom + b] = 1;
        ps.pairs.emplace_back(order[a], order[n_top + b]);
    }
    return ps;
}

// Mean squared distance between the paired popular/unpopular embeddings at
// one layer; a distance surrogate for how much independent information the
// unpopular side still carries.
inline double entropy_proxy(const EmbeddingState& st, const PairSample& ps, size_t m_users,
                            size_t layer) {
    if (ps.pairs.empty()) throw std::invalid_argument("entropy_proxy needs pairs");
    const Dense& x = st.layer(layer);
    double acc = 0.0;
    for (const auto& [pop, unpop] : ps.pairs)
        acc += sq_dist(x.row(m_users + unpop), x.row(m_users + pop), x.cols);
    return acc / static_cast<double>(ps.pairs.size());
}

// Mean cosine similarity over the pairs at one layer. Pairs with a zero
// vector are skipped; the skip count lands in *skipped when given.
inline double layer_similarity(const EmbeddingState& st, const PairSample& ps, size_t m_users,
                               size_t layer, size_t* skipped = nullptr) {
    const Dense& x = st.layer(layer);
    double acc = 0.0;
    size_t used = 0, zero = 0;
    for (const auto& [pop, unpop] : ps.pairs) {
        const double np = norm2(x.row(m_users + pop), x.cols);
        const double nu = norm2(x.row(m_users + unpop), x.cols);
        if (np == 0.0 || nu == 0.0) {
            ++zero;
            continue;
        }
        acc += dot(x.row(m_users + pop), x.row(m_users + unpop), x.cols) / (np * nu);
        ++used;
    }
    if (skipped) *skipped = zero;
    return used > 0 ? acc / static_cast<double>(used) : 0.0;
}

struct LayerDiagnostics {
    std::vector<double> entropy_proxy;  // length L+1
    std::vector<double> mean_cosine;    // length L+1
    std::vector<size_t> n_pairs;        // pairs actually used per layer
    size_t layers = 0;
    bool entropy_tail_nonincreasing = true;  // over l in [2, L]
    bool truncated_pairs = false;
};

inline LayerDiagnostics run_diagnostics(const EmbeddingState& st,
                                        const std::vector<size_t>& item_degree, size_t layers,
                                        uint64_t seed, size_t pair_count = 1000) {
    if (layers > st.depth()) throw std::invalid_argument("state is shallower than requested");
    const size_t m_users = st.x0().rows - item_degree.size();
    const PairSample ps = sample_item_pairs(item_degree, pair_count, seed);
    if (ps.pairs.empty()) throw std::runtime_error("no popular/unpopular pairs available");

    LayerDiagnostics ld;
    ld.layers = layers;
    ld.truncated_pairs = ps.truncated;
    for (size_t l = 0; l <= layers; ++l) {
        size_t skipped = 0;
        ld.entropy_proxy.push_back(entropy_proxy(st, ps, m_users, l));
        ld.mean_cosine.push_back(layer_similarity(st, ps, m_users, l, &skipped));
        ld.n_pairs.push_back(ps.pairs.size() - skipped);
    }
    for (size_t l = 3; l <= layers; ++l)
        if (ld.entropy_proxy[l] > ld.entropy_proxy[l - 1] + 1e-12)
            ld.entropy_tail_nonincreasing = false;
    return ld;
}

inline void write_diagnostics_csv(const LayerDiagnostics& ld, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(12);
    out << "layer,entropy_proxy,mean_cosine,n_pairs\n";
    for (size_t l = 0; l <= ld.layers; ++l)
        out << l << ',' << ld.entropy_proxy[l] << ',' << ld.mean_cosine[l] << ',' << ld.n_pairs[l]
            << '\n';
}

}  // namespace gsda
