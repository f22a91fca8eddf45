#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "gsda/dataset.hpp"
#include "gsda/rng.hpp"

namespace testutil {

inline gsda::InteractionDataset from_pairs(size_t m, size_t n,
                                           std::vector<std::pair<uint32_t, uint32_t>> pairs) {
    gsda::InteractionDataset ds;
    ds.m_users = m;
    ds.n_items = n;
    ds.interactions = std::move(pairs);
    for (size_t u = 0; u < m; ++u) ds.user_tokens.push_back("u" + std::to_string(u));
    for (size_t i = 0; i < n; ++i) ds.item_tokens.push_back("i" + std::to_string(i));
    ds.recount_degrees();
    return ds;
}

// Connected bipartite graph: a user-item chain as a spanning backbone plus
// random extra edges.
inline gsda::InteractionDataset make_connected(size_t m, size_t n, size_t extra_edges,
                                               uint64_t seed) {
    gsda::Rng rng(seed);
    std::set<std::pair<uint32_t, uint32_t>> edges;
    const size_t chain = std::max(m, n);
    for (size_t k = 0; k < chain; ++k) {
        const uint32_t u = static_cast<uint32_t>(k % m);
        const uint32_t i = static_cast<uint32_t>(k % n);
        edges.emplace(u, i);
        if (k + 1 < chain) edges.emplace(static_cast<uint32_t>((k + 1) % m), i);
    }
    while (edges.size() < extra_edges + chain) {
        edges.emplace(static_cast<uint32_t>(rng.uniform_index(m)),
                      static_cast<uint32_t>(rng.uniform_index(n)));
    }
    return from_pairs(m, n, {edges.begin(), edges.end()});
}

// Zipf-popularity interactions: item draw probability proportional to
// rank^-exponent, per-user quotas sized to approach `target` total pairs.
inline gsda::InteractionDataset make_zipf(size_t m, size_t n, size_t target, double exponent,
                                          uint64_t seed) {
    gsda::Rng rng(seed);
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) {
        acc += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
        cdf[i] = acc;
    }
    for (double& c : cdf) c /= acc;

    auto draw_item = [&]() {
        const double x = rng.next_double();
        return static_cast<uint32_t>(std::lower_bound(cdf.begin(), cdf.end(), x) - cdf.begin());
    };

    std::set<std::pair<uint32_t, uint32_t>> edges;
    const size_t quota = target / m;
    std::vector<char> item_hit(n, 0);
    for (uint32_t u = 0; u < m; ++u) {
        size_t got = 0;
        size_t tries = 0;
        while (got < quota && tries < quota * 30) {
            ++tries;
            const uint32_t i = draw_item();
            if (edges.emplace(u, i).second) {
                ++got;
                item_hit[i] = 1;
            }
        }
        if (got == 0) {
            const uint32_t i = draw_item();
            edges.emplace(u, i);
            item_hit[i] = 1;
        }
    }
    // rescue never-drawn tail items so the graph has no isolated nodes
    for (uint32_t i = 0; i < n; ++i)
        if (!item_hit[i]) edges.emplace(static_cast<uint32_t>(rng.uniform_index(m)), i);
    return from_pairs(m, n, {edges.begin(), edges.end()});
}

// Zipf item popularity with latent co-preference structure: users and items
// carry hidden groups and a user's draws favor items of their own group.
// Tail items therefore share users with same-group head items, which is the
// regime where popularity-debiasing has signal to exploit.
inline gsda::InteractionDataset make_clustered_zipf(size_t m, size_t n, size_t target,
                                                    double exponent, size_t clusters,
                                                    double boost, uint64_t seed) {
    gsda::Rng rng(seed);
    std::vector<std::vector<double>> cdf(clusters, std::vector<double>(n));
    for (size_t c = 0; c < clusters; ++c) {
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double w = 1.0 / std::pow(static_cast<double>(i + 1), exponent);
            acc += w * (i % clusters == c ? boost : 1.0);
            cdf[c][i] = acc;
        }
        for (double& x : cdf[c]) x /= acc;
    }
    std::set<std::pair<uint32_t, uint32_t>> edges;
    std::vector<char> item_hit(n, 0);
    const size_t quota = target / m;
    for (uint32_t u = 0; u < m; ++u) {
        const auto& c = cdf[u % clusters];
        size_t got = 0, tries = 0;
        while (got < quota && tries < quota * 30) {
            ++tries;
            const double x = rng.next_double();
            const auto i = static_cast<uint32_t>(std::lower_bound(c.begin(), c.end(), x) - c.begin());
            if (edges.emplace(u, i).second) {
                ++got;
                item_hit[i] = 1;
            }
        }
    }
    for (uint32_t i = 0; i < n; ++i)
        if (!item_hit[i]) edges.emplace(static_cast<uint32_t>(rng.uniform_index(m)), i);
    return from_pairs(m, n, {edges.begin(), edges.end()});
}

}  // namespace testutil
