#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "gsda/dataset.hpp"
#include "gsda/rng.hpp"

namespace gsda {

using Interaction = std::pair<uint32_t, uint32_t>;

struct SplitConfig {
    size_t test_per_item = 0;
    double val_fraction = 0.1;
    uint64_t seed = 0;
    size_t k_core = 0;  // recorded for the sidecar; filtering happens upstream
};

// Disjoint train/validation/test interaction lists whose union is the
// filtered dataset. The test set holds a uniform per-item quota so ranking
// metrics are not dominated by head items.
struct SplitDataset {
    size_t m_users = 0;
    size_t n_items = 0;
    std::vector<Interaction> train;
    std::vector<Interaction> validation;
    std::vector<Interaction> test;
    SplitConfig config;
    size_t capped_items = 0;  // items with fewer than test_per_item spare interactions
    std::vector<std::string> user_tokens;
    std::vector<std::string> item_tokens;

    size_t total() const { return train.size() + validation.size() + test.size(); }

    std::vector<size_t> train_item_degree() const {
        std::vector<size_t> deg(n_items, 0);
        for (const auto& [u, i] : train) ++deg[i];
        return deg;
    }
    std::vector<size_t> train_user_degree() const {
        std::vector<size_t> deg(m_users, 0);
        for (const auto& [u, i] : train) ++deg[u];
        return deg;
    }
};

// Per item, min(test_per_item, degree-1) interactions are sampled into the
// test set, always leaving at least one interaction outside it. Validation
// then takes round(val_fraction * total) of the remainder. Everything is
// driven by one seeded stream, so a given (dataset, config) pair always
// produces the same split.
inline SplitDataset unbiased_split(const InteractionDataset& ds, size_t test_per_item,
                                   double val_fraction, uint64_t seed) {
    if (test_per_item < 1) throw std::invalid_argument("test_per_item must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("val_fraction must be in (0, 1)");
    if (ds.interactions.empty()) throw std::runtime_error("no interactions");

    SplitDataset sp;
    sp.m_users = ds.m_users;
    sp.n_items = ds.n_items;
    sp.user_tokens = ds.user_tokens;
    sp.item_tokens = ds.item_tokens;
    sp.config = {test_per_item, val_fraction, seed, 0};

    std::vector<std::vector<size_t>> by_item(ds.n_items);
    for (size_t idx = 0; idx < ds.interactions.size(); ++idx)
        by_item[ds.interactions[idx].second].push_back(idx);

    Rng rng(derive_seed(seed, 1));
    std::vector<char> in_test(ds.interactions.size(), 0);
    for (size_t i = 0; i < ds.n_items; ++i) {
        auto& pool = by_item[i];
        const size_t avail = pool.size() > 0 ? pool.size() - 1 : 0;
        const size_t take = std::min(test_per_item, avail);
        if (take < test_per_item) ++sp.capped_items;
        // partial Fisher-Yates: the first `take` slots become the test draws
        for (size_t t = 0; t < take; ++t) {
            const size_t j = t + rng.uniform_index(pool.size() - t);
            std::swap(pool[t], pool[j]);
            in_test[pool[t]] = 1;
        }
    }

    std::vector<size_t> rest;
    rest.reserve(ds.interactions.size());
    std::vector<size_t> user_rem(ds.m_users, 0);
    std::vector<size_t> item_rem(ds.n_items, 0);
    for (size_t idx = 0; idx < ds.interactions.size(); ++idx) {
        if (!in_test[idx]) {
            rest.push_back(idx);
            ++user_rem[ds.interactions[idx].first];
            ++item_rem[ds.interactions[idx].second];
        }
    }

    const size_t val_target =
        static_cast<size_t>(std::llround(val_fraction * static_cast<double>(ds.interactions.size())));
    if (val_target >= rest.size())
        throw std::runtime_error("split parameters leave no training data");
    rng.shuffle(rest);
    // Walk the shuffled remainder, skipping any draw that would strip a user
    // or item of its last training interaction.
    std::vector<char> in_val(ds.interactions.size(), 0);
    size_t taken = 0;
    for (size_t idx : rest) {
        if (taken == val_target) break;
        const auto& [u, i] = ds.interactions[idx];
        if (user_rem[u] <= 1 || item_rem[i] <= 1) continue;
        in_val[idx] = 1;
        --user_rem[u];
        --item_rem[i];
        ++taken;
    }

    for (size_t idx = 0; idx < ds.interactions.size(); ++idx)
        if (in_test[idx]) sp.test.push_back(ds.interactions[idx]);
    for (size_t idx = 0; idx < ds.interactions.size(); ++idx) {
        if (in_test[idx]) continue;
        (in_val[idx] ? sp.validation : sp.train).push_back(ds.interactions[idx]);
    }
    if (sp.train.empty()) throw std::runtime_error("split parameters leave no training data");
    return sp;
}

// Solves the per-item test quota that lands the test set near the given
// fraction of all interactions.
inline size_t test_per_item_for_fraction(const InteractionDataset& ds, double fraction) {
    const double t = fraction * static_cast<double>(ds.interactions.size()) /
                     static_cast<double>(ds.n_items);
    return static_cast<size_t>(std::max<long long>(1, std::llround(t)));
}

namespace detail {
inline void write_pairs(const std::filesystem::path& path, const std::vector<Interaction>& pairs) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& [u, i] : pairs) out << u << '\t' << i << '\n';
}

inline std::vector<Interaction> read_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<Interaction> pairs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error("malformed split line in " + path.string());
        pairs.emplace_back(static_cast<uint32_t>(std::stoul(line.substr(0, tab))),
                           static_cast<uint32_t>(std::stoul(line.substr(tab + 1))));
    }
    return pairs;
}
}  // namespace detail

inline void write_split(const SplitDataset& sp, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    detail::write_pairs(dir / "train.tsv", sp.train);
    detail::write_pairs(dir / "val.tsv", sp.validation);
    detail::write_pairs(dir / "test.tsv", sp.test);

    nlohmann::json meta;
    meta["m_users"] = sp.m_users;
    meta["n_items"] = sp.n_items;
    meta["seed"] = sp.config.seed;
    meta["k_core"] = sp.config.k_core;
    meta["test_per_item"] = sp.config.test_per_item;
    meta["val_fraction"] = sp.config.val_fraction;
    meta["capped_items"] = sp.capped_items;
    meta["id_maps"]["users"] = sp.user_tokens;
    meta["id_maps"]["items"] = sp.item_tokens;
    std::ofstream out(dir / "split_meta.json");
    out << meta.dump(2) << '\n';
}

inline SplitDataset load_split(const std::filesystem::path& dir) {
    std::ifstream in(dir / "split_meta.json");
    if (!in) throw std::runtime_error("cannot read split metadata in " + dir.string());
    nlohmann::json meta = nlohmann::json::parse(in);

    SplitDataset sp;
    sp.m_users = meta.at("m_users").get<size_t>();
    sp.n_items = meta.at("n_items").get<size_t>();
    sp.config.seed = meta.at("seed").get<uint64_t>();
    sp.config.k_core = meta.at("k_core").get<size_t>();
    sp.config.test_per_item = meta.at("test_per_item").get<size_t>();
    sp.config.val_fraction = meta.at("val_fraction").get<double>();
    sp.capped_items = meta.at("capped_items").get<size_t>();
    sp.user_tokens = meta.at("id_maps").at("users").get<std::vector<std::string>>();
    sp.item_tokens = meta.at("id_maps").at("items").get<std::vector<std::string>>();
    sp.train = detail::read_pairs(dir / "train.tsv");
    sp.validation = detail::read_pairs(dir / "val.tsv");
    sp.test = detail::read_pairs(dir / "test.tsv");
    return sp;
}

// Train-split view as a dataset, for adjacency construction.
inline InteractionDataset train_dataset(const SplitDataset& sp) {
    InteractionDataset ds;
    ds.m_users = sp.m_users;
    ds.n_items = sp.n_items;
    ds.interactions = sp.train;
    ds.user_tokens = sp.user_tokens;
    ds.item_tokens = sp.item_tokens;
    ds.recount_degrees();
    return ds;
}

}  // namespace gsda
