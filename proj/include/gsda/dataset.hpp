#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace gsda {

enum class InputFormat { tsv, csv };

// Deduplicated (user, item) interactions with contiguous ids. `user_tokens`
// and `item_tokens` map a contiguous id back to the raw input token.
struct InteractionDataset {
    size_t m_users = 0;
    size_t n_items = 0;
    std::vector<std::pair<uint32_t, uint32_t>> interactions;
    std::vector<size_t> user_degree;
    std::vector<size_t> item_degree;
    std::vector<std::string> user_tokens;
    std::vector<std::string> item_tokens;
    size_t duplicates_dropped = 0;

    double density() const {
        return m_users && n_items
                   ? static_cast<double>(interactions.size()) / (static_cast<double>(m_users) * n_items)
                   : 0.0;
    }

    void recount_degrees() {
        user_degree.assign(m_users, 0);
        item_degree.assign(n_items, 0);
        for (const auto& [u, i] : interactions) {
            ++user_degree[u];
            ++item_degree[i];
        }
    }
};

// One interaction per line: "user<sep>item[<sep>extra...]", extras ignored.
// Tokens get contiguous ids in first-seen order; duplicate pairs are dropped
// and counted.
inline InteractionDataset parse_interactions(const std::string& path, InputFormat format) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input file: " + path);
    const char sep = format == InputFormat::tsv ? '\t' : ',';

    InteractionDataset ds;
    std::unordered_map<std::string, uint32_t> user_ids;
    std::unordered_map<std::string, uint32_t> item_ids;
    std::unordered_set<uint64_t> pair_seen;

    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const size_t p1 = line.find(sep);
        if (p1 == std::string::npos || p1 == 0)
            throw std::runtime_error("malformed line " + std::to_string(line_no));
        size_t p2 = line.find(sep, p1 + 1);
        if (p2 == std::string::npos) p2 = line.size();
        if (p2 == p1 + 1) throw std::runtime_error("malformed line " + std::to_string(line_no));
        const std::string user_tok = line.substr(0, p1);
        const std::string item_tok = line.substr(p1 + 1, p2 - p1 - 1);

        auto [uit, u_new] = user_ids.try_emplace(user_tok, static_cast<uint32_t>(ds.user_tokens.size()));
        if (u_new) ds.user_tokens.push_back(user_tok);
        auto [iit, i_new] = item_ids.try_emplace(item_tok, static_cast<uint32_t>(ds.item_tokens.size()));
        if (i_new) ds.item_tokens.push_back(item_tok);

        const uint64_t key = (static_cast<uint64_t>(uit->second) << 32) | iit->second;
        if (pair_seen.insert(key).second) {
            ds.interactions.emplace_back(uit->second, iit->second);
        } else {
            ++ds.duplicates_dropped;
        }
    }
    if (ds.interactions.empty()) throw std::runtime_error("empty file: no interactions in " + path);
    ds.m_users = ds.user_tokens.size();
    ds.n_items = ds.item_tokens.size();
    ds.recount_degrees();
    return ds;
}

// Iteratively removes users and items with degree < k until a fixpoint,
// then remaps the survivors to contiguous ids (ascending old-id order, so
// a dataset that already satisfies the bound is unchanged).
inline InteractionDataset k_core_filter(const InteractionDataset& ds, size_t k) {
    if (k < 1) throw std::invalid_argument("k-core requires k >= 1");
    std::vector<size_t> udeg = ds.user_degree;
    std::vector<size_t> ideg = ds.item_degree;
    std::vector<char> u_alive(ds.m_users, 1);
    std::vector<char> i_alive(ds.n_items, 1);

    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t u = 0; u < ds.m_users; ++u) {
            if (u_alive[u] && udeg[u] < k) {
                u_alive[u] = 0;
                changed = true;
            }
        }
        for (size_t i = 0; i < ds.n_items; ++i) {
            if (i_alive[i] && ideg[i] < k) {
                i_alive[i] = 0;
                changed = true;
            }
        }
        if (!changed) break;
        std::fill(udeg.begin(), udeg.end(), 0);
        std::fill(ideg.begin(), ideg.end(), 0);
        for (const auto& [u, i] : ds.interactions) {
            if (u_alive[u] && i_alive[i]) {
                ++udeg[u];
                ++ideg[i];
            }
        }
    }

    std::vector<uint32_t> u_map(ds.m_users, UINT32_MAX);
    std::vector<uint32_t> i_map(ds.n_items, UINT32_MAX);
    InteractionDataset out;
    for (size_t u = 0; u < ds.m_users; ++u) {
        if (u_alive[u] && udeg[u] > 0) {
            u_map[u] = static_cast<uint32_t>(out.user_tokens.size());
            out.user_tokens.push_back(ds.user_tokens[u]);
        }
    }
    for (size_t i = 0; i < ds.n_items; ++i) {
        if (i_alive[i] && ideg[i] > 0) {
            i_map[i] = static_cast<uint32_t>(out.item_tokens.size());
            out.item_tokens.push_back(ds.item_tokens[i]);
        }
    }
    for (const auto& [u, i] : ds.interactions) {
        if (u_alive[u] && i_alive[i]) out.interactions.emplace_back(u_map[u], i_map[i]);
    }
    if (out.interactions.empty()) throw std::runtime_error("k-core eliminated all data");
    out.m_users = out.user_tokens.size();
    out.n_items = out.item_tokens.size();
    out.duplicates_dropped = ds.duplicates_dropped;
    out.recount_degrees();
    return out;
}

}  // namespace gsda
