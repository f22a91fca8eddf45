#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "gsda/model.hpp"
#include "gsda/split.hpp"
#include "gsda/threads.hpp"

namespace gsda {

struct MetricsAtK {
    double recall = 0.0;
    double hr = 0.0;
    double ndcg = 0.0;
};

// Ranking universe for a set of users: which items to mask (training
// interactions) and which are relevant.
struct EvalData {
    size_t m_users = 0;
    size_t n_items = 0;
    std::vector<std::vector<uint32_t>> train_by_user;     // sorted
    std::vector<std::vector<uint32_t>> relevant_by_user;  // sorted
};

namespace detail {
inline std::vector<std::vector<uint32_t>> bucket_by_user(const std::vector<Interaction>& pairs,
                                                         size_t m_users) {
    std::vector<std::vector<uint32_t>> by_user(m_users);
    for (const auto& [u, i] : pairs) by_user[u].push_back(i);
    for (auto& v : by_user) std::sort(v.begin(), v.end());
    return by_user;
}
}  // namespace detail

inline EvalData eval_on_test(const SplitDataset& sp) {
    return {sp.m_users, sp.n_items, detail::bucket_by_user(sp.train, sp.m_users),
            detail::bucket_by_user(sp.test, sp.m_users)};
}

inline EvalData eval_on_validation(const SplitDataset& sp) {
    return {sp.m_users, sp.n_items, detail::bucket_by_user(sp.train, sp.m_users),
            detail::bucket_by_user(sp.validation, sp.m_users)};
}

// Full ranking of all items for one user: scores sorted descending with ties
// broken by ascending item id; the user's training items are pushed to the
// bottom when masked.
inline std::vector<uint32_t> rank_all(const FinalEmbeddings& fin, size_t user,
                                      const std::vector<uint32_t>& masked_items) {
    const size_t n = fin.e.rows;
    std::vector<double> scores(n);
    const double* zu = fin.z.row(user);
    for (size_t i = 0; i < n; ++i) scores[i] = dot(zu, fin.e.row(i), fin.z.cols);
    for (uint32_t i : masked_items) scores[i] = -std::numeric_limits<double>::infinity();

    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        return scores[a] != scores[b] ? scores[a] > scores[b] : a < b;
    });
    return order;
}

// recall = hits/|relevant|, hr = any hit, ndcg with binary gains.
inline MetricsAtK metrics_at_k(const std::vector<uint32_t>& ranked,
                               const std::vector<uint32_t>& relevant_sorted, size_t k) {
    if (k < 1) throw std::invalid_argument("K must be >= 1");
    if (relevant_sorted.empty()) throw std::invalid_argument("metrics need a relevant item");
    MetricsAtK m;
    const size_t top = std::min(k, ranked.size());
    size_t hits = 0;
    double dcg = 0.0;
    for (size_t r = 0; r < top; ++r) {
        if (std::binary_search(relevant_sorted.begin(), relevant_sorted.end(), ranked[r])) {
            ++hits;
            dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
        }
    }
    double idcg = 0.0;
    const size_t ideal = std::min(relevant_sorted.size(), top);
    for (size_t r = 0; r < ideal; ++r) idcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    m.recall = static_cast<double>(hits) / static_cast<double>(relevant_sorted.size());
    m.hr = hits > 0 ? 1.0 : 0.0;
    m.ndcg = idcg > 0.0 ? dcg / idcg : 0.0;
    return m;
}

// Items bucketed into ascending-popularity groups of near-equal size
// (G1 = least popular). Ties broken by item id.
inline std::vector<std::vector<uint32_t>> popularity_groups(const std::vector<size_t>& item_degree,
                                                            size_t n_groups) {
    std::vector<uint32_t> order(item_degree.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        return item_degree[a] != item_degree[b] ? item_degree[a] < item_degree[b] : a < b;
    });
    std::vector<std::vector<uint32_t>> groups(n_groups);
    const size_t n = order.size();
    size_t start = 0;
    for (size_t g = 0; g < n_groups; ++g) {
        const size_t size = n / n_groups + (g < n % n_groups ? 1 : 0);
        groups[g].assign(order.begin() + start, order.begin() + start + size);
        std::sort(groups[g].begin(), groups[g].end());
        start += size;
    }
    return groups;
}

struct EvalReport {
    std::vector<size_t> ks;
    std::map<size_t, MetricsAtK> overall;
    std::vector<std::map<size_t, MetricsAtK>> groups;  // G1..Gn, ascending popularity
    std::vector<size_t> group_users;                   // contributing users per group
    size_t n_users_evaluated = 0;
    bool masked_train_items = true;
};

// Full-ranking evaluation, overall and per popularity group. Group metrics
// restrict relevance to that group's test items over the users that have any.
// Users are ranked in parallel; the reduction runs in user-id order, so the
// report is identical at any worker count.
inline EvalReport evaluate(const FinalEmbeddings& fin, const EvalData& data,
                           const std::vector<size_t>& ks = {20},
                           const std::vector<std::vector<uint32_t>>& groups = {}) {
    EvalReport rep;
    rep.ks = ks;
    rep.groups.resize(groups.size());
    rep.group_users.assign(groups.size(), 0);
    for (size_t k : ks) rep.overall[k] = {};
    for (auto& g : rep.groups)
        for (size_t k : ks) g[k] = {};

    std::vector<uint32_t> users;
    for (uint32_t u = 0; u < data.m_users; ++u)
        if (!data.relevant_by_user[u].empty()) users.push_back(u);

    // per-user slots: [user][k-index] overall, then per group
    const size_t nk = ks.size();
    std::vector<MetricsAtK> per_user(users.size() * nk * (1 + groups.size()));
    std::vector<char> in_group(users.size() * std::max<size_t>(1, groups.size()), 0);

    parallel_for(users.size(), [&](size_t lo, size_t hi) {
        std::vector<uint32_t> restricted;
        for (size_t idx = lo; idx < hi; ++idx) {
            const uint32_t u = users[idx];
            const auto& relevant = data.relevant_by_user[u];
            const auto ranked = rank_all(fin, u, data.train_by_user[u]);
            MetricsAtK* slot = per_user.data() + idx * nk * (1 + groups.size());
            for (size_t ki = 0; ki < nk; ++ki) slot[ki] = metrics_at_k(ranked, relevant, ks[ki]);
            for (size_t g = 0; g < groups.size(); ++g) {
                restricted.clear();
                std::set_intersection(relevant.begin(), relevant.end(), groups[g].begin(),
                                      groups[g].end(), std::back_inserter(restricted));
                if (restricted.empty()) continue;
                in_group[idx * groups.size() + g] = 1;
                for (size_t ki = 0; ki < nk; ++ki)
                    slot[(1 + g) * nk + ki] = metrics_at_k(ranked, restricted, ks[ki]);
            }
        }
    });

    rep.n_users_evaluated = users.size();
    for (size_t idx = 0; idx < users.size(); ++idx) {
        const MetricsAtK* slot = per_user.data() + idx * nk * (1 + groups.size());
        for (size_t ki = 0; ki < nk; ++ki) {
            rep.overall[ks[ki]].recall += slot[ki].recall;
            rep.overall[ks[ki]].hr += slot[ki].hr;
            rep.overall[ks[ki]].ndcg += slot[ki].ndcg;
        }
        for (size_t g = 0; g < groups.size(); ++g) {
            if (!in_group[idx * groups.size() + g]) continue;
            ++rep.group_users[g];
            for (size_t ki = 0; ki < nk; ++ki) {
                rep.groups[g][ks[ki]].recall += slot[(1 + g) * nk + ki].recall;
                rep.groups[g][ks[ki]].hr += slot[(1 + g) * nk + ki].hr;
                rep.groups[g][ks[ki]].ndcg += slot[(1 + g) * nk + ki].ndcg;
            }
        }
    }
    for (size_t k : ks) {
        if (rep.n_users_evaluated == 0) break;
        rep.overall[k].recall /= static_cast<double>(rep.n_users_evaluated);
        rep.overall[k].hr /= static_cast<double>(rep.n_users_evaluated);
        rep.overall[k].ndcg /= static_cast<double>(rep.n_users_evaluated);
    }
    for (size_t g = 0; g < groups.size(); ++g) {
        if (rep.group_users[g] == 0) continue;
        for (size_t k : ks) {
            rep.groups[g][k].recall /= static_cast<double>(rep.group_users[g]);
            rep.groups[g][k].hr /= static_cast<double>(rep.group_users[g]);
            rep.groups[g][k].ndcg /= static_cast<double>(rep.group_users[g]);
        }
    }
    return rep;
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["n_users_evaluated"] = rep.n_users_evaluated;
    j["masked_train_items"] = rep.masked_train_items;
    j["ks"] = rep.ks;
    for (const auto& [k, m] : rep.overall) {
        auto& slot = j["overall"][std::to_string(k)];
        slot["recall"] = m.recall;
        slot["hr"] = m.hr;
        slot["ndcg"] = m.ndcg;
    }
    for (size_t g = 0; g < rep.groups.size(); ++g) {
        auto& gj = j["groups"]["G" + std::to_string(g + 1)];
        gj["n_users"] = rep.group_users[g];
        for (const auto& [k, m] : rep.groups[g]) {
            auto& slot = gj[std::to_string(k)];
            slot["recall"] = m.recall;
            slot["hr"] = m.hr;
            slot["ndcg"] = m.ndcg;
        }
    }
    return j;
}

inline void write_report_csv(const EvalReport& rep, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.precision(10);
    out << "group,K,recall,hr,ndcg\n";
    for (size_t g = 0; g < rep.groups.size(); ++g)
        for (const size_t k : rep.ks) {
            const MetricsAtK& m = rep.groups[g].at(k);
            out << 'G' << (g + 1) << ',' << k << ',' << m.recall << ',' << m.hr << ',' << m.ndcg
                << '\n';
        }
}

}  // namespace gsda
