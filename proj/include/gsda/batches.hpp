#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gsda/rng.hpp"
#include "gsda/split.hpp"

namespace gsda {

struct Triple {
    uint32_t user;
    uint32_t pos_item;
    uint32_t neg_item;

    bool operator==(const Triple&) const = default;
};

struct UserItemGroups {
    uint32_t user;
    std::vector<uint32_t> popular;    // this user's batch positives labelled popular
    std::vector<uint32_t> unpopular;  // and unpopular
};

// One training mini-batch: BPR triples plus the in-batch popularity grouping
// used by the alignment and contrastive terms.
struct TrainBatch {
    std::vector<Triple> triples;
    std::vector<uint32_t> items;            // distinct positive items, ascending
    std::vector<uint32_t> popular_items;    // ascending
    std::vector<uint32_t> unpopular_items;  // ascending
    std::vector<UserItemGroups> user_groups;
    std::vector<std::pair<uint32_t, uint32_t>> batch_popularity;  // (item, in-batch count)
};

// Per-epoch triple stream. Positives are the train interactions in a seeded
// shuffle; negatives are drawn by rejection against the user's train set,
// falling back to an exact draw from the complement after 100 misses. Items
// are ranked inside each batch by global train popularity (ties by id) and
// the top `group_ratio` fraction is labelled popular.
class BatchStream {
public:
    BatchStream(const SplitDataset& split, size_t batch_size, uint64_t seed, double group_ratio)
        : batch_size_(batch_size), seed_(seed), group_ratio_(group_ratio),
          n_items_(split.n_items), train_(split.train) {
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (!(group_ratio > 0.0 && group_ratio < 1.0))
            throw std::invalid_argument("group_ratio must be in (0, 1)");
        user_items_.resize(split.m_users);
        for (const auto& [u, i] : train_) user_items_[u].push_back(i);
        for (auto& v : user_items_) std::sort(v.begin(), v.end());
        global_pop_.assign(split.n_items, 0);
        for (const auto& [u, i] : train_) ++global_pop_[i];
    }

    const std::vector<size_t>& global_popularity() const { return global_pop_; }

    void begin_epoch(size_t epoch) {
        rng_ = Rng(derive_seed(seed_, epoch + 1));
        order_.resize(train_.size());
        for (size_t k = 0; k < order_.size(); ++k) order_[k] = k;
        rng_.shuffle(order_);
        cursor_ = 0;
    }

    std::optional<TrainBatch> next() {
        if (cursor_ >= order_.size()) return std::nullopt;
        const size_t end = std::min(order_.size(), cursor_ + batch_size_);
        TrainBatch batch;
        batch.triples.reserve(end - cursor_);
        for (size_t k = cursor_; k < end; ++k) {
            const auto& [u, i] = train_[order_[k]];
            batch.triples.push_back({u, i, sample_negative(u)});
        }
        cursor_ = end;
        label_groups(batch);
        return batch;
    }

private:
    uint32_t sample_negative(uint32_t user) {
        const auto& owned = user_items_[user];
        if (owned.size() >= n_items_) throw std::runtime_error("cannot sample negative");
        for (int attempt = 0; attempt < 100; ++attempt) {
            const auto j = static_cast<uint32_t>(rng_.uniform_index(n_items_));
            if (!std::binary_search(owned.begin(), owned.end(), j)) return j;
        }
        // exact draw from the complement
        const size_t pick = rng_.uniform_index(n_items_ - owned.size());
        size_t skipped = 0;
        for (uint32_t j = 0; j < n_items_; ++j) {
            if (std::binary_search(owned.begin(), owned.end(), j)) continue;
            if (skipped++ == pick) return j;
        }
        throw std::runtime_error("cannot sample negative");
    }

    void label_groups(TrainBatch& batch) const {
        std::vector<std::pair<uint32_t, uint32_t>> counts;  // (item, in-batch count)
        {
            std::vector<uint32_t> items;
            items.reserve(batch.triples.size());
            for (const auto& t : batch.triples) items.push_back(t.pos_item);
            std::sort(items.begin(), items.end());
            for (size_t k = 0; k < items.size();) {
                size_t j = k;
                while (j < items.size() && items[j] == items[k]) ++j;
                counts.emplace_back(items[k], static_cast<uint32_t>(j - k));
                k = j;
            }
        }
        batch.batch_popularity = counts;
        batch.items.reserve(counts.size());
        for (const auto& [item, c] : counts) batch.items.push_back(item);

        std::vector<uint32_t> ranked = batch.items;
        std::sort(ranked.begin(), ranked.end(), [&](uint32_t a, uint32_t b) {
            return global_pop_[a] != global_pop_[b] ? global_pop_[a] > global_pop_[b] : a < b;
        });
        const size_t n_pop = static_cast<size_t>(std::floor(group_ratio_ * double(ranked.size()) + 1e-12));
        std::vector<char> is_pop(n_items_, 0);
        batch.popular_items.assign(ranked.begin(), ranked.begin() + n_pop);
        batch.unpopular_items.assign(ranked.begin() + n_pop, ranked.end());
        std::sort(batch.popular_items.begin(), batch.popular_items.end());
        std::sort(batch.unpopular_items.begin(), batch.unpopular_items.end());
        for (uint32_t i : batch.popular_items) is_pop[i] = 1;

        std::vector<std::pair<uint32_t, uint32_t>> user_pos;  // (user, item), distinct
        user_pos.reserve(batch.triples.size());
        for (const auto& t : batch.triples) user_pos.emplace_back(t.user, t.pos_item);
        std::sort(user_pos.begin(), user_pos.end());
        user_pos.erase(std::unique(user_pos.begin(), user_pos.end()), user_pos.end());
        for (size_t k = 0; k < user_pos.size();) {
            UserItemGroups g;
            g.user = user_pos[k].first;
            while (k < user_pos.size() && user_pos[k].first == g.user) {
                (is_pop[user_pos[k].second] ? g.popular : g.unpopular).push_back(user_pos[k].second);
                ++k;
            }
            batch.user_groups.push_back(std::move(g));
        }
    }

    size_t batch_size_;
    uint64_t seed_;
    double group_ratio_;
    size_t n_items_;
    std::vector<Interaction> train_;
    std::vector<std::vector<uint32_t>> user_items_;
    std::vector<size_t> global_pop_;
    Rng rng_{0};
    std::vector<size_t> order_;
    size_t cursor_ = 0;
};

}  // namespace gsda
