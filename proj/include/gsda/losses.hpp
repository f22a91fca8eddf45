#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "gsda/batches.hpp"
#include "gsda/dense.hpp"
#include "gsda/model.hpp"
#include "gsda/popularity.hpp"

namespace gsda {

struct LossBreakdown {
    double rec = 0.0;
    double sa = 0.0;
    double cl_p = 0.0;
    double cl_up = 0.0;
    double cl = 0.0;
    double reg = 0.0;
    double total = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 0.0;
    double contrast_w = 0.0;
    bool cl_degenerate = false;  // a contrastive branch had < 2 items
};

// Gradient of a batch loss with respect to the base embeddings. Rows absent
// from touched_rows are exactly zero.
struct GradientBuffer {
    Dense grad;
    std::vector<size_t> touched_rows;
};

// Upstream gradient collector for one batch. `final_grad` holds gradient
// w.r.t. the mean-over-layers readout (it is spread as final_grad/(L+1) into
// every layer during backprop); `layer_grad[l]` holds gradient taken directly
// at layer l. The propagation Jacobian is identical for the plain pass and
// both noise views, so all of their upstream gradients accumulate here.
struct GradSink {
    Dense final_grad;
    std::vector<Dense> layer_grad;

    GradSink(size_t nodes, size_t dim, size_t layers) : final_grad(nodes, dim) {
        layer_grad.resize(layers + 1);
        for (auto& g : layer_grad) g = Dense(nodes, dim);
    }
};

inline double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

// Pairwise ranking loss: mean over triples of -ln sigmoid(s_pos - s_neg).
inline double bpr_loss(const FinalEmbeddings& fin, const TrainBatch& batch,
                       GradSink* sink = nullptr, double scale = 1.0) {
    if (batch.triples.empty()) return 0.0;
    const size_t m = fin.z.rows;
    const size_t dim = fin.z.cols;
    const double inv_n = 1.0 / static_cast<double>(batch.triples.size());
    double loss = 0.0;
    for (const Triple& t : batch.triples) {
        const double* zu = fin.z.row(t.user);
        const double* ei = fin.e.row(t.pos_item);
        const double* ej = fin.e.row(t.neg_item);
        const double d = dot(zu, ei, dim) - dot(zu, ej, dim);
        loss += softplus(-d);
        if (sink) {
            const double coef = -scale * inv_n / (1.0 + std::exp(d));  // -sigmoid(-d) scaled
            double* gu = sink->final_grad.row(t.user);
            double* gi = sink->final_grad.row(m + t.pos_item);
            double* gj = sink->final_grad.row(m + t.neg_item);
            for (size_t k = 0; k < dim; ++k) {
                gu[k] += coef * (ei[k] - ej[k]);
                gi[k] += coef * zu[k];
                gj[k] -= coef * zu[k];
            }
        }
    }
    return loss * inv_n;
}

namespace detail {
// Mean over batch users of the mean squared distance between their
// unpopular/popular item pairs, on one embedding matrix. `grad` accumulates
// scale * d/d(matrix) when given.
inline double group_pair_alignment(const Dense& emb, const TrainBatch& batch, size_t m_users,
                                   Dense* grad, double scale) {
    if (batch.user_groups.empty()) return 0.0;
    const size_t dim = emb.cols;
    const double inv_users = 1.0 / static_cast<double>(batch.user_groups.size());
    double total = 0.0;
    for (const UserItemGroups& g : batch.user_groups) {
        if (g.popular.empty() || g.unpopular.empty()) continue;
        const double inv_pairs = 1.0 / static_cast<double>(g.popular.size() * g.unpopular.size());
        for (uint32_t up : g.unpopular) {
            const double* xi = emb.row(m_users + up);
            for (uint32_t p : g.popular) {
                const double* xj = emb.row(m_users + p);
                total += inv_users * inv_pairs * sq_dist(xi, xj, dim);
                if (grad) {
                    const double c = scale * inv_users * inv_pairs * 2.0;
                    double* gi = grad->row(m_users + up);
                    double* gj = grad->row(m_users + p);
                    for (size_t k = 0; k < dim; ++k) {
                        const double diff = xi[k] - xj[k];
                        gi[k] += c * diff;
                        gj[k] -= c * diff;
                    }
                }
            }
        }
    }
    return total;
}
}  // namespace detail

// Layer-weighted supervised alignment across the selected layers:
// (1/|layers|) * sum_l w_l * mean_u mean_pairs ||x_i^(l) - x_j^(l)||^2.
inline double alignment_loss(const EmbeddingState& st, const std::vector<double>& layer_w,
                             const std::vector<size_t>& layers, const TrainBatch& batch,
                             size_t m_users, GradSink* sink = nullptr, double scale = 1.0) {
    if (layers.empty()) throw std::invalid_argument("alignment_loss: no layers selected");
    const double inv_layers = 1.0 / static_cast<double>(layers.size());
    double loss = 0.0;
    for (size_t l : layers) {
        if (l >= st.layers.size()) throw std::out_of_range("alignment layer beyond depth");
        const double w = layer_w.at(l);
        Dense* grad = sink ? &sink->layer_grad[l] : nullptr;
        loss += inv_layers * w *
                detail::group_pair_alignment(st.layer(l), batch, m_users, grad,
                                             scale * inv_layers * w);
    }
    return loss;
}

// Fused variant: one alignment term on the mean-over-layers item embeddings.
inline double alignment_loss_fused(const FinalEmbeddings& fin, const TrainBatch& batch,
                                   GradSink* sink = nullptr, double scale = 1.0) {
    // assemble a node-indexed view of the readout so item rows line up
    Dense stacked(fin.z.rows + fin.e.rows, fin.z.cols);
    std::copy(fin.z.data.begin(), fin.z.data.end(), stacked.data.begin());
    std::copy(fin.e.data.begin(), fin.e.data.end(), stacked.data.begin() + fin.z.data.size());
    return detail::group_pair_alignment(stacked, batch, fin.z.rows,
                                        sink ? &sink->final_grad : nullptr, scale);
}

struct ContrastiveResult {
    double popular = 0.0;
    double unpopular = 0.0;
    double combined = 0.0;
    bool degenerate = false;
};

// Temperature-scaled InfoNCE between the two views' item embeddings. Every
// batch item is the anchor's candidate set; anchors are averaged within
// their popularity group and the two group losses are mixed by `weight`:
// (1 - weight) * popular + weight * unpopular.
inline ContrastiveResult contrastive_loss(const FinalEmbeddings& view1, const FinalEmbeddings& view2,
                                          const TrainBatch& batch, double temperature, double weight,
                                          GradSink* sink = nullptr, double scale = 1.0) {
    if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
    ContrastiveResult res;
    const auto& items = batch.items;
    if (items.size() < 2) {
        res.degenerate = true;
        return res;
    }
    const size_t m = view1.z.rows;
    const size_t dim = view1.e.cols;
    const size_t n = items.size();
    const size_t n_pop = batch.popular_items.size();
    const size_t n_up = batch.unpopular_items.size();

    std::vector<char> is_pop(n, 0);
    {
        size_t k = 0;
        for (size_t a = 0; a < n; ++a) {
            while (k < batch.popular_items.size() && batch.popular_items[k] < items[a]) ++k;
            is_pop[a] = k < batch.popular_items.size() && batch.popular_items[k] == items[a];
        }
    }

    std::vector<double> len1(n), len2(n);
    for (size_t a = 0; a < n; ++a) {
        len1[a] = std::max(norm2(view1.e.row(items[a]), dim), 1e-12);
        len2[a] = std::max(norm2(view2.e.row(items[a]), dim), 1e-12);
    }

    std::vector<double> cos_row(n), prob(n);
    for (size_t a = 0; a < n; ++a) {
        const double* ua = view1.e.row(items[a]);
        double max_s = -1e300;
        for (size_t b = 0; b < n; ++b) {
            cos_row[b] = dot(ua, view2.e.row(items[b]), dim) / (len1[a] * len2[b]);
            max_s = std::max(max_s, cos_row[b] / temperature);
        }
        double lse = 0.0;
        for (size_t b = 0; b < n; ++b) lse += std::exp(cos_row[b] / temperature - max_s);
        const double log_denom = max_s + std::log(lse);
        const double loss_a = log_denom - cos_row[a] / temperature;
        (is_pop[a] ? res.popular : res.unpopular) += loss_a;

        if (sink) {
            const size_t n_branch = is_pop[a] ? n_pop : n_up;
            const double branch_w = is_pop[a] ? (1.0 - weight) : weight;
            const double ca = scale * branch_w / static_cast<double>(n_branch);
            for (size_t b = 0; b < n; ++b)
                prob[b] = std::exp(cos_row[b] / temperature - log_denom);
            double* gu = sink->final_grad.row(m + items[a]);
            for (size_t b = 0; b < n; ++b) {
                const double g = ca * (prob[b] - (b == a ? 1.0 : 0.0)) / temperature;
                if (g == 0.0) continue;
                const double* wb = view2.e.row(items[b]);
                double* gw = sink->final_grad.row(m + items[b]);
                const double inv_uw = 1.0 / (len1[a] * len2[b]);
                const double cu = cos_row[b] / (len1[a] * len1[a]);
                const double cw = cos_row[b] / (len2[b] * len2[b]);
                for (size_t k = 0; k < dim; ++k) {
                    gu[k] += g * (wb[k] * inv_uw - cu * ua[k]);
                    gw[k] += g * (ua[k] * inv_uw - cw * wb[k]);
                }
            }
        }
    }
    if (n_pop > 0) res.popular /= static_cast<double>(n_pop);
    if (n_up > 0) res.unpopular /= static_cast<double>(n_up);
    if (n_pop == 0 || n_up == 0) res.degenerate = true;
    res.combined = (1.0 - weight) * res.popular + weight * res.unpopular;
    return res;
}

// Half squared norm of the batch-touched base embedding rows. The gradient
// bypasses propagation, so it accumulates straight into `direct_grad`.
inline double l2_reg(const Dense& x0, const TrainBatch& batch, size_t m_users,
                     Dense* direct_grad = nullptr, double scale = 1.0) {
    std::vector<size_t> rows;
    rows.reserve(batch.triples.size() * 3);
    for (const Triple& t : batch.triples) {
        rows.push_back(t.user);
        rows.push_back(m_users + t.pos_item);
        rows.push_back(m_users + t.neg_item);
    }
    std::sort(rows.begin(), rows.end());
    rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    double loss = 0.0;
    for (size_t r : rows) {
        const double* x = x0.row(r);
        loss += 0.5 * dot(x, x, x0.cols);
        if (direct_grad) axpy(scale, x, direct_grad->row(r), x0.cols);
    }
    return loss;
}

// grad_x0 = sum_l a_hat^l * upstream[l], evaluated right-to-left. The
// adjacency is symmetric, so its transpose is itself.
inline Dense backprop_through_propagation(const AdjacencySet& adj,
                                          const std::vector<Dense>& upstream) {
    if (upstream.empty()) throw std::invalid_argument("no upstream gradients");
    Dense acc = upstream.back();
    for (size_t l = upstream.size() - 1; l-- > 0;) {
        acc = spmm(adj.a_hat, acc);
        const Dense& g = upstream[l];
        for (size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += g.data[k];
    }
    return acc;
}

namespace detail {
// Variant that folds final_grad/(L+1) into every layer without materializing
// the per-layer copies.
inline Dense backprop_sink(const AdjacencySet& adj, const GradSink& sink) {
    const size_t layers = sink.layer_grad.size();
    const double inv = 1.0 / static_cast<double>(layers);
    Dense acc = sink.layer_grad.back();
    axpy(inv, sink.final_grad, acc);
    for (size_t l = layers - 1; l-- > 0;) {
        acc = spmm(adj.a_hat, acc);
        const Dense& g = sink.layer_grad[l];
        for (size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += g.data[k] + inv * sink.final_grad.data[k];
    }
    return acc;
}
}  // namespace detail

// Configuration for one batch-level loss evaluation.
struct LossConfig {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 1e-4;
    double temperature = 0.2;
    double epsilon_noise = 0.1;
    bool no_sa = false;
    bool no_cl = false;
    bool sa0 = false;   // align the base layer only
    bool saf = false;   // align the fused readout instead of per-layer
    std::optional<double> fixed_w;       // overrides the adaptive mixing weight
    std::optional<std::vector<size_t>> sa_layers;  // restrict alignment to these layers
    uint64_t view_seed = 0;

    bool sa_active() const { return lambda1 != 0.0 && !no_sa; }
    bool cl_active() const { return lambda2 != 0.0 && !no_cl; }
};

// Full batch objective: forward propagation, the active loss terms per the
// configuration, and (optionally) the exact gradient w.r.t. the base
// embeddings. The same entry point serves training and the finite-difference
// checks, so value and gradient can never drift apart.
inline LossBreakdown compute_batch_loss(const Dense& x0, const AdjacencySet& adj, size_t layers,
                                        const LayerWeights& lw, const PopularityStats& stats,
                                        const TrainBatch& batch, const LossConfig& cfg,
                                        GradientBuffer* out_grad = nullptr) {
    const size_t m = adj.m_users;
    const EmbeddingState st = propagate(x0, adj, layers);
    const FinalEmbeddings fin = finalize(st, m);

    std::optional<GradSink> sink;
    if (out_grad) sink.emplace(x0.rows, x0.cols, layers);
    GradSink* sp = sink ? &*sink : nullptr;

    LossBreakdown bd;
    bd.lambda1 = cfg.lambda1;
    bd.lambda2 = cfg.lambda2;
    bd.lambda3 = cfg.lambda3;
    bd.contrast_w = cfg.fixed_w ? *cfg.fixed_w : contrast_weight(stats);

    bd.rec = bpr_loss(fin, batch, sp, 1.0);

    if (cfg.sa_active()) {
        if (cfg.saf) {
            bd.sa = alignment_loss_fused(fin, batch, sp, cfg.lambda1);
        } else if (cfg.sa0) {
            static const std::vector<size_t> base_only{0};
            std::vector<double> unit(layers + 1, 0.0);
            unit[0] = 1.0;
            bd.sa = alignment_loss(st, unit, base_only, batch, m, sp, cfg.lambda1);
        } else if (cfg.sa_layers) {
            bd.sa = alignment_loss(st, lw.weights, *cfg.sa_layers, batch, m, sp, cfg.lambda1);
        } else {
            std::vector<size_t> all(layers + 1);
            for (size_t l = 0; l <= layers; ++l) all[l] = l;
            bd.sa = alignment_loss(st, lw.weights, all, batch, m, sp, cfg.lambda1);
        }
    }

    if (cfg.cl_active()) {
        const auto [v1, v2] = perturbed_views(st, adj, cfg.epsilon_noise, cfg.view_seed);
        const FinalEmbeddings f1 = finalize(v1, m);
        const FinalEmbeddings f2 = finalize(v2, m);
        const ContrastiveResult cr =
            contrastive_loss(f1, f2, batch, cfg.temperature, bd.contrast_w, sp, cfg.lambda2);
        bd.cl_p = cr.popular;
        bd.cl_up = cr.unpopular;
        bd.cl = cr.combined;
        bd.cl_degenerate = cr.degenerate;
    }

    Dense* direct = nullptr;
    Dense grad;
    if (out_grad) {
        grad = detail::backprop_sink(adj, *sink);
        direct = &grad;
    }
    bd.reg = l2_reg(x0, batch, m, direct, cfg.lambda3);

    bd.total = bd.rec + cfg.lambda1 * bd.sa + cfg.lambda2 * bd.cl + cfg.lambda3 * bd.reg;

    if (out_grad) {
        out_grad->grad = std::move(grad);
        out_grad->touched_rows.clear();
        for (size_t r = 0; r < out_grad->grad.rows; ++r) {
            const double* row = out_grad->grad.row(r);
            for (size_t k = 0; k < out_grad->grad.cols; ++k) {
                if (row[k] != 0.0) {
                    out_grad->touched_rows.push_back(r);
                    break;
                }
            }
        }
    }
    return bd;
}

}  // namespace gsda
