#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsda/batches.hpp"
#include "gsda/evaluator.hpp"
#include "gsda/graph.hpp"
#include "gsda/losses.hpp"
#include "gsda/model.hpp"
#include "gsda/popularity.hpp"
#include "gsda/split.hpp"

namespace gsda {

struct TrainConfig {
    size_t dim = 64;
    size_t layers = 3;
    double lr = 0.001;
    size_t batch_size = 2048;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double lambda3 = 1e-4;
    double epsilon_noise = 0.1;
    double temperature = 0.2;
    double group_ratio = 0.5;
    size_t patience = 10;
    size_t max_epochs = 100;
    uint64_t seed = 42;
    size_t eval_k = 20;
    // ablation switches
    bool no_sa = false;
    bool no_cl = false;
    bool sa0 = false;
    bool saf = false;
    std::optional<double> fixed_w;

    void validate() const {
        if (dim < 1) throw std::invalid_argument("dim must be >= 1");
        if (layers < 1) throw std::invalid_argument("layers must be >= 1");
        if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
            throw std::invalid_argument("loss weights must be >= 0");
        if (!(epsilon_noise > 0.0)) throw std::invalid_argument("epsilon_noise must be > 0");
        if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
        if (!(group_ratio > 0.0 && group_ratio < 1.0))
            throw std::invalid_argument("group_ratio must be in (0, 1)");
        if (patience < 1) throw std::invalid_argument("patience must be >= 1");
        if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
        if (eval_k < 1) throw std::invalid_argument("eval_k must be >= 1");
        if (sa0 && saf) throw std::invalid_argument("sa0 and saf are mutually exclusive");
        if (no_sa && lambda1 > 0.0)
            throw std::invalid_argument("no_sa contradicts lambda1 > 0");
        if (no_cl && lambda2 > 0.0)
            throw std::invalid_argument("no_cl contradicts lambda2 > 0");
        if (fixed_w && !(*fixed_w >= 0.0 && *fixed_w <= 1.0))
            throw std::invalid_argument("fixed_w must be in [0, 1]");
    }
};

// Named seed streams, all derived from the master seed.
struct TrainSeeds {
    uint64_t master = 0;
    uint64_t init = 0;
    uint64_t views = 0;
    uint64_t batches = 0;
    uint64_t norm_probes = 0;

    static TrainSeeds from_master(uint64_t master) {
        return {master, derive_seed(master, 1), derive_seed(master, 2), derive_seed(master, 3),
                derive_seed(master, 4)};
    }
};

// Row-sparse Adam with per-row step counters: moments and bias correction
// advance only when a row receives gradient.
struct AdamState {
    Dense m;
    Dense v;
    std::vector<uint64_t> step;

    AdamState() = default;
    AdamState(size_t rows, size_t cols) : m(rows, cols), v(rows, cols), step(rows, 0) {}
};

inline void adam_step(Dense& params, AdamState& state, const GradientBuffer& grad, double lr,
                      double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) {
    if (!params.same_shape(grad.grad) || !params.same_shape(state.m))
        throw std::invalid_argument("adam_step: shape mismatch");
    const size_t dim = params.cols;
    for (size_t r : grad.touched_rows) {
        const double* g = grad.grad.row(r);
        for (size_t k = 0; k < dim; ++k)
            if (!std::isfinite(g[k])) throw std::runtime_error("divergence detected");
        const double t = static_cast<double>(++state.step[r]);
        const double bc1 = 1.0 - std::pow(beta1, t);
        const double bc2 = 1.0 - std::pow(beta2, t);
        double* m = state.m.row(r);
        double* v = state.v.row(r);
        double* x = params.row(r);
        for (size_t k = 0; k < dim; ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
            x[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + eps);
        }
    }
}

struct EpochStats {
    size_t epoch = 0;
    double rec = 0.0;
    double sa = 0.0;
    double cl_p = 0.0;
    double cl_up = 0.0;
    double gini_w = 0.0;
    double total = 0.0;
    double val_recall = 0.0;
    bool improved = false;
};

struct TrainResult {
    FinalEmbeddings final;
    Dense x0;  // base embeddings of the best epoch
    std::vector<EpochStats> history;
    size_t best_epoch = 0;
    double best_metric = 0.0;
    LayerWeights lw;
    PopularityStats stats;  // of the last epoch
};

// One full training run: per-epoch popularity stats, mini-batch gradient
// steps, validation-driven early stopping, best-epoch checkpointing.
inline TrainResult train(const TrainConfig& cfg, const SplitDataset& split,
                         const AdjacencySet& adj) {
    cfg.validate();
    const TrainSeeds seeds = TrainSeeds::from_master(cfg.seed);
    const size_t m = adj.m_users;

    TrainResult res;
    res.lw = layer_weights(adj, cfg.layers,
                           default_norm_estimator(adj.n_nodes(), seeds.norm_probes));

    BatchStream stream(split, cfg.batch_size, seeds.batches, cfg.group_ratio);
    Dense x0 = init_embeddings(m, adj.n_items, cfg.dim, seeds.init);
    AdamState adam(x0.rows, x0.cols);
    const EvalData val_data = eval_on_validation(split);
    const std::vector<size_t> train_user_deg = split.train_user_degree();

    LossConfig loss_cfg;
    loss_cfg.lambda1 = cfg.lambda1;
    loss_cfg.lambda2 = cfg.lambda2;
    loss_cfg.lambda3 = cfg.lambda3;
    loss_cfg.temperature = cfg.temperature;
    loss_cfg.epsilon_noise = cfg.epsilon_noise;
    loss_cfg.no_sa = cfg.no_sa;
    loss_cfg.no_cl = cfg.no_cl;
    loss_cfg.sa0 = cfg.sa0;
    loss_cfg.saf = cfg.saf;
    loss_cfg.fixed_w = cfg.fixed_w;

    size_t epochs_since_best = 0;
    GradientBuffer grad;
    for (size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        res.stats = compute_popularity_stats(adj, train_user_deg);
        stream.begin_epoch(epoch);

        EpochStats es;
        es.epoch = epoch;
        size_t batches = 0;
        size_t batch_idx = 0;
        while (auto batch = stream.next()) {
            loss_cfg.view_seed = derive_seed(seeds.views, (epoch << 20) + batch_idx);
            const LossBreakdown bd = compute_batch_loss(x0, adj, cfg.layers, res.lw, res.stats,
                                                        *batch, loss_cfg, &grad);
            if (!std::isfinite(bd.total)) {
                std::ostringstream oss;
                oss << "divergence detected at epoch " << epoch << " batch " << batch_idx
                    << ": rec=" << bd.rec << " sa=" << bd.sa << " cl=" << bd.cl
                    << " reg=" << bd.reg << " w=" << bd.contrast_w;
                throw std::runtime_error(oss.str());
            }
            adam_step(x0, adam, grad, cfg.lr);
            es.rec += bd.rec;
            es.sa += bd.sa;
            es.cl_p += bd.cl_p;
            es.cl_up += bd.cl_up;
            es.total += bd.total;
            es.gini_w = bd.contrast_w;
            ++batches;
            ++batch_idx;
        }
        if (batches > 0) {
            es.rec /= batches;
            es.sa /= batches;
            es.cl_p /= batches;
            es.cl_up /= batches;
            es.total /= batches;
        }

        const FinalEmbeddings fin = finalize(propagate(x0, adj, cfg.layers), m);
        const EvalReport rep = evaluate(fin, val_data, {cfg.eval_k});
        es.val_recall = rep.overall.at(cfg.eval_k).recall;

        if (res.history.empty() || es.val_recall > res.best_metric) {
            res.best_metric = es.val_recall;
            res.best_epoch = epoch;
            res.final = fin;
            res.x0 = x0;
            epochs_since_best = 0;
            es.improved = true;
        } else {
            ++epochs_since_best;
        }
        res.history.push_back(es);
        if (epochs_since_best >= cfg.patience) break;
    }
    return res;
}

}  // namespace gsda
