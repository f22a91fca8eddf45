// Command-line entry points: prepare / train / evaluate / diagnose.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gsda/dataset.hpp"
#include "gsda/diagnostics.hpp"
#include "gsda/evaluator.hpp"
#include "gsda/graph.hpp"
#include "gsda/manifest.hpp"
#include "gsda/model.hpp"
#include "gsda/popularity.hpp"
#include "gsda/split.hpp"
#include "gsda/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const std::string& key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "': invalid value");
    }
}

gsda::TrainConfig parse_train_config(const json& j) {
    static const std::set<std::string> known = {
        "dim",         "layers",        "lr",          "batch_size",  "lambda1",
        "lambda2",     "lambda3",       "epsilon_noise", "temperature", "group_ratio",
        "patience",    "max_epochs",    "seed",        "eval_k",      "ablation"};
    static const std::set<std::string> known_ablation = {"no_sa", "no_cl", "sa0", "saf", "fixed_w"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw std::runtime_error("unknown config key: " + key);

    gsda::TrainConfig cfg;
    read_field(j, "dim", cfg.dim);
    read_field(j, "layers", cfg.layers);
    read_field(j, "lr", cfg.lr);
    read_field(j, "batch_size", cfg.batch_size);
    read_field(j, "lambda1", cfg.lambda1);
    read_field(j, "lambda2", cfg.lambda2);
    read_field(j, "lambda3", cfg.lambda3);
    read_field(j, "epsilon_noise", cfg.epsilon_noise);
    read_field(j, "temperature", cfg.temperature);
    read_field(j, "group_ratio", cfg.group_ratio);
    read_field(j, "patience", cfg.patience);
    read_field(j, "max_epochs", cfg.max_epochs);
    read_field(j, "seed", cfg.seed);
    read_field(j, "eval_k", cfg.eval_k);
    if (j.contains("ablation")) {
        const json& a = j.at("ablation");
        if (!a.is_object()) throw std::runtime_error("config key 'ablation': expected an object");
        for (const auto& [key, value] : a.items())
            if (!known_ablation.count(key))
                throw std::runtime_error("unknown ablation key: " + key);
        read_field(a, "no_sa", cfg.no_sa);
        read_field(a, "no_cl", cfg.no_cl);
        read_field(a, "sa0", cfg.sa0);
        read_field(a, "saf", cfg.saf);
        if (a.contains("fixed_w")) {
            double w = 0.0;
            read_field(a, "fixed_w", w);
            cfg.fixed_w = w;
        }
    }
    cfg.validate();
    return cfg;
}

json config_snapshot(const gsda::TrainConfig& c) {
    json j;
    j["dim"] = c.dim;
    j["layers"] = c.layers;
    j["lr"] = c.lr;
    j["batch_size"] = c.batch_size;
    j["lambda1"] = c.lambda1;
    j["lambda2"] = c.lambda2;
    j["lambda3"] = c.lambda3;
    j["epsilon_noise"] = c.epsilon_noise;
    j["temperature"] = c.temperature;
    j["group_ratio"] = c.group_ratio;
    j["patience"] = c.patience;
    j["max_epochs"] = c.max_epochs;
    j["seed"] = c.seed;
    j["eval_k"] = c.eval_k;
    j["ablation"]["no_sa"] = c.no_sa;
    j["ablation"]["no_cl"] = c.no_cl;
    j["ablation"]["sa0"] = c.sa0;
    j["ablation"]["saf"] = c.saf;
    if (c.fixed_w) j["ablation"]["fixed_w"] = *c.fixed_w;
    return j;
}

json seeds_json(const gsda::TrainSeeds& s) {
    json j;
    j["master"] = s.master;
    j["init"] = s.init;
    j["views"] = s.views;
    j["batches"] = s.batches;
    j["norm_probes"] = s.norm_probes;
    return j;
}

json percentiles_json(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    auto at = [&](double q) {
        if (values.empty()) return 0.0;
        const double pos = q * static_cast<double>(values.size() - 1);
        const size_t lo = static_cast<size_t>(pos);
        const size_t hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    json j;
    for (const auto& [name, q] : std::vector<std::pair<std::string, double>>{
             {"p0", 0.0}, {"p25", 0.25}, {"p50", 0.5}, {"p75", 0.75}, {"p90", 0.9},
             {"p99", 0.99}, {"p100", 1.0}})
        j[name] = at(q);
    return j;
}

gsda::FinalEmbeddings load_checkpoint_embeddings(const fs::path& run_dir) {
    const auto [stacked, m_users] = gsda::read_embeddings_csv(run_dir / "embeddings.csv");
    gsda::FinalEmbeddings fin;
    fin.z = gsda::Dense(m_users, stacked.cols);
    fin.e = gsda::Dense(stacked.rows - m_users, stacked.cols);
    std::copy(stacked.data.begin(), stacked.data.begin() + m_users * stacked.cols,
              fin.z.data.begin());
    std::copy(stacked.data.begin() + m_users * stacked.cols, stacked.data.end(),
              fin.e.data.begin());
    return fin;
}

int cmd_prepare(const std::string& input, const std::string& format, size_t k_core,
                size_t test_per_item, double target_fraction, double val_fraction, uint64_t seed,
                const std::string& outdir) {
    const auto fmt = format == "csv" ? gsda::InputFormat::csv : gsda::InputFormat::tsv;
    gsda::InteractionDataset raw = gsda::parse_interactions(input, fmt);
    gsda::InteractionDataset ds = k_core_filter(raw, k_core);
    const size_t quota =
        test_per_item > 0 ? test_per_item : gsda::test_per_item_for_fraction(ds, target_fraction);
    gsda::SplitDataset sp = gsda::unbiased_split(ds, quota, val_fraction, seed);
    sp.config.k_core = k_core;

    const fs::path out(outdir);
    gsda::write_split(sp, out);

    json manifest;
    manifest["command"] = "prepare";
    manifest["config"] = {{"input", input},        {"format", format},
                          {"k_core", k_core},      {"test_per_item", quota},
                          {"val_fraction", val_fraction}, {"seed", seed}};
    manifest["dataset"] = {{"file_hash", gsda::hex64(gsda::fnv1a_file(input))},
                           {"m_users", sp.m_users},
                           {"n_items", sp.n_items},
                           {"n_interactions", sp.total()},
                           {"duplicates_dropped", raw.duplicates_dropped}};
    manifest["artifacts"] = {"train.tsv", "val.tsv", "test.tsv", "split_meta.json"};
    manifest["timestamps"] = {{"created", gsda::iso_timestamp()}};
    gsda::write_json(manifest, out / "manifest.json");

    std::printf("users=%zu items=%zu interactions=%zu density=%.4f%%\n", sp.m_users, sp.n_items,
                sp.total(), 100.0 * double(sp.total()) / (double(sp.m_users) * double(sp.n_items)));
    std::printf("train=%zu val=%zu test=%zu test_per_item=%zu capped_items=%zu duplicates=%zu\n",
                sp.train.size(), sp.validation.size(), sp.test.size(), quota, sp.capped_items,
                raw.duplicates_dropped);
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& outdir) {
    const json config_json = gsda::read_json(config_path);
    const gsda::TrainConfig cfg = parse_train_config(config_json);
    const gsda::SplitDataset split = gsda::load_split(data_dir);
    const gsda::AdjacencySet adj =
        gsda::build_adjacency(gsda::train_dataset(split), /*allow_isolated=*/true);

    const json snapshot = config_snapshot(cfg);
    const std::string cfg_hash = gsda::hex64(gsda::fnv1a(snapshot.dump())).substr(0, 8);
    const fs::path run_dir = fs::path(outdir) / (cfg_hash + "-s" + std::to_string(cfg.seed));
    fs::create_directories(run_dir);

    const gsda::TrainSeeds seeds = gsda::TrainSeeds::from_master(cfg.seed);
    json manifest;
    manifest["command"] = "train";
    manifest["config"] = snapshot;
    manifest["config_hash"] = cfg_hash;
    manifest["dataset"] = {{"dir", data_dir},
                           {"file_hash", gsda::hex64(gsda::fnv1a_file(fs::path(data_dir) / "train.tsv"))},
                           {"m_users", split.m_users},
                           {"n_items", split.n_items},
                           {"n_train", split.train.size()},
                           {"n_validation", split.validation.size()},
                           {"n_test", split.test.size()}};
    manifest["seeds"] = seeds_json(seeds);
    manifest["artifacts"] = {"history.jsonl", "embeddings.csv", "base_embeddings.csv",
                             "checkpoint_meta.json", "popularity_stats.json"};
    manifest["timestamps"] = {{"started", gsda::iso_timestamp()}};
    gsda::write_json(manifest, run_dir / "manifest.json");

    {
        const auto stats =
            gsda::compute_popularity_stats(adj, split.train_user_degree());
        json stats_json;
        stats_json["gini"] = stats.gini;
        stats_json["epsilon"] = stats.epsilon;
        stats_json["contrast_weight"] = gsda::contrast_weight(stats);
        stats_json["item_popularity_percentiles"] = percentiles_json(stats.item_pop);
        gsda::write_json(stats_json, run_dir / "popularity_stats.json");
    }

    const gsda::TrainResult res = gsda::train(cfg, split, adj);

    {
        std::ofstream hist(run_dir / "history.jsonl");
        for (const gsda::EpochStats& es : res.history) {
            json line;
            line["epoch"] = es.epoch;
            line["rec"] = es.rec;
            line["sa"] = es.sa;
            line["cl_p"] = es.cl_p;
            line["cl_up"] = es.cl_up;
            line["gini_w"] = es.gini_w;
            line["total"] = es.total;
            line["val_recall"] = es.val_recall;
            line["improved"] = es.improved;
            hist << line.dump() << '\n';
        }
    }
    gsda::write_embeddings_csv(run_dir / "embeddings.csv", res.final.z, res.final.e);
    {
        gsda::Dense zb(split.m_users, cfg.dim), eb(split.n_items, cfg.dim);
        std::copy(res.x0.data.begin(), res.x0.data.begin() + zb.data.size(), zb.data.begin());
        std::copy(res.x0.data.begin() + zb.data.size(), res.x0.data.end(), eb.data.begin());
        gsda::write_embeddings_csv(run_dir / "base_embeddings.csv", zb, eb);
    }
    json meta;
    meta["config_hash"] = cfg_hash;
    meta["best_epoch"] = res.best_epoch;
    meta["val_metric"] = res.best_metric;
    meta["eval_k"] = cfg.eval_k;
    meta["epochs_run"] = res.history.size();
    gsda::write_json(meta, run_dir / "checkpoint_meta.json");

    std::printf("run_dir=%s epochs=%zu best_epoch=%zu val_recall@%zu=%.6f\n",
                run_dir.string().c_str(), res.history.size(), res.best_epoch, cfg.eval_k,
                res.best_metric);
    return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& data_dir,
                 std::vector<size_t> ks, std::string outdir) {
    if (ks.empty()) ks = {20};
    std::sort(ks.begin(), ks.end());
    const gsda::SplitDataset split = gsda::load_split(data_dir);
    const gsda::FinalEmbeddings fin = load_checkpoint_embeddings(checkpoint);
    if (fin.z.rows != split.m_users || fin.e.rows != split.n_items)
        throw std::runtime_error("checkpoint shape does not match the dataset");

    const auto groups = gsda::popularity_groups(split.train_item_degree(), 5);
    const gsda::EvalReport rep = gsda::evaluate(fin, gsda::eval_on_test(split), ks, groups);

    if (outdir.empty()) outdir = checkpoint;
    fs::create_directories(outdir);
    gsda::write_json(gsda::report_to_json(rep), fs::path(outdir) / "report.json");
    gsda::write_report_csv(rep, fs::path(outdir) / "report.csv");
    for (size_t k : ks) {
        const auto& m = rep.overall.at(k);
        std::printf("K=%zu recall=%.6f hr=%.6f ndcg=%.6f (users=%zu)\n", k, m.recall, m.hr, m.ndcg,
                    rep.n_users_evaluated);
    }
    return 0;
}

int cmd_diagnose(const std::string& checkpoint, bool random_init, size_t dim,
                 const std::string& data_dir, size_t layers, size_t pairs, uint64_t seed,
                 const std::string& outdir) {
    const gsda::SplitDataset split = gsda::load_split(data_dir);
    const gsda::AdjacencySet adj =
        gsda::build_adjacency(gsda::train_dataset(split), /*allow_isolated=*/true);

    gsda::Dense x0;
    if (random_init) {
        x0 = gsda::init_embeddings(split.m_users, split.n_items, dim, seed);
    } else {
        auto [stacked, m_users] = gsda::read_embeddings_csv(fs::path(checkpoint) / "base_embeddings.csv");
        if (stacked.rows != adj.n_nodes())
            throw std::runtime_error("checkpoint does not match the dataset");
        x0 = std::move(stacked);
    }

    const gsda::EmbeddingState st = gsda::propagate(x0, adj, layers);
    const gsda::LayerDiagnostics ld =
        gsda::run_diagnostics(st, split.train_item_degree(), layers, seed, pairs);

    fs::create_directories(outdir);
    gsda::write_diagnostics_csv(ld, fs::path(outdir) / "diagnostics.csv");
    std::printf("layers=%zu entropy_tail_nonincreasing=%d truncated_pairs=%d\n", layers,
                ld.entropy_tail_nonincreasing ? 1 : 0, ld.truncated_pairs ? 1 : 0);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph collaborative filtering lab"};
    app.require_subcommand(1);

    // prepare
    auto* prep = app.add_subcommand("prepare", "filter raw interactions and build the split");
    std::string in_path, format = "tsv", outdir;
    size_t k_core = 10, test_per_item = 0;
    double target_fraction = 0.1, val_fraction = 0.1;
    uint64_t seed = 42;
    prep->add_option("--input", in_path, "raw interaction file")->required();
    prep->add_option("--format", format, "tsv or csv")->check(CLI::IsMember({"tsv", "csv"}));
    prep->add_option("--k-core", k_core, "minimum interactions per user/item");
    prep->add_option("--test-per-item", test_per_item, "uniform test quota per item");
    prep->add_option("--target-fraction", target_fraction,
                     "test fraction used to derive the quota when --test-per-item is absent");
    prep->add_option("--val-fraction", val_fraction, "validation fraction of all interactions");
    prep->add_option("--seed", seed, "split seed");
    prep->add_option("--outdir", outdir, "output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "train on a prepared split");
    std::string config_path, data_dir, train_outdir;
    tr->add_option("--config", config_path, "training config JSON")->required();
    tr->add_option("--data", data_dir, "prepared split directory")->required();
    tr->add_option("--outdir", train_outdir, "runs directory")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "full-ranking metrics for a checkpoint");
    std::string ckpt, eval_data, eval_outdir;
    std::vector<size_t> ks;
    ev->add_option("--checkpoint", ckpt, "run directory holding embeddings.csv")->required();
    ev->add_option("--data", eval_data, "prepared split directory")->required();
    ev->add_option("--k", ks, "cutoffs (repeatable)");
    ev->add_option("--outdir", eval_outdir, "report directory (defaults to the checkpoint)");

    // diagnose
    auto* dg = app.add_subcommand("diagnose", "layer-wise homogenization diagnostics");
    std::string diag_ckpt, diag_data, diag_outdir;
    bool random_init = false;
    size_t diag_layers = 8, diag_pairs = 1000, diag_dim = 64;
    uint64_t diag_seed = 42;
    dg->add_option("--checkpoint", diag_ckpt, "run directory holding base_embeddings.csv");
    dg->add_flag("--random-init", random_init, "use fresh embeddings instead of a checkpoint");
    dg->add_option("--dim", diag_dim, "embedding size for --random-init");
    dg->add_option("--data", diag_data, "prepared split directory")->required();
    dg->add_option("--layers", diag_layers, "propagation depth to analyze");
    dg->add_option("--pairs", diag_pairs, "popular/unpopular pairs to sample");
    dg->add_option("--seed", diag_seed, "sampling seed");
    dg->add_option("--outdir", diag_outdir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (prep->parsed())
            return cmd_prepare(in_path, format, k_core, test_per_item, target_fraction,
                               val_fraction, seed, outdir);
        if (tr->parsed()) return cmd_train(config_path, data_dir, train_outdir);
        if (ev->parsed()) return cmd_evaluate(ckpt, eval_data, ks, eval_outdir);
        if (dg->parsed()) {
            if (!random_init && diag_ckpt.empty())
                throw std::runtime_error("either --checkpoint or --random-init is required");
            return cmd_diagnose(diag_ckpt, random_init, diag_dim, diag_data, diag_layers,
                                diag_pairs, diag_seed, diag_outdir);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
