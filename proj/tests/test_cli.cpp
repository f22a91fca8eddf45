#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gsda/manifest.hpp"

#include "fixtures.hpp"
#include "util.hpp"

namespace {

namespace fs = std::filesystem;

std::string cli_path() { return GSDA_CLI_PATH; }

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_fixture_tsv(const fs::path& path, uint64_t seed) {
    const auto ds = testutil::make_zipf(25, 15, 220, 1.2, seed);
    std::ofstream out(path);
    for (const auto& [u, i] : ds.interactions)
        out << ds.user_tokens[u] << '\t' << ds.item_tokens[i] << '\n';
}

void write_config(const fs::path& path, const std::string& extra = "") {
    std::ofstream out(path);
    out << R"({"dim": 8, "layers": 2, "lr": 0.01, "batch_size": 64, "max_epochs": 3,)"
        << R"( "patience": 2, "seed": 5)" << (extra.empty() ? "" : ", " + extra) << "}";
}

}  // namespace

TEST_CASE("missing input fails with a nonzero exit") {
    testutil::TempDir dir;
    REQUIRE(run("prepare --input " + (dir.path / "absent.tsv").string() + " --outdir " +
                (dir.path / "out").string()) != 0);
}

TEST_CASE("prepare is deterministic across runs") {
    testutil::TempDir dir;
    write_fixture_tsv(dir.path / "raw.tsv", 41);
    const std::string base = " --input " + (dir.path / "raw.tsv").string() +
                             " --k-core 2 --test-per-item 2 --val-fraction 0.1 --seed 9";
    REQUIRE(run("prepare" + base + " --outdir " + (dir.path / "a").string()) == 0);
    REQUIRE(run("prepare" + base + " --outdir " + (dir.path / "b").string()) == 0);
    for (const char* f : {"train.tsv", "val.tsv", "test.tsv", "split_meta.json"})
        REQUIRE(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
    // manifests differ only in volatile fields
    auto ma = nlohmann::json::parse(slurp(dir.path / "a" / "manifest.json"));
    auto mb = nlohmann::json::parse(slurp(dir.path / "b" / "manifest.json"));
    ma.erase("timestamps");
    mb.erase("timestamps");
    REQUIRE(ma == mb);
}

TEST_CASE("bad training configs are rejected with a nonzero exit") {
    testutil::TempDir dir;
    write_fixture_tsv(dir.path / "raw.tsv", 42);
    REQUIRE(run("prepare --input " + (dir.path / "raw.tsv").string() +
                " --k-core 2 --test-per-item 1 --seed 3 --outdir " +
                (dir.path / "data").string()) == 0);

    const std::string train_tail = " --data " + (dir.path / "data").string() + " --outdir " +
                                   (dir.path / "runs").string();
    write_config(dir.path / "bad1.json", R"("lambda1": -1)");
    REQUIRE(run("train --config " + (dir.path / "bad1.json").string() + train_tail) != 0);

    write_config(dir.path / "bad2.json", R"("mystery_knob": 3)");
    REQUIRE(run("train --config " + (dir.path / "bad2.json").string() + train_tail) != 0);

    write_config(dir.path / "bad3.json", R"("lambda1": 2.0, "ablation": {"no_sa": true})");
    REQUIRE(run("train --config " + (dir.path / "bad3.json").string() + train_tail) != 0);
}

TEST_CASE("the full pipeline is idempotent modulo manifest timestamps") {
    testutil::TempDir dir;
    write_fixture_tsv(dir.path / "raw.tsv", 43);
    REQUIRE(run("prepare --input " + (dir.path / "raw.tsv").string() +
                " --k-core 2 --test-per-item 2 --seed 17 --outdir " +
                (dir.path / "data").string()) == 0);

    write_config(dir.path / "cfg.json", R"("lambda1": 2.0, "lambda2": 0.3)");
    const std::string train_cmd = "train --config " + (dir.path / "cfg.json").string() +
                                  " --data " + (dir.path / "data").string() + " --outdir ";
    REQUIRE(run(train_cmd + (dir.path / "runs_a").string()) == 0);
    REQUIRE(run(train_cmd + (dir.path / "runs_b").string()) == 0);

    fs::path run_a, run_b;
    for (const auto& e : fs::directory_iterator(dir.path / "runs_a")) run_a = e.path();
    for (const auto& e : fs::directory_iterator(dir.path / "runs_b")) run_b = e.path();
    REQUIRE(run_a.filename() == run_b.filename());  // config-hash + seed naming
    for (const char* f :
         {"history.jsonl", "embeddings.csv", "base_embeddings.csv", "checkpoint_meta.json",
          "popularity_stats.json"})
        REQUIRE(slurp(run_a / f) == slurp(run_b / f));

    // evaluate twice: identical reports, group csv carries 5 rows per K
    const std::string eval_cmd = "evaluate --checkpoint " + run_a.string() + " --data " +
                                 (dir.path / "data").string() + " --k 5 --k 10 --outdir ";
    REQUIRE(run(eval_cmd + (dir.path / "eval_a").string()) == 0);
    REQUIRE(run(eval_cmd + (dir.path / "eval_b").string()) == 0);
    REQUIRE(slurp(dir.path / "eval_a" / "report.json") == slurp(dir.path / "eval_b" / "report.json"));
    REQUIRE(slurp(dir.path / "eval_a" / "report.csv") == slurp(dir.path / "eval_b" / "report.csv"));
    {
        std::ifstream in(dir.path / "eval_a" / "report.csv");
        std::string line;
        size_t rows = 0;
        std::getline(in, line);
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        REQUIRE(rows == 5 * 2);
    }

    // diagnose from the checkpoint and from random init
    const std::string diag_tail = " --data " + (dir.path / "data").string() + " --layers 6 --seed 3";
    REQUIRE(run("diagnose --checkpoint " + run_a.string() + diag_tail + " --outdir " +
                (dir.path / "diag_a").string()) == 0);
    REQUIRE(run("diagnose --checkpoint " + run_a.string() + diag_tail + " --outdir " +
                (dir.path / "diag_b").string()) == 0);
    REQUIRE(slurp(dir.path / "diag_a" / "diagnostics.csv") ==
            slurp(dir.path / "diag_b" / "diagnostics.csv"));
    {
        std::ifstream in(dir.path / "diag_a" / "diagnostics.csv");
        std::string line;
        size_t rows = 0;
        while (std::getline(in, line))
            if (!line.empty()) ++rows;
        REQUIRE(rows == 1 + 7);  // header + layers 0..6
    }
    REQUIRE(run("diagnose --random-init --dim 8" + diag_tail + " --outdir " +
                (dir.path / "diag_r").string()) == 0);
    REQUIRE(fs::exists(dir.path / "diag_r" / "diagnostics.csv"));

    // a checkpoint that does not exist is an error
    REQUIRE(run("diagnose --checkpoint " + (dir.path / "nope").string() + diag_tail + " --outdir " +
                (dir.path / "diag_x").string()) != 0);

    // manifest hash recomputation matches the data directory contents
    const auto manifest = nlohmann::json::parse(slurp(run_a / "manifest.json"));
    REQUIRE(manifest.at("dataset").at("m_users").get<size_t>() > 0);
    const auto recomputed = gsda::hex64(gsda::fnv1a_file(dir.path / "data" / "train.tsv"));
    REQUIRE(manifest.at("dataset").at("file_hash").get<std::string>() == recomputed);
}
