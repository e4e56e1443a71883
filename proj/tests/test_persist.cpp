// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "supernas/experiments.hpp"
#include "supernas/kernels.hpp"

using namespace supernas;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "supernas_persist" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
}

// A toy-space configuration small enough for unit tests.
ExperimentConfig tiny_config(const std::string& outdir) {
    ExperimentConfig cfg = default_toy_config();
    cfg.seed = 7;
    cfg.output_dir = outdir;
    cfg.dataset.n_per_class = 20;
    for (auto& s : cfg.stages) {
        s.iterations = 4;
        s.warmup_iterations = 0;
        s.samples_per_step = 2;
        s.batch_size = 8;
    }
    cfg.stages[0].warmup_iterations = 2;
    cfg.eval.batch_size = 16;
    cfg.eval.calib_batches = 2;
    cfg.eval.auto_count = 4;
    cfg.standalone.iterations = 4;
    cfg.standalone.batch_size = 8;
    return cfg;
}

bool params_equal(const SupernetParams& a, const SupernetParams& b) {
    std::vector<const Tensor*> av, bv;
    a.for_each_param([&](const Parameter& p, ParamKind) { av.push_back(&p.value); });
    b.for_each_param([&](const Parameter& p, ParamKind) { bv.push_back(&p.value); });
    if (av.size() != bv.size()) return false;
    for (size_t i = 0; i < av.size(); ++i) {
        if (!av[i]->same_shape(*bv[i])) return false;
        for (int64_t k = 0; k < av[i]->numel(); ++k)
            if ((*av[i])[k] != (*bv[i])[k]) return false;
    }
    return true;
}

int run_cli(const std::string& args) {
#ifdef SUPERNAS_CLI_PATH
    const std::string cmd = std::string(SUPERNAS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
#else
    (void)args;
    return -1;
#endif
}

}  // namespace

TEST_CASE("checkpoint round trip is byte identical") {
    const auto dir = fresh_dir("roundtrip");
    SupernetParams params = init_supernet(toy_space(), 5);
    Checkpoint ck;
    ck.params = params;
    ck.trainer.iteration = 17;
    ck.trainer.warmup_done = true;
    ck.trainer.sampler_state = Rng(9).state();
    ck.trainer.data_epoch = 3;
    ck.trainer.data_cursor = 24;
    SgdOptimizer opt(params, 0.9, 5e-4);
    ck.trainer.velocities = opt.velocities();
    ck.stage_complete = true;
    ck.lr_init = 0.01;
    ck.lr_history = {{1, 0.01}};
    ck.run_seed = 42;

    const std::string p1 = (dir / "a.ckpt").string();
    const std::string p2 = (dir / "b.ckpt").string();
    save_checkpoint(ck, p1);
    Checkpoint back = load_checkpoint(p1);
    save_checkpoint(back, p2);
    CHECK(slurp(p1) == slurp(p2));
    CHECK(params_equal(ck.params, back.params));
    CHECK(back.trainer.iteration == 17);
    CHECK(back.trainer.data_cursor == 24);
    CHECK(back.lr_history.size() == 1);
    CHECK(back.run_seed == 42);
}

TEST_CASE("corrupted and mismatched checkpoints are refused") {
    const auto dir = fresh_dir("corrupt");
    SupernetParams params = init_supernet(toy_space(), 5);
    Checkpoint ck;
    ck.params = params;
    const std::string path = (dir / "x.ckpt").string();
    save_checkpoint(ck, path);

    SUBCASE("flipped payload byte fails the checksum") {
        std::string bytes = slurp(path);
        bytes[bytes.size() / 2] = char(bytes[bytes.size() / 2] ^ 0x5a);
        spit(path, bytes);
        CHECK_THROWS_AS(load_checkpoint(path), IoError);
    }
    SUBCASE("version mismatch is refused") {
        std::string bytes = slurp(path);
        bytes[8] = char(99);  // version field follows the magic
        spit(path, bytes);
        CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), IoError);
    }
    SUBCASE("truncation is refused") {
        std::string bytes = slurp(path);
        bytes.resize(bytes.size() - 9);
        spit(path, bytes);
        CHECK_THROWS_AS(load_checkpoint(path), IoError);
    }
    SUBCASE("missing file is a missing artifact") {
        CHECK_THROWS_AS(load_checkpoint((dir / "nope.ckpt").string()), MissingArtifact);
    }
}

TEST_CASE("config parsing") {
    SUBCASE("minimal config fills the documented defaults") {
        const ExperimentConfig cfg = parse_config_text("{}", "inline");
        CHECK(cfg.stages.size() == 3);
        CHECK(cfg.stages[0].alpha == 0.5);
        CHECK(cfg.stages[0].samples_per_step == 8);
        CHECK(cfg.eval.recalibrate);
        CHECK(cfg.space_preset == "toy6");
        CHECK(cfg.stages[0].lr_init == 0.01);
        CHECK(cfg.stages[1].lr_init == 0.001);
        CHECK(cfg.stages[2].lr_init == 0.001);
        CHECK(cfg.stages[0].warmup_lr == 0.1);
        CHECK(cfg.stages[0].momentum == 0.9);
        CHECK(cfg.stages[0].weight_decay == 5e-4);
    }
    SUBCASE("unknown keys are rejected with their path") {
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"sedd": 3})", "inline"),
                             doctest::Contains("config.sedd"), ConfigError);
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"eval": {"recalibrte": true}})", "inline"),
                             doctest::Contains("config.eval.recalibrte"), ConfigError);
    }
    SUBCASE("non-grid channel option in a multiple-of-4 space is a validation error") {
        const std::string text = R"({
            "dataset": {"classes": 2, "shape": [3, 8, 8]},
            "space": {"name": "grid", "input": [3, 8, 8], "classes": 2,
                      "stem_options": [4, 7], "stages": [], "require_multiple_of_4": true}
        })";
        CHECK_THROWS_WITH_AS(parse_config_text(text, "inline"), doctest::Contains("7"), ConfigError);
    }
    SUBCASE("type errors carry the key path") {
        CHECK_THROWS_WITH_AS(parse_config_text(R"({"seed": "abc"})", "inline"),
                             doctest::Contains("config.seed"), ConfigError);
    }
    SUBCASE("alpha bounds are validated") {
        CHECK_THROWS_AS(parse_config_text(R"({"stages": [{"alpha": 1.5}]})", "inline"), ConfigError);
    }
    SUBCASE("round trip: parse, serialize, parse") {
        const auto dir = fresh_dir("cfg");
        ExperimentConfig cfg = tiny_config((dir / "out").string());
        const std::string text = serialize_config(cfg);
        const ExperimentConfig back = parse_config_text(text, "inline");
        CHECK(serialize_config(back) == text);
    }
}

TEST_CASE("progressive pipeline artifacts") {
    const auto dir = fresh_dir("pipeline");
    ExperimentConfig cfg = tiny_config(dir.string());
    cfg.enhance = {true, true};

    const auto artifacts = run_progressive_pipeline(cfg, dir.string());
    REQUIRE(artifacts.size() == 3);

    SUBCASE("stage learning rates are recorded in the checkpoints") {
        const Checkpoint c3 = load_checkpoint(stage_checkpoint_path(dir.string(), 3));
        REQUIRE(c3.lr_history.size() == 3);
        CHECK(c3.lr_history[0].stage == 1);
        CHECK(c3.lr_history[0].lr_init == 0.01);
        CHECK(c3.lr_history[1].lr_init == 0.001);
        CHECK(c3.lr_history[2].lr_init == 0.001);
        CHECK(c3.params.stage == 3);
        CHECK(c3.stage_complete);
    }
    SUBCASE("stage-2 initial forward equals stage-1 final forward") {
        const Checkpoint c1 = load_checkpoint(stage_checkpoint_path(dir.string(), 1));
        SupernetParams split = progressive_split(c1.params);
        SupernetParams s1 = c1.params;
        const DataBundle bundle = load_data(cfg);
        const auto batches = eval_batches(bundle.val, bundle.mean, bundle.stddev, 8);
        Sampler sampler(s1.space, 2222);
        for (int i = 0; i < 10; ++i) {
            const SubnetEncoding enc = sampler.sample();
            const Tensor a = slice_forward(s1, enc, batches[0].x, BnMode::eval);
            const Tensor b = slice_forward(split, enc, batches[0].x, BnMode::eval);
            for (int64_t k = 0; k < a.numel(); ++k) CHECK(a[k] == b[k]);
        }
    }
    SUBCASE("metrics logs hold one record per iteration") {
        const std::string text = slurp((dir / "metrics_stage1.jsonl").string());
        int lines = 0;
        for (char c : text)
            if (c == '\n') ++lines;
        CHECK(lines == cfg.stages[0].warmup_iterations + cfg.stages[0].iterations);
        CHECK(text.find("\"phase\":\"warmup\"") != std::string::npos);
        CHECK(text.find("\"phase\":\"distill\"") != std::string::npos);
        CHECK(text.find("\"lr\":") != std::string::npos);
    }
    SUBCASE("missing prerequisite stage is reported") {
        const auto empty = fresh_dir("pipeline-empty");
        ExperimentConfig cfg2 = tiny_config(empty.string());
        CHECK_THROWS_AS(run_train_stage(cfg2, 2, empty.string()), MissingArtifact);
    }
}

TEST_CASE("single-stage pipeline equals plain training") {
    const auto dir = fresh_dir("one-stage");
    ExperimentConfig cfg = tiny_config(dir.string());
    cfg.stages.resize(1);

    const auto arts = run_progressive_pipeline(cfg, dir.string());
    REQUIRE(arts.size() == 1);
    const Checkpoint via_pipeline = load_checkpoint(arts[0].checkpoint_path);

    // Plain training with the same derived streams.
    const DataBundle bundle = load_data(cfg);
    SupernetParams params = init_supernet(enhanced_space(cfg), cfg.seed);
    SupernetTrainer trainer(params, bundle, cfg.augment, cfg.stages[0], cfg.seed, 1);
    trainer.run();
    CHECK(params_equal(via_pipeline.params, params));
}

TEST_CASE("training is idempotent and rerun-stable at the byte level") {
    const auto dir = fresh_dir("idem");
    ExperimentConfig cfg = tiny_config(dir.string());
    cfg.stages.resize(1);
    run_train_stage(cfg, 1, dir.string());
    const std::string first_ckpt = slurp(stage_checkpoint_path(dir.string(), 1));
    const std::string first_metrics = slurp((dir / "metrics_stage1.jsonl").string());
    run_train_stage(cfg, 1, dir.string());
    CHECK(slurp(stage_checkpoint_path(dir.string(), 1)) == first_ckpt);
    CHECK(slurp((dir / "metrics_stage1.jsonl").string()) == first_metrics);
}

TEST_CASE("resume at the midpoint matches uninterrupted training bit for bit") {
    const auto dir_full = fresh_dir("resume-full");
    const auto dir_part = fresh_dir("resume-part");
    ExperimentConfig cfg = tiny_config(dir_full.string());
    cfg.stages.resize(1);
    cfg.stages[0].iterations = 6;

    run_train_stage(cfg, 1, dir_full.string());
    const std::string full_bytes = slurp(stage_checkpoint_path(dir_full.string(), 1));

    ExperimentConfig cfg2 = cfg;
    cfg2.output_dir = dir_part.string();
    run_train_stage(cfg2, 1, dir_part.string(), "", /*checkpoint_every=*/3);
    const std::string snap_path = (dir_part / "stage1_iter3.ckpt").string();
    REQUIRE(fs::exists(snap_path));
    const std::string snap_bytes_before = slurp(snap_path);

    fs::remove(stage_checkpoint_path(dir_part.string(), 1));
    run_train_stage(cfg2, 1, dir_part.string(), snap_path);
    CHECK(slurp(stage_checkpoint_path(dir_part.string(), 1)) == full_bytes);
    // the resumed run must not mutate its input snapshot
    CHECK(slurp(snap_path) == snap_bytes_before);
}

TEST_CASE("split transform advances stages and stops at three") {
    const auto dir = fresh_dir("split");
    ExperimentConfig cfg = tiny_config(dir.string());
    cfg.stages.resize(1);
    run_train_stage(cfg, 1, dir.string());
    const std::string s1 = stage_checkpoint_path(dir.string(), 1);
    const std::string s1_bytes = slurp(s1);
    const std::string s2 = (dir / "split2.ckpt").string();
    const std::string s3 = (dir / "split3.ckpt").string();
    run_split(s1, s2);
    run_split(s2, s3);
    CHECK(load_checkpoint(s2).params.stage == 2);
    CHECK(load_checkpoint(s3).params.stage == 3);
    CHECK_THROWS_AS(run_split(s3, (dir / "split4.ckpt").string()), ValueError);
    CHECK(slurp(s1) == s1_bytes);  // inputs untouched
    CHECK_THROWS_AS(run_split(s1, s1), ValueError);
}

TEST_CASE("encoding selection is deterministic and spans the capacity range") {
    const SearchSpace sp = toy_space();
    const auto a = pick_encodings(sp, 12, 99);
    const auto b = pick_encodings(sp, 12, 99);
    REQUIRE(a.size() == 12);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    std::set<std::string> distinct;
    for (const auto& e : a) distinct.insert(e.str());
    CHECK(distinct.size() == a.size());
    CHECK(distinct.count(all_min_encoding(sp).str()) == 1);
    CHECK(distinct.count(all_max_encoding(sp).str()) == 1);
    CHECK(mac_count(sp, a.front()) < mac_count(sp, a.back()));
}

#ifdef SUPERNAS_CLI_PATH
TEST_CASE("scalar and simd backends train to byte-identical checkpoints") {
    if (!simd::avx2_supported()) {
        MESSAGE("avx2 not supported; skipping backend comparison");
        return;
    }
    const auto dir = fresh_dir("backend");
    ExperimentConfig cfg = tiny_config((dir / "a").string());
    cfg.stages.resize(1);
    const std::string cfg_path = (dir / "cfg.json").string();
    spit(cfg_path, serialize_config(cfg));
    auto run_with = [&](const std::string& backend, const std::string& out) {
        const std::string cmd = "SUPERNAS_SIMD=" + backend + " " + std::string(SUPERNAS_CLI_PATH) +
                                " train --config " + cfg_path + " --out " + out + " >/dev/null 2>&1";
        REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    };
    run_with("avx2", (dir / "a").string());
    run_with("scalar", (dir / "b").string());
    CHECK(slurp((dir / "a/stage1.ckpt").string()) == slurp((dir / "b/stage1.ckpt").string()));
}

TEST_CASE("cli exit codes") {
    const auto dir = fresh_dir("cli");
    const std::string cfg_path = (dir / "cfg.json").string();
    {
        ExperimentConfig cfg = tiny_config((dir / "out").string());
        cfg.stages.resize(1);
        spit(cfg_path, serialize_config(cfg));
    }
    SUBCASE("bad usage and config errors exit 2") {
        CHECK(run_cli("definitely-not-a-command") == 2);
        const std::string bad = (dir / "bad.json").string();
        spit(bad, R"({"unknown_key": 1})");
        CHECK(run_cli("train --config " + bad) == 2);
    }
    SUBCASE("missing prerequisite exits 3") {
        CHECK(run_cli("train --config " + cfg_path + " --stage 2") == 2);  // stage 2 not configured
        ExperimentConfig cfg3 = tiny_config((dir / "out3").string());
        const std::string cfg3_path = (dir / "cfg3.json").string();
        spit(cfg3_path, serialize_config(cfg3));
        CHECK(run_cli("train --config " + cfg3_path + " --stage 2") == 3);
    }
    SUBCASE("zero-variance report exits 4 with a refusal") {
        const std::string sup = (dir / "sup.csv").string();
        const std::string sta = (dir / "sta.csv").string();
        spit(sup, "encoding,source,seed,accuracy\n4-4,supernet,1,0.5\n8-8,supernet,1,0.5\n");
        spit(sta, "encoding,source,seed,accuracy\n4-4,standalone,1,0.4\n8-8,standalone,1,0.6\n");
        CHECK(run_cli("report --supernet " + sup + " --standalone " + sta + " --out " + dir.string()) == 4);
    }
    SUBCASE("train then eval then report succeed end to end") {
        CHECK(run_cli("train --config " + cfg_path + " --stage 1") == 0);
        const std::string ckpt = (dir / "out/stage1.ckpt").string();
        REQUIRE(fs::exists(ckpt));
        CHECK(run_cli("eval-rank --config " + cfg_path + " --checkpoint " + ckpt) == 0);
        CHECK(run_cli("standalone --config " + cfg_path) == 0);
        CHECK(run_cli("report --out " + (dir / "out").string()) == 0);
        CHECK(fs::exists(dir / "out/rank_report.json"));
        CHECK(fs::exists(dir / "out/scatter.csv"));
    }
}
#endif
