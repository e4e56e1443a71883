// SPDX-License-Identifier: Apache-2.0
#include "supernas/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace fs = std::filesystem;

namespace supernas {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int conv_out(int in, int k, int stride, int pad) { return (in + 2 * pad - k) / stride + 1; }

void append_lr(std::vector<StageLr>& history, int stage, double lr) {
    history.erase(std::remove_if(history.begin(), history.end(),
                                 [&](const StageLr& h) { return h.stage == stage; }),
                  history.end());
    history.push_back({stage, lr});
}

AugmentPolicy standalone_policy(const ExperimentConfig& cfg) { return cfg.augment; }

}  // namespace

int64_t mac_count(const SearchSpace& space, const SubnetEncoding& enc) {
    validate_encoding(space, enc);
    int64_t macs = 0;
    int h = space.input_shape[1], w = space.input_shape[2];
    int in_w = space.input_shape[0];
    int li = 0;
    if (space.has_stem()) {
        const int s = space.layers[0].stride;
        const int ho = conv_out(h, 3, s, 1), wo = conv_out(w, 3, s, 1);
        macs += int64_t(enc.choices[0]) * in_w * 9 * ho * wo;
        in_w = enc.choices[0];
        h = ho;
        w = wo;
        li = 1;
    }
    for (int b = 0; b < space.num_blocks(); ++b) {
        const int s = space.layers[size_t(li)].stride;
        const int w1 = enc.choices[size_t(li)], w2 = enc.choices[size_t(li) + 1];
        const int ho = conv_out(h, 3, s, 1), wo = conv_out(w, 3, s, 1);
        macs += int64_t(w1) * in_w * 9 * ho * wo;   // conv1
        macs += int64_t(w2) * w1 * 9 * ho * wo;     // conv2
        const int hp = conv_out(h, 1, s, 0), wp = conv_out(w, 1, s, 0);
        macs += int64_t(w2) * in_w * hp * wp;       // projection
        in_w = w2;
        h = ho;
        w = wo;
        li += 2;
    }
    macs += int64_t(in_w) * space.num_classes;
    return macs;
}

std::vector<SubnetEncoding> pick_encodings(const SearchSpace& space, int count, uint64_t seed) {
    if (count < 2) throw ValueError("encoding selection needs at least 2 candidates");
    Sampler sampler(space, seed);
    std::set<std::string> seen;
    std::vector<SubnetEncoding> pool;
    auto add = [&](const SubnetEncoding& e) {
        if (seen.insert(e.str()).second) pool.push_back(e);
    };
    add(all_min_encoding(space));
    add(all_max_encoding(space));
    const int target_pool = std::max(64, count * 50);
    for (int i = 0; i < target_pool * 4 && int(pool.size()) < target_pool; ++i) add(sampler.sample());

    std::sort(pool.begin(), pool.end(), [&](const SubnetEncoding& a, const SubnetEncoding& b) {
        const int64_t ma = mac_count(space, a), mb = mac_count(space, b);
        if (ma != mb) return ma < mb;
        return a.str() < b.str();
    });
    if (int(pool.size()) <= count) return pool;

    std::vector<SubnetEncoding> picked;
    std::set<size_t> used;
    for (int i = 0; i < count; ++i) {
        size_t idx = size_t(std::llround(double(i) * double(pool.size() - 1) / double(count - 1)));
        while (used.count(idx) && idx + 1 < pool.size()) ++idx;
        while (used.count(idx) && idx > 0) --idx;
        used.insert(idx);
        picked.push_back(pool[idx]);
    }
    std::sort(picked.begin(), picked.end(), [&](const SubnetEncoding& a, const SubnetEncoding& b) {
        return mac_count(space, a) < mac_count(space, b);
    });
    return picked;
}

std::vector<SubnetEncoding> read_encodings_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("encoding list not found: " + path);
    std::vector<SubnetEncoding> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        out.push_back(SubnetEncoding::parse(line));
    }
    if (out.empty()) throw ValueError("encoding list " + path + " is empty");
    return out;
}

void write_encodings_file(const std::string& path, const std::vector<SubnetEncoding>& encs) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write encoding list: " + path);
    for (const auto& e : encs) out << e.str() << "\n";
}

std::string stage_checkpoint_path(const std::string& outdir, int stage) {
    return outdir + "/stage" + std::to_string(stage) + ".ckpt";
}

namespace {

void write_metrics_line(std::ofstream& out, const IterRecord& r) {
    out << "{\"stage\":" << r.stage << ",\"phase\":\"" << r.phase << "\",\"iter\":" << r.iter
        << ",\"lr\":" << fmt_double(r.lr) << ",\"loss_largest\":" << fmt_double(r.loss_largest)
        << ",\"loss_sampled_mean\":" << fmt_double(r.loss_sampled_mean) << "}\n";
}

}  // namespace

StageArtifacts run_train_stage(const ExperimentConfig& cfg, int stage, const std::string& outdir,
                               const std::string& resume_path, int checkpoint_every) {
    if (stage < 1 || stage > int(cfg.stages.size()))
        throw ConfigError("stage " + std::to_string(stage) + " is not configured (config has " +
                          std::to_string(cfg.stages.size()) + " stages)");
    fs::create_directories(outdir);
    {
        std::ofstream echo(outdir + "/resolved_config.json", std::ios::trunc);
        echo << serialize_config(cfg);
    }
    const TrainConfig& tc = cfg.stages[size_t(stage - 1)];
    const DataBundle bundle = load_data(cfg);

    SupernetParams params;
    TrainerSnapshot snap;
    bool have_snapshot = false;
    std::vector<StageLr> history;

    if (!resume_path.empty()) {
        Checkpoint ck = load_checkpoint(resume_path);
        if (ck.params.stage != stage)
            throw ValueError("resume checkpoint is for stage " + std::to_string(ck.params.stage) +
                             ", requested stage " + std::to_string(stage));
        params = std::move(ck.params);
        history = ck.lr_history;
        if (!ck.trainer.velocities.empty() || ck.trainer.iteration > 0 || ck.trainer.warmup_done) {
            snap = std::move(ck.trainer);
            have_snapshot = true;
        }
    } else if (stage == 1) {
        params = init_supernet(enhanced_space(cfg), cfg.seed);
    } else {
        const std::string prev = stage_checkpoint_path(outdir, stage - 1);
        if (!fs::exists(prev))
            throw MissingArtifact("stage " + std::to_string(stage) + " needs the stage " +
                                  std::to_string(stage - 1) + " checkpoint at " + prev);
        Checkpoint ck = load_checkpoint(prev);
        if (!ck.stage_complete)
            throw MissingArtifact("checkpoint " + prev + " is not a completed stage");
        params = progressive_split(ck.params);
        history = ck.lr_history;
    }

    SupernetTrainer trainer(params, bundle, cfg.augment, tc, cfg.seed, stage);
    if (have_snapshot) trainer.restore(snap);

    StageArtifacts art;
    art.stage = stage;
    art.lr_init = tc.lr_init;
    art.checkpoint_path = stage_checkpoint_path(outdir, stage);
    art.metrics_path = outdir + "/metrics_stage" + std::to_string(stage) + ".jsonl";

    std::ofstream metrics(art.metrics_path, std::ios::trunc);
    if (!metrics) throw IoError("cannot write metrics log: " + art.metrics_path);

    append_lr(history, stage, tc.lr_init);
    auto make_ckpt = [&](bool complete) {
        Checkpoint ck;
        ck.params = params;
        ck.trainer = trainer.snapshot();
        ck.stage_complete = complete;
        ck.lr_init = tc.lr_init;
        ck.lr_history = history;
        ck.run_seed = cfg.seed;
        return ck;
    };

    trainer.run([&](const IterRecord& r) { write_metrics_line(metrics, r); },
                [&](int t) {
                    if (checkpoint_every > 0 && t % checkpoint_every == 0 && t < tc.iterations)
                        save_checkpoint(make_ckpt(false),
                                        outdir + "/stage" + std::to_string(stage) + "_iter" + std::to_string(t) +
                                            ".ckpt");
                });
    metrics.close();
    save_checkpoint(make_ckpt(true), art.checkpoint_path);
    return art;
}

std::vector<StageArtifacts> run_progressive_pipeline(const ExperimentConfig& cfg, const std::string& outdir) {
    std::vector<StageArtifacts> out;
    for (int stage = 1; stage <= int(cfg.stages.size()); ++stage)
        out.push_back(run_train_stage(cfg, stage, outdir));
    return out;
}

void run_split(const std::string& ckpt_in, const std::string& ckpt_out) {
    if (fs::weakly_canonical(ckpt_in) == fs::weakly_canonical(ckpt_out))
        throw ValueError("split: output path equals the input checkpoint");
    Checkpoint ck = load_checkpoint(ckpt_in);
    Checkpoint out;
    out.params = progressive_split(ck.params);
    out.stage_complete = false;
    out.lr_init = 0.0;
    out.lr_history = ck.lr_history;
    out.run_seed = ck.run_seed;
    save_checkpoint(out, ckpt_out);
}

std::vector<AccuracyRecord> run_eval_rank(const ExperimentConfig& cfg, const std::string& ckpt_path,
                                          const std::vector<SubnetEncoding>& encs, const std::string& out_csv) {
    const DataBundle bundle = load_data(cfg);
    Checkpoint ck = load_checkpoint(ckpt_path);
    std::vector<AccuracyRecord> records;
    for (const auto& enc : encs) {
        std::vector<BnStats> stats;
        const std::vector<BnStats>* stats_ptr = nullptr;
        if (cfg.eval.recalibrate) {
            stats = recalibrate_bn(ck.params, enc, bundle, cfg.eval.calib_batches, cfg.eval.batch_size);
            stats_ptr = &stats;
        }
        AccuracyRecord r;
        r.enc = enc;
        r.accuracy =
            eval_accuracy(ck.params, enc, bundle.val, bundle.mean, bundle.stddev, cfg.eval.batch_size, stats_ptr);
        r.source = "supernet";
        r.seed = ck.run_seed;
        records.push_back(std::move(r));
    }
    if (!out_csv.empty()) write_accuracy_csv(out_csv, records);
    return records;
}

std::vector<AccuracyRecord> run_standalone(const ExperimentConfig& cfg,
                                           const std::vector<SubnetEncoding>& encs, const std::string& out_csv) {
    const DataBundle bundle = load_data(cfg);
    const SearchSpace base = base_space(cfg);
    std::vector<AccuracyRecord> records;
    std::vector<std::string> failures;
    for (size_t i = 0; i < encs.size(); ++i) {
        const uint64_t seed = derive_seed(cfg.seed, "standalone", {uint64_t(i)});
        try {
            records.push_back(
                train_standalone(base, encs[i], bundle, standalone_policy(cfg), cfg.standalone, seed));
        } catch (const NumericError& e) {
            failures.push_back(encs[i].str() + ": " + e.what());
        }
    }
    if (!out_csv.empty()) write_accuracy_csv(out_csv, records);
    if (!failures.empty()) {
        std::string msg = "stand-alone training diverged for:";
        for (const auto& f : failures) msg += "\n  " + f;
        throw NumericError(msg);
    }
    return records;
}

RankReport run_report(const std::string& supernet_csv, const std::string& standalone_csv,
                      const std::string& outdir) {
    auto records = read_accuracy_csv(supernet_csv);
    const auto ground = read_accuracy_csv(standalone_csv);
    records.insert(records.end(), ground.begin(), ground.end());
    const RankReport rep = rank_correlations(records);
    fs::create_directories(outdir);
    write_report_json(outdir + "/rank_report.json", rep);
    write_scatter_csv(outdir + "/scatter.csv", rep);
    return rep;
}

std::vector<SubnetEncoding> resolve_eval_encodings(const ExperimentConfig& cfg) {
    const SearchSpace base = base_space(cfg);
    std::vector<SubnetEncoding> encs;
    if (!cfg.eval.encodings_path.empty())
        encs = read_encodings_file(cfg.eval.encodings_path);
    else
        encs = pick_encodings(base, cfg.eval.auto_count, derive_seed(cfg.seed, "encodings"));
    for (const auto& e : encs) validate_encoding(base, e);
    return encs;
}

double median(std::vector<double> xs) {
    if (xs.empty()) throw ValueError("median of empty list");
    std::sort(xs.begin(), xs.end());
    const size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

AblateResult run_ablate(const ExperimentConfig& cfg, const std::string& outdir, int n_seeds) {
    if (n_seeds < 1) throw ValueError("ablate needs at least one seed");
    fs::create_directories(outdir);

    // Pin the dataset before per-run seeds start varying.
    ExperimentConfig pinned = cfg;
    if (pinned.dataset.kind == "synthetic" && pinned.dataset.seed == 0)
        pinned.dataset.seed = derive_seed(cfg.seed, "dataset");

    const auto encs = resolve_eval_encodings(pinned);
    write_encodings_file(outdir + "/encodings.txt", encs);

    const std::string standalone_csv = outdir + "/standalone_acc.csv";
    const auto ground = run_standalone(pinned, encs, standalone_csv);

    struct Variant {
        const char* tag;
        const char* column;
        EnhancementMap map;
    };
    const Variant variants[] = {
        {"base", "base", {false, false}},
        {"prelu_oe", "prelu+oe", {true, true}},
    };

    AblateResult result;
    const std::string model_base = base_space(cfg).name;
    for (int seed_index = 0; seed_index < n_seeds; ++seed_index) {
        for (const auto& variant : variants) {
            ExperimentConfig run_cfg = pinned;
            run_cfg.enhance = variant.map;
            run_cfg.seed = derive_seed(cfg.seed, "supernet-run", {uint64_t(seed_index)});
            const std::string run_dir =
                outdir + "/" + variant.tag + "_seed" + std::to_string(seed_index);
            run_cfg.output_dir = run_dir;
            for (int stage = 1; stage <= int(run_cfg.stages.size()); ++stage) {
                run_train_stage(run_cfg, stage, run_dir);
                const std::string acc_csv = run_dir + "/supernet_acc_stage" + std::to_string(stage) + ".csv";
                auto records = run_eval_rank(run_cfg, stage_checkpoint_path(run_dir, stage), encs, acc_csv);
                records.insert(records.end(), ground.begin(), ground.end());
                const RankReport rep = rank_correlations(records);
                AblateCell cell;
                cell.model = model_base + (std::string(variant.tag) == "base" ? "" : "_prelu_oe");
                cell.variant = variant.column;
                cell.stage = stage;
                cell.seed_index = seed_index;
                cell.pearson_abs = rep.pearson_abs;
                result.cells.push_back(cell);
            }
        }
    }

    for (const auto& variant : variants) {
        const int n_stages = int(cfg.stages.size());
        for (int stage = 1; stage <= n_stages; ++stage) {
            std::vector<double> vals;
            for (const auto& c : result.cells)
                if (c.variant == variant.column && c.stage == stage) vals.push_back(c.pearson_abs);
            AblateCell cell;
            cell.model = model_base + (std::string(variant.tag) == "base" ? "" : "_prelu_oe");
            cell.variant = variant.column;
            cell.stage = stage;
            cell.seed_index = -1;
            cell.pearson_abs = median(vals);
            result.medians.push_back(cell);
        }
    }

    result.table_path = outdir + "/ablate_table.csv";
    {
        std::ofstream out(result.table_path, std::ios::trunc);
        out << "model,supernet,stage,seed,pearson_abs\n";
        for (const auto& c : result.cells)
            out << c.model << "," << c.variant << "," << c.stage << "," << c.seed_index << ","
                << fmt_double(c.pearson_abs) << "\n";
    }
    result.medians_path = outdir + "/ablate_medians.csv";
    {
        // Same four columns as the per-seed table minus the seed: the
        // median-over-seeds summary row per (variant, stage).
        std::ofstream out(result.medians_path, std::ios::trunc);
        out << "model,supernet,stage,pearson_abs\n";
        for (const auto& c : result.medians)
            out << c.model << "," << c.variant << "," << c.stage << "," << fmt_double(c.pearson_abs) << "\n";
    }
    return result;
}

}  // namespace supernas
