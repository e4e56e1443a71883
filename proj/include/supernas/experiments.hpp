// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "supernas/checkpoint.hpp"
#include "supernas/config.hpp"
#include "supernas/evaluation.hpp"

namespace supernas {

/// Multiply-accumulate count of one candidate; the capacity proxy used for
/// stratified encoding selection.
int64_t mac_count(const SearchSpace& space, const SubnetEncoding& enc);

/// Deterministic capacity-stratified pick of distinct encodings (always
/// includes the all-min and all-max candidates).
std::vector<SubnetEncoding> pick_encodings(const SearchSpace& space, int count, uint64_t seed);

std::vector<SubnetEncoding> read_encodings_file(const std::string& path);
void write_encodings_file(const std::string& path, const std::vector<SubnetEncoding>& encs);

std::string stage_checkpoint_path(const std::string& outdir, int stage);

struct StageArtifacts {
    int stage = 0;
    std::string checkpoint_path;
    std::string metrics_path;
    double lr_init = 0.0;
};

/// Runs warm-up plus sampled-distillation training for one stage. Stages
/// beyond the first load the previous stage's checkpoint and apply the
/// progressive split before fine-tuning. `resume_path` continues a partial
/// stage checkpoint; `checkpoint_every` emits stageN_iter{t}.ckpt snapshots.
StageArtifacts run_train_stage(const ExperimentConfig& cfg, int stage, const std::string& outdir,
                               const std::string& resume_path = "", int checkpoint_every = 0);

/// Runs every configured stage in order; returns one artifact per stage.
std::vector<StageArtifacts> run_progressive_pipeline(const ExperimentConfig& cfg, const std::string& outdir);

/// Pure checkpoint transform: duplicate weights into the next stage's branch
/// groups without training.
void run_split(const std::string& ckpt_in, const std::string& ckpt_out);

std::vector<AccuracyRecord> run_eval_rank(const ExperimentConfig& cfg, const std::string& ckpt_path,
                                          const std::vector<SubnetEncoding>& encs, const std::string& out_csv);

std::vector<AccuracyRecord> run_standalone(const ExperimentConfig& cfg,
                                           const std::vector<SubnetEncoding>& encs, const std::string& out_csv);

RankReport run_report(const std::string& supernet_csv, const std::string& standalone_csv,
                      const std::string& outdir);

std::vector<SubnetEncoding> resolve_eval_encodings(const ExperimentConfig& cfg);

struct AblateCell {
    std::string model;
    std::string variant;  // "base" or "prelu+oe"
    int stage = 0;
    int seed_index = 0;  // -1 in median rows
    double pearson_abs = 0.0;
};

struct AblateResult {
    std::vector<AblateCell> cells;
    std::vector<AblateCell> medians;  // per (variant, stage)
    std::string table_path;
    std::string medians_path;
};

/// The 2x3 grid (base vs PReLU+OE, stages 1..3) over n_seeds supernet seeds
/// against one shared stand-alone ground-truth table.
AblateResult run_ablate(const ExperimentConfig& cfg, const std::string& outdir, int n_seeds);

double median(std::vector<double> xs);

}  // namespace supernas
