// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "supernas/data.hpp"
#include "supernas/supernet.hpp"
#include "supernas/training.hpp"

namespace supernas {

struct AccuracyRecord {
    SubnetEncoding enc;
    double accuracy = 0.0;
    std::string source;  // "supernet" or "standalone"
    uint64_t seed = 0;
};

/// Exact per-channel statistics for every batchnorm along enc's path,
/// collected over the calibration batches. Weights are untouched; the result
/// is a private overlay consumed by eval-mode forwards.
std::vector<BnStats> recalibrate_bn(SupernetParams& params, const SubnetEncoding& enc, const DataBundle& data,
                                    int calib_batches, int batch_size);

/// Top-1 accuracy over a split, eval-mode batchnorm (optionally overridden
/// by recalibrated stats).
double eval_accuracy(SupernetParams& params, const SubnetEncoding& enc, const Dataset& split,
                     const std::vector<double>& mean, const std::vector<double>& stddev, int batch_size,
                     const std::vector<BnStats>* bn_override = nullptr);

std::vector<int> predict_classes(SupernetParams& params, const SubnetEncoding& enc, const Dataset& split,
                                 const std::vector<double>& mean, const std::vector<double>& stddev,
                                 int batch_size, const std::vector<BnStats>* bn_override = nullptr);

struct StandaloneConfig {
    int iterations = 400;
    int batch_size = 32;
    double lr_init = 0.05;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    Activation activation = Activation::relu;
    bool augment = true;
    int eval_batch_size = 256;
};

/// Trains enc from scratch as a dense network at its original (non-proxy)
/// widths and returns the validation accuracy. Deterministic per seed.
AccuracyRecord train_standalone(const SearchSpace& base_space, const SubnetEncoding& enc,
                                const DataBundle& data, const AugmentPolicy& policy,
                                const StandaloneConfig& cfg, uint64_t seed);

// Correlation statistics (64-bit, two-pass mean subtraction for Pearson).
double pearson(std::span<const double> xs, std::span<const double> ys);
std::vector<double> average_ranks(std::span<const double> xs);
double spearman(std::span<const double> xs, std::span<const double> ys);
double kendall_tau_b(std::span<const double> xs, std::span<const double> ys);

struct RankPair {
    SubnetEncoding enc;
    double standalone_acc = 0.0;
    double supernet_acc = 0.0;
};

struct RankReport {
    std::vector<RankPair> pairs;  // sorted by encoding text
    int n = 0;
    double pearson_abs = 0.0;
    double spearman = 0.0;
    double kendall_tau = 0.0;
};

/// Pairs supernet/standalone records by encoding and computes the ranking
/// coefficients. Unpaired encodings are an error listing the orphans.
RankReport rank_correlations(const std::vector<AccuracyRecord>& records);

// Delimited-text round trip: header "encoding,source,seed,accuracy".
void write_accuracy_csv(const std::string& path, const std::vector<AccuracyRecord>& records);
std::vector<AccuracyRecord> read_accuracy_csv(const std::string& path);
void append_accuracy_csv(const std::string& path, const std::vector<AccuracyRecord>& records);

void write_report_json(const std::string& path, const RankReport& report);
void write_scatter_csv(const std::string& path, const RankReport& report);

}  // namespace supernas
