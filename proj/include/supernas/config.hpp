// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "supernas/data.hpp"
#include "supernas/evaluation.hpp"
#include "supernas/search_space.hpp"
#include "supernas/training.hpp"

namespace supernas {

struct EvalConfig {
    bool recalibrate = true;
    int calib_batches = 20;
    int batch_size = 256;
    std::string encodings_path;  // optional explicit list
    int auto_count = 24;         // used when no explicit list is given
};

struct DatasetConfig {
    std::string kind = "synthetic";  // or "cifar10" / "cifar100"
    int n_per_class = 200;
    int classes = 10;
    std::array<int, 3> shape{3, 12, 12};
    uint64_t seed = 0;  // 0: derived from the run seed
    std::string dir;    // cifar binaries
    int calib_count = 512;
    std::string cache_path;
};

struct ExperimentConfig {
    uint64_t seed = 1;
    std::string output_dir = "out";
    std::string space_preset = "toy6";  // "toy6", "resnet20", or "custom"
    SpaceConfig space;                  // used when preset == "custom"
    EnhancementMap enhance{false, false};
    AugmentPolicy augment;
    std::vector<TrainConfig> stages;  // 1..3 entries
    EvalConfig eval;
    StandaloneConfig standalone;
    DatasetConfig dataset;
};

ExperimentConfig default_toy_config();

/// Parses and fully validates a config file; unknown keys are rejected with
/// the path to the offending key, defaults are filled in.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// Serialized form with every default resolved; parse(serialize(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// The candidate space in its original form (no enhancement applied).
SearchSpace base_space(const ExperimentConfig& cfg);
/// The space the supernet trains on (enhancement flags applied).
SearchSpace enhanced_space(const ExperimentConfig& cfg);

DataBundle load_data(const ExperimentConfig& cfg);

}  // namespace supernas
