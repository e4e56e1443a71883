// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "supernas/supernet.hpp"
#include "supernas/training.hpp"

namespace supernas {

struct StageLr {
    int stage = 0;
    double lr_init = 0.0;
};

/// Everything needed to resume training bit-exactly: parameters, optimizer
/// velocities, rng states, and data-iterator position. Serialized little
/// endian with a CRC32 trailer; version mismatches and corruption are
/// refused at load.
struct Checkpoint {
    SupernetParams params;
    TrainerSnapshot trainer;
    bool stage_complete = false;
    double lr_init = 0.0;                // of the stage that produced this
    std::vector<StageLr> lr_history;     // lr of every completed stage so far
    uint64_t run_seed = 0;

    static constexpr uint32_t kVersion = 1;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

uint32_t crc32(const unsigned char* data, size_t len);

}  // namespace supernas
