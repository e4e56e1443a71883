// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace supernas {

/// xoshiro256++ generator with explicit state so streams serialize into
/// checkpoints. All distributions are implemented here rather than via
/// <random> so sequences do not depend on the standard library build.
class Rng {
  public:
    struct State {
        std::array<uint64_t, 4> s{};
        bool has_gauss = false;
        double gauss = 0.0;
    };

    explicit Rng(uint64_t seed);
    explicit Rng(const State& state) : state_(state) {}

    uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform01();
    /// Uniform double in [a, b).
    double uniform(double a, double b);
    /// Unbiased uniform integer in [0, n). n must be positive.
    int uniform_int(int n);
    /// Standard normal via Box-Muller (caches the spare draw).
    double normal();

    const State& state() const { return state_; }
    void set_state(const State& st) { state_ = st; }

  private:
    State state_;
};

/// Deterministic named-substream derivation: hashes (root, tag, indices) into
/// a fresh seed so every component of a run draws from an independent stream.
uint64_t derive_seed(uint64_t root, std::string_view tag, std::initializer_list<uint64_t> indices = {});

}  // namespace supernas
