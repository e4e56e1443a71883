// SPDX-License-Identifier: Apache-2.0
#include "supernas/rng.hpp"

#include <cmath>

#include "supernas/common.hpp"

namespace supernas {

namespace {

uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : state_.s) s = splitmix64(x);
}

uint64_t Rng::next_u64() {
    auto& s = state_.s;
    const uint64_t result = rotl(s[0] + s[3], 23) + s[0];
    const uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double a, double b) {
    return a + (b - a) * uniform01();
}

int Rng::uniform_int(int n) {
    if (n <= 0) throw ValueError("uniform_int: n must be positive");
    // Lemire's multiply-then-reject method.
    const uint64_t bound = static_cast<uint64_t>(n);
    uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < bound) {
        const uint64_t threshold = (0 - bound) % bound;
        while (lo < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * bound;
            lo = static_cast<uint64_t>(m);
        }
    }
    return static_cast<int>(m >> 64);
}

double Rng::normal() {
    if (state_.has_gauss) {
        state_.has_gauss = false;
        return state_.gauss;
    }
    double u1 = 0.0;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    state_.gauss = r * std::sin(theta);
    state_.has_gauss = true;
    return r * std::cos(theta);
}

uint64_t derive_seed(uint64_t root, std::string_view tag, std::initializer_list<uint64_t> indices) {
    uint64_t h = mix64(root ^ 0x6a09e667f3bcc908ULL);
    for (char c : tag) h = mix64(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
    for (uint64_t idx : indices) h = mix64(h ^ idx);
    return h;
}

}  // namespace supernas
