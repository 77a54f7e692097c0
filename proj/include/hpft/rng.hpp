// SPDX-License-Identifier: Apache-2.0
#pragma once

// Deterministic random numbers. The generator is SplitMix64 (Steele, Lea &
// Flood 2014) with its published constants:
//
//   state += 0x9E3779B97F4A7C15                        (golden-ratio step)
//   z = state
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//   output = z ^ (z >> 31)
//
// Uniform doubles take the top 53 bits (u64 >> 11) * 2^-53, giving [0, 1).
// Normals use the Marsaglia polar method (rejection), so one seed always
// yields one exact draw sequence. Integer and uniform draws are bit-exact on
// any platform; normal draws additionally go through std::log/std::sqrt and
// so are bit-exact per toolchain (libm implementations may differ in the
// last ulp across platforms).

#include <cstdint>
#include <vector>

#include "hpft/errors.hpp"

namespace hpft {

struct RngState {
    uint64_t state = 0;
    // pending second normal from the polar method
    double cached_normal = 0.0;
    bool has_cached_normal = false;

    RngState() = default;
    explicit RngState(uint64_t seed) : state(seed) {}

    uint64_t next_u64() {
        state += 0x9E3779B97F4A7C15ULL;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform on [0, 1)
    double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal (Marsaglia polar)
    double next_normal();

    // uniform integer in [0, n), unbiased via rejection
    int next_below(int n);

    // Derive an independent child stream; advances this stream by one draw.
    RngState fork() { return RngState(next_u64()); }
};

// Fisher-Yates shuffle of {0, .., n-1}; the canonical deterministic ordering
// used for mini-batch sampling and subset selection.
void shuffled_indices(int n, RngState& rng, std::vector<int>& out);

}  // namespace hpft
