// SPDX-License-Identifier: Apache-2.0
#include "hpft/rng.hpp"

#include <cmath>
#include <vector>

namespace hpft {

double RngState::next_normal() {
    if (has_cached_normal) {
        has_cached_normal = false;
        return cached_normal;
    }
    // Marsaglia polar method: draw (u, v) in the unit disk, excluding 0.
    double u, v, s;
    do {
        u = 2.0 * next_uniform() - 1.0;
        v = 2.0 * next_uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    cached_normal = v * m;
    has_cached_normal = true;
    return u * m;
}

int RngState::next_below(int n) {
    require(n > 0, "RngState::next_below: n must be positive");
    const uint64_t un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - (UINT64_MAX % un);
    uint64_t u;
    do {
        u = next_u64();
    } while (u >= limit);
    return static_cast<int>(u % un);
}

void shuffled_indices(int n, RngState& rng, std::vector<int>& out) {
    out.resize(n);
    for (int i = 0; i < n; ++i) out[i] = i;
    for (int i = n - 1; i > 0; --i) {
        const int j = rng.next_below(i + 1);
        std::swap(out[i], out[j]);
    }
}

}  // namespace hpft
