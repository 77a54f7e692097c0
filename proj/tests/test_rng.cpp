// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "hpft/rng.hpp"

using namespace hpft;

TEST_CASE("SplitMix64 reproduces the published reference outputs") {
    // Reference sequence computed independently from the published constants.
    RngState r0(0);
    CHECK(r0.next_u64() == 0xe220a8397b1dcdafULL);
    CHECK(r0.next_u64() == 0x6e789e6aa1b965f4ULL);
    CHECK(r0.next_u64() == 0x06c45d188009454fULL);

    RngState r1(1234567);
    CHECK(r1.next_u64() == 0x599ed017fb08fc85ULL);
    CHECK(r1.next_u64() == 0x2c73f08458540fa5ULL);
    CHECK(r1.next_u64() == 0x883ebce5a3f27c77ULL);
}

TEST_CASE("uniform doubles take the top 53 bits") {
    RngState r(42);
    CHECK(r.next_uniform() == doctest::Approx(0.7415648787718233).epsilon(1e-15));
    RngState r2(42);
    const double expected = (r2.next_u64() >> 11) * 0x1.0p-53;
    RngState r3(42);
    CHECK(r3.next_uniform() == expected);
}

TEST_CASE("identical seeds give identical streams; different seeds differ") {
    RngState a(99), b(99), c(100);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        const uint64_t va = a.next_u64();
        all_equal = all_equal && (va == b.next_u64());
        any_diff = any_diff || (va != c.next_u64());
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("uniform moments over a large sample") {
    RngState r(7);
    const int n = 200000;
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = r.next_uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        mean += u;
        m2 += u * u;
    }
    mean /= n;
    const double var = m2 / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.02));
}

TEST_CASE("normal moments and pair-caching determinism") {
    RngState r(13);
    const int n = 200000;
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = r.next_normal();
        mean += g;
        m2 += g * g;
    }
    mean /= n;
    CHECK(std::fabs(mean) < 0.01);
    CHECK(m2 / n == doctest::Approx(1.0).epsilon(0.02));

    // drawing an odd count then continuing matches one uninterrupted stream
    RngState s1(77), s2(77);
    double last1 = 0.0;
    for (int i = 0; i < 7; ++i) last1 = s1.next_normal();
    double last2 = 0.0;
    for (int i = 0; i < 7; ++i) last2 = s2.next_normal();
    CHECK(last1 == last2);
    CHECK(s1.next_normal() == s2.next_normal());
}

TEST_CASE("next_below covers its range uniformly enough") {
    RngState r(5);
    std::set<uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const uint64_t v = r.next_below(7);
        CHECK(v < 7);
        seen.insert(v);
    }
    CHECK(seen.size() == 7);
}

TEST_CASE("fork advances the parent and yields an uncorrelated child") {
    RngState parent(31);
    const uint64_t before = parent.state;
    RngState child = parent.fork();
    CHECK(parent.state != before);  // forking consumed parent entropy
    bool differs = false;
    RngState parent_copy = parent;
    for (int i = 0; i < 32; ++i)
        differs = differs || (child.next_u64() != parent_copy.next_u64());
    CHECK(differs);
}

TEST_CASE("shuffled_indices is a deterministic permutation") {
    RngState r(91);
    std::vector<int> a;
    shuffled_indices(50, r, a);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> iota(50);
    std::iota(iota.begin(), iota.end(), 0);
    CHECK(sorted == iota);

    RngState r2(91);
    std::vector<int> b;
    shuffled_indices(50, r2, b);
    CHECK(a == b);

    RngState r3(92);
    std::vector<int> c;
    shuffled_indices(50, r3, c);
    CHECK(a != c);
}
