#include "oac/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

using oac::KeyedStream;
using oac::StreamRole;

TEST(Rng, SameKeySameSequence) {
    KeyedStream a(42, StreamRole::noise, {3, 7});
    KeyedStream b(42, StreamRole::noise, {3, 7});
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a(), b());
    }
}

TEST(Rng, KeysSeparateRolesIndicesAndOrder) {
    std::set<std::uint64_t> keys;
    for (std::uint64_t seed : {0ULL, 1ULL, 2ULL}) {
        for (std::uint64_t i = 0; i < 50; ++i) {
            for (std::uint64_t j = 0; j < 50; ++j) {
                keys.insert(oac::derive_key(seed, {i, j}));
            }
        }
    }
    EXPECT_EQ(keys.size(), 3u * 50u * 50u);
    EXPECT_NE(oac::derive_key(1, {2, 3}), oac::derive_key(1, {3, 2}));
    // An index equal to the seed must not erase the seed.
    EXPECT_NE(oac::derive_key(4, {4, 0}), oac::derive_key(5, {5, 0}));
    EXPECT_NE(KeyedStream(1, StreamRole::noise, {0})(), KeyedStream(1, StreamRole::phase, {0})());
}

TEST(Rng, UniformIsOpenUnitInterval) {
    KeyedStream s(7, StreamRole::data, {});
    double sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        ASSERT_GT(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
}

TEST(Rng, NormalMoments) {
    KeyedStream s(11, StreamRole::noise, {1});
    const int n = 400000;
    double m1 = 0.0;
    double m2 = 0.0;
    double m4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = s.normal();
        m1 += z;
        m2 += z * z;
        m4 += z * z * z * z;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    EXPECT_NEAR(m1, 0.0, 5.0 / std::sqrt(n));
    EXPECT_NEAR(m2, 1.0, 5.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(m4, 3.0, 5.0 * std::sqrt(96.0 / n));
}

TEST(Rng, ComplexNormalVarianceSplitsEvenly) {
    KeyedStream s(5, StreamRole::channel, {});
    const int n = 200000;
    double re2 = 0.0;
    double im2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto z = s.complex_normal(4.0);
        re2 += z.real() * z.real();
        im2 += z.imag() * z.imag();
    }
    EXPECT_NEAR(re2 / n, 2.0, 0.03);
    EXPECT_NEAR(im2 / n, 2.0, 0.03);
}

TEST(Rng, UnitPhaseHasUnitModulus) {
    KeyedStream s(9, StreamRole::phase, {});
    for (int i = 0; i < 1000; ++i) {
        EXPECT_NEAR(std::abs(s.unit_phase()), 1.0, 1e-12);
    }
}

TEST(Rng, BelowCoversRangeUniformly) {
    KeyedStream s(3, StreamRole::batch, {});
    std::vector<int> counts(7, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = s.below(7);
        ASSERT_LT(v, 7u);
        ++counts[v];
    }
    for (int c : counts) {
        EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
    }
}
