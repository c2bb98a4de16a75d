#include "oac/numeral_codec.hpp"
#include "oac/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace oac;

namespace {

std::vector<int> numerals(const NumeralSequence &s) { return {s.msb_first().begin(), s.msb_first().end()}; }

const BalancedConfig example{5, 3, 1.0};

} // namespace

TEST(Codec, EncodeWorkedExamples) {
    EXPECT_EQ(numerals(encode(example, 0.28)), (std::vector<int>{1, -2, 2}));
    EXPECT_EQ(numerals(encode(example, -0.86)), (std::vector<int>{-2, -1, 2}));
    EXPECT_EQ(numerals(encode(example, 0.0)), (std::vector<int>{0, 0, 0}));
    EXPECT_EQ(numerals(encode(example, 1.0)), (std::vector<int>{2, 2, 2}));
    EXPECT_EQ(numerals(encode(example, -1.0)), (std::vector<int>{-2, -2, -2}));
}

TEST(Codec, DecodeWorkedExamples) {
    EXPECT_EQ(decode(example, std::vector<double>{1, -2, 2}), 17.0 / 62.0);
    EXPECT_EQ(decode(example, std::vector<double>{-2, -1, 2}), -53.0 / 62.0);
    EXPECT_EQ(decode(example, std::vector<double>{-0.5, -1.5, 2}), -18.0 / 62.0);
    EXPECT_EQ(decode(example, std::vector<double>{0, 0, 0}), 0.0);
    EXPECT_NEAR(decode(example, std::vector<double>{1, -2, 2}), 0.2742, 1e-4);
    EXPECT_NEAR(decode(example, std::vector<double>{-0.5, -1.5, 2}), -0.2903, 1e-4);
}

TEST(Codec, StepSizeExamples) {
    EXPECT_EQ(step_size(example), 2.0 / 124.0);
    EXPECT_EQ(step_size(BalancedConfig(3, 1, 1.0)), 1.0);
    EXPECT_DOUBLE_EQ(step_size(BalancedConfig(7, 2, 0.5)), 1.0 / 48.0);
    EXPECT_EQ(example.bias(), 62);
}

TEST(Codec, SymbolIndexExamples) {
    EXPECT_EQ(symbol_of_index(5, 0), 1);
    EXPECT_EQ(symbol_of_index(5, 1), -1);
    EXPECT_EQ(symbol_of_index(5, 4), 0);
    EXPECT_EQ(index_of_symbol(5, 1), 0);
    EXPECT_EQ(index_of_symbol(5, -2), 3);
    EXPECT_EQ(index_of_symbol(7, 0), 6);
    const SymbolSet s(5);
    EXPECT_EQ(std::vector<int>(s.symbols().begin(), s.symbols().end()), (std::vector<int>{1, -1, 2, -2, 0}));
    EXPECT_EQ(s.nonzero_symbols().size(), 4u);
}

TEST(Codec, SymbolIndexIsBijection) {
    for (int base : {3, 5, 7, 9, 11}) {
        std::set<int> seen;
        for (int j = 0; j < base; ++j) {
            const int x = symbol_of_index(base, j);
            EXPECT_LE(std::abs(x), (base - 1) / 2);
            EXPECT_EQ(index_of_symbol(base, x), j);
            seen.insert(x);
        }
        EXPECT_EQ(static_cast<int>(seen.size()), base);
    }
}

TEST(Codec, AverageNumeralsExamples) {
    const std::vector<NumeralSequence> ex3{encode(example, 0.28), encode(example, -0.86)};
    EXPECT_EQ(average_numerals(ex3), (std::vector<double>{-0.5, -1.5, 2.0}));
    EXPECT_EQ(decode(example, average_numerals(ex3)), -18.0 / 62.0);

    const std::vector<NumeralSequence> one{encode(example, 0.28)};
    EXPECT_EQ(average_numerals(one), (std::vector<double>{1, -2, 2}));

    const std::vector<NumeralSequence> three{NumeralSequence(5, {1, 0}), NumeralSequence(5, {-1, 0}),
                                             NumeralSequence(5, {0, 0})};
    EXPECT_EQ(average_numerals(three), (std::vector<double>{0, 0}));
}

TEST(Codec, RejectsInvalidConfigs) {
    try {
        BalancedConfig(4, 2, 1.0);
        FAIL() << "even base accepted";
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
        EXPECT_NE(std::string(e.what()).find("base must be odd"), std::string::npos);
    }
    EXPECT_THROW(BalancedConfig(1, 2, 1.0), Error);
    EXPECT_THROW(BalancedConfig(5, 0, 1.0), Error);
    EXPECT_THROW(BalancedConfig(5, 2, 0.0), Error);
    EXPECT_THROW(BalancedConfig(5, 2, -1.0), Error);
    EXPECT_THROW(BalancedConfig(5, 40, 1.0), Error);
}

TEST(Codec, RejectsBadInputs) {
    EXPECT_THROW(encode(example, std::nan("")), Error);
    EXPECT_THROW(decode(example, std::vector<double>{1, 2}), Error);
    EXPECT_THROW(NumeralSequence(5, {3}), Error);
    EXPECT_THROW(symbol_of_index(5, 5), Error);
    EXPECT_THROW(index_of_symbol(5, 3), Error);
    EXPECT_THROW(average_numerals(std::vector<NumeralSequence>{}), Error);
}

TEST(Codec, ClipsOutOfRangeValues) {
    EXPECT_EQ(numerals(encode(example, 7.5)), (std::vector<int>{2, 2, 2}));
    EXPECT_EQ(numerals(encode(example, -7.5)), (std::vector<int>{-2, -2, -2}));
    EXPECT_EQ(quantize(example, 3.0), 1.0);
}

// |decode(encode(v)) - v| <= Delta/2 whenever |v| <= v_max - Delta/2.
TEST(CodecProperty, RoundTripWithinHalfStep) {
    KeyedStream rng(2024, StreamRole::data, {});
    const int bases[] = {3, 5, 7, 9};
    for (int n = 0; n < 100000; ++n) {
        const int base = bases[rng.below(4)];
        const int digits = 1 + static_cast<int>(rng.below(5));
        const double v_max = std::exp(rng.uniform(-3.0, 3.0));
        const BalancedConfig cfg(base, digits, v_max);
        const double half = cfg.step() / 2.0;
        const double v = rng.uniform(-(v_max - half), v_max - half);
        const double r = decode(cfg, encode(cfg, v));
        ASSERT_LE(std::abs(r - v), half * (1.0 + 1e-9)) << "base " << base << " digits " << digits << " v " << v;
    }
}

// decode(mean of numerals) == mean of decodes, exactly in rationals.
TEST(CodecProperty, AveragingIdentity) {
    KeyedStream rng(77, StreamRole::data, {});
    for (int n = 0; n < 2000; ++n) {
        const BalancedConfig cfg(3 + 2 * static_cast<int>(rng.below(4)), 1 + static_cast<int>(rng.below(4)), 1.0);
        const int k = 1 + static_cast<int>(rng.below(30));
        std::vector<NumeralSequence> seqs;
        double mean = 0.0;
        for (int i = 0; i < k; ++i) {
            seqs.push_back(encode(cfg, rng.uniform(-1.0, 1.0)));
            mean += decode(cfg, seqs.back());
        }
        mean /= k;
        ASSERT_NEAR(decode(cfg, average_numerals(seqs)), mean, 1e-12);
    }
}

TEST(CodecProperty, EncodingIsMonotone) {
    for (int base : {3, 5, 7}) {
        for (int digits : {1, 2, 3}) {
            const BalancedConfig cfg(base, digits, 1.0);
            double prev = -2.0;
            std::int64_t prev_level = -1;
            for (int i = -1100; i <= 1100; ++i) {
                const double v = i / 1000.0;
                const double q = quantize(cfg, v);
                const auto level = quantization_level(cfg, v);
                ASSERT_GE(q, prev);
                ASSERT_GE(level, prev_level);
                ASSERT_GE(level, 0);
                ASSERT_LT(level, cfg.levels());
                ASSERT_EQ(decode(cfg, encode(cfg, v)), q);
                prev = q;
                prev_level = level;
            }
        }
    }
}

TEST(CodecProperty, EveryLevelRoundTrips) {
    const BalancedConfig cfg(5, 3, 1.0);
    for (std::int64_t level = 0; level < cfg.levels(); ++level) {
        const double v = cfg.v_max() * static_cast<double>(level - cfg.bias()) / static_cast<double>(cfg.bias());
        ASSERT_EQ(quantization_level(cfg, v), level);
        ASSERT_NEAR(decode(cfg, encode(cfg, v)), v, 1e-15);
    }
}

TEST(CodecProperty, ZeroIsAReconstructionLevel) {
    for (int base : {3, 5, 7, 9}) {
        for (int digits = 1; digits <= 5; ++digits) {
            EXPECT_EQ(quantize(BalancedConfig(base, digits, 0.3), 0.0), 0.0);
        }
    }
}
