#include "oac/analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace oac;

namespace {

const BalancedConfig example{5, 3, 1.0};
const std::vector<double> example_gradients{0.28, -0.86};

// Independent oracle: the double sum written out with an explicit symbol table.
double brute_force_variance(int base, int digits, double v_max, const std::vector<double> &gradients, int r,
                            double noise) {
    const std::vector<int> table = base == 5 ? std::vector<int>{1, -1, 2, -2} : std::vector<int>{1, -1};
    const double es = base - 1;
    const double xi = (std::pow(base, digits) - 1) / 2;
    const double k = static_cast<double>(gradients.size());
    double total = 0.0;
    for (int i = 0; i < digits; ++i) {
        for (std::size_t l = 0; l < table.size(); ++l) {
            int votes = 0;
            for (double g : gradients) {
                const auto seq = encode(BalancedConfig(base, digits, v_max), g);
                votes += seq.at_position(i) == table[l];
            }
            const double t = votes + noise / es;
            total += table[l] * table[l] * t * t * std::pow(base, 2 * i);
        }
    }
    return v_max * v_max / (xi * xi * r * k * k) * total;
}

MonteCarloConfig mc_config(const BalancedConfig &codec, std::vector<double> gradients, int r, double noise,
                           std::int64_t trials) {
    MonteCarloConfig mc;
    mc.codec = codec;
    mc.channel.devices = static_cast<int>(gradients.size());
    mc.channel.antennas = r;
    mc.channel.noise_var = noise;
    mc.channel.sync = {default_t_sync(1200, 15e3), 3.0, 2048, 30.72e6};
    mc.gradients = std::move(gradients);
    mc.trials = trials;
    mc.seed = 2025;
    return mc;
}

} // namespace

TEST(Theory, VoteVarianceExamples) {
    EXPECT_NEAR(var_vote(2.0, 0.01, 4.0, 25), 0.160400, 1e-6);
    EXPECT_EQ(var_vote(0.0, 0.0, 4.0, 7), 0.0);
    EXPECT_DOUBLE_EQ(var_vote(3.0, 0.2, 4.0, 16), var_vote(3.0, 0.2, 4.0, 8) / 2.0);
}

TEST(Theory, GradientVarianceTrivialCases) {
    TheoryInputs in{example, 4, 3, 0.0, 4.0, {{0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}, {}};
    EXPECT_EQ(var_gradient_estimate(in), 0.0);

    // D = 1 and one active symbol: the sums collapse to a single term.
    const BalancedConfig one(5, 1, 0.5);
    TheoryInputs single{one, 8, 3, 0.04, 4.0, {{0, 0, 3, 0}}, {}};
    const double t = 3 + 0.04 / 4.0;
    const double nonzero_floor = 0.01 * 0.01 * (1 + 1 + 4);
    EXPECT_NEAR(var_gradient_estimate(single), 0.25 / (4.0 * 8 * 9) * (4 * t * t + nonzero_floor), 1e-15);
}

TEST(Theory, ExampleThreeMatchesBruteForce) {
    const auto in = theory_inputs_from_gradients(example, example_gradients, 25, 0.01);
    EXPECT_EQ(in.votes[0], (std::vector<double>{0, 0, 2, 0}));
    const double oracle = brute_force_variance(5, 3, 1.0, example_gradients, 25, 0.01);
    EXPECT_NEAR(var_gradient_estimate(in), oracle, 1e-15);
    EXPECT_NEAR(oracle, 8.5e-3, 0.1e-3);
}

TEST(Theory, ExampleThreeSquaredBias) {
    const auto in = theory_inputs_from_gradients(example, example_gradients, 25, 0.01);
    const auto m = mse_gradient_estimate(in);
    const double bias = -18.0 / 62.0 - (-0.29);
    EXPECT_NEAR(std::abs(bias), 1.0 / 3100.0, 1e-15);
    EXPECT_NEAR(m.squared_bias, bias * bias, 1e-18);
    EXPECT_NEAR(m.squared_bias, 1.0406e-7, 0.0001e-7);
    EXPECT_DOUBLE_EQ(m.mse, m.variance + m.squared_bias);
}

TEST(Theory, BiasShrinksWithMoreDigits) {
    const auto d3 = mse_gradient_estimate(theory_inputs_from_gradients(example, example_gradients, 25, 0.01));
    const auto d4 = mse_gradient_estimate(
        theory_inputs_from_gradients(BalancedConfig(5, 4, 1.0), example_gradients, 25, 0.01));
    EXPECT_LT(d4.squared_bias, d3.squared_bias);
}

TEST(Theory, GradientsOnLevelsHaveNoBias) {
    const BalancedConfig codec(5, 2, 1.0);
    const std::vector<double> g{quantize(codec, 0.3), quantize(codec, -0.7), 0.0};
    EXPECT_EQ(mse_gradient_estimate(theory_inputs_from_gradients(codec, g, 4, 0.1)).squared_bias, 0.0);
}

TEST(BlockedMoments, MatchesDirectMoments) {
    KeyedStream rng(1, StreamRole::data, {});
    BlockedMoments m(10, 0.3);
    std::vector<double> xs;
    for (int i = 0; i < 1000; ++i) {
        xs.push_back(2.0 + rng.normal());
        m.add(i / 100, xs.back());
    }
    double mean = 0.0;
    for (double x : xs) {
        mean += x / 1000;
    }
    double var = 0.0;
    double mse = 0.0;
    for (double x : xs) {
        var += (x - mean) * (x - mean) / 999;
        mse += (x - 1.5) * (x - 1.5) / 1000;
    }
    EXPECT_NEAR(m.mean().value, mean, 1e-12);
    EXPECT_NEAR(m.variance().value, var, 1e-12);
    EXPECT_NEAR(m.mse(1.5).value, mse, 1e-12);
    EXPECT_NEAR(m.mean().se, 1.0 / std::sqrt(1000.0), 0.015);
}

TEST(MonteCarlo, BypassedSingleDeviceMseIsSquaredBias) {
    auto mc = mc_config(example, {0.28}, 4, 0.1, 1000);
    mc.bypass_channel = true;
    const auto r = monte_carlo_mse(mc);
    const double bias = 17.0 / 62.0 - 0.28;
    EXPECT_NEAR(r.mse.value, bias * bias, 1e-17);
    EXPECT_NEAR(r.variance.value, 0.0, 1e-20);
    EXPECT_NEAR(r.theory.squared_bias, bias * bias, 1e-17);
}

TEST(MonteCarlo, NoiselessLargeArrayMseApproachesSquaredBias) {
    const BalancedConfig codec(3, 1, 1.0);
    auto mc = mc_config(codec, {0.51, -0.49}, 512, 0.0, 20000);
    const auto r = monte_carlo_mse(mc);
    EXPECT_NEAR(r.theory.squared_bias, 0.49 * 0.49 / 1.0, 1e-12);
    EXPECT_NEAR(r.mse.value, r.theory.squared_bias, 0.05 * r.theory.squared_bias);
}

TEST(MonteCarlo, ExampleThreeVarianceMatchesClosedForm) {
    const auto r = monte_carlo_mse(mc_config(example, example_gradients, 25, 0.01, 200000));
    const double oracle = brute_force_variance(5, 3, 1.0, example_gradients, 25, 0.01);
    EXPECT_NEAR(r.variance.value, oracle, 0.02 * oracle);
    EXPECT_NEAR(r.mean.value, r.quantized_average, 4.0 * r.mean.se);
    for (const auto &v : r.votes) {
        EXPECT_NEAR(v.mean.value, v.truth, 4.0 * v.mean.se + 1e-12);
    }
}

TEST(MonteCarlo, ResultsIndependentOfThreadCount) {
    auto mc = mc_config(BalancedConfig(5, 2, 0.1), {0.05, -0.02, 0.08, 0.0, -0.1}, 3, 0.01, 3000);
    mc.blocks = 12;
    mc.threads = 1;
    const auto a = monte_carlo_mse(mc);
    mc.threads = 4;
    const auto b = monte_carlo_mse(mc);
    EXPECT_EQ(a.mean.value, b.mean.value);
    EXPECT_EQ(a.variance.value, b.variance.value);
    EXPECT_EQ(a.variance.se, b.variance.se);
    EXPECT_EQ(a.mse.value, b.mse.value);
    ASSERT_EQ(a.votes.size(), b.votes.size());
    for (std::size_t i = 0; i < a.votes.size(); ++i) {
        EXPECT_EQ(a.votes[i].variance.value, b.votes[i].variance.value);
    }
}

TEST(MonteCarlo, RejectsBadConfigs) {
    auto mc = mc_config(example, example_gradients, 4, 0.1, 1);
    EXPECT_THROW(monte_carlo_mse(mc), Error);
    mc = mc_config(example, example_gradients, 4, 0.1, 100);
    mc.channel.devices = 3;
    EXPECT_THROW(monte_carlo_mse(mc), Error);
}
