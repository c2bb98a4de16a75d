#include "oac/detector.hpp"
#include "oac/link.hpp"
#include "oac/phy_channel.hpp"
#include "oac/resource_map.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace oac;

namespace {

ChannelConfig flat(int devices, int antennas, double noise_var) {
    ChannelConfig c;
    c.devices = devices;
    c.antennas = antennas;
    c.noise_var = noise_var;
    c.sync = {default_t_sync(1200, 15e3), 3.0, 2048, 30.72e6};
    return c;
}

// Energy of one cell lit by `votes[l]` devices per cell l, all other devices silent.
std::vector<double> cell_energies(const std::vector<int> &votes, int devices, int antennas, double noise, double es,
                                  std::uint64_t seed, ReceivedGrid &y) {
    const auto cfg = flat(devices, antennas, noise);
    const int cells = static_cast<int>(votes.size());
    const ChannelRealization chan(cfg, {cells, 1}, seed);
    std::vector<ActivationFrame> frames(static_cast<std::size_t>(devices));
    int k = 0;
    for (int l = 0; l < cells; ++l) {
        for (int v = 0; v < votes[static_cast<std::size_t>(l)]; ++v, ++k) {
            frames[static_cast<std::size_t>(k)].entries.push_back(
                {Cell{0, l}, std::sqrt(es) * randomization_phase(seed, k, 0, 0)});
        }
    }
    for (int j = 0; j < devices; ++j) {
        frames[static_cast<std::size_t>(j)].device = j;
    }
    superpose_into(frames, chan, noise, seed, y);
    std::vector<double> e(static_cast<std::size_t>(cells));
    for (int l = 0; l < cells; ++l) {
        e[static_cast<std::size_t>(l)] = y.energy(Cell{0, l});
    }
    return e;
}

} // namespace

TEST(Detector, RelaxedEstimateExamples) {
    EXPECT_DOUBLE_EQ(estimate_vote(0.0, 4.0, 1.0, 3), -0.25);
    EXPECT_DOUBLE_EQ(estimate_vote(4.0 * 7, 4.0, 0.0, 1), 7.0);
    EXPECT_DOUBLE_EQ(estimate_vote(4.0 * 7 * 5, 4.0, 0.0, 5), 7.0);
    const std::vector<double> energies{0.0, 8.0};
    EXPECT_EQ(estimate_votes(energies, 4.0, 0.0, 1), (std::vector<double>{0.0, 2.0}));
}

TEST(Detector, RelaxedEstimateMomentsMatchClosedForm) {
    const int n = 1000000;
    const int r = 25;
    const double es = 4.0;
    const double noise = 0.01;
    double sum = 0.0;
    double sum2 = 0.0;
    ReceivedGrid y;
    for (int t = 0; t < n; ++t) {
        const auto e = cell_energies({2}, 2, r, noise, es, derive_key(123, {static_cast<std::uint64_t>(t)}), y);
        const double k_hat = estimate_vote(e[0], es, noise, r);
        sum += k_hat;
        sum2 += k_hat * k_hat;
    }
    const double mean = sum / n;
    const double var = (sum2 - n * mean * mean) / (n - 1);
    EXPECT_NEAR(mean, 2.0, 0.002);
    const double theory = (2.0 + noise / es) * (2.0 + noise / es) / r;
    EXPECT_NEAR(theory, 0.160400, 1e-6);
    EXPECT_NEAR(var, theory, 0.01 * theory);
}

TEST(Detector, ExactMlOnSilentCellsIsZero) {
    const std::vector<double> energies(4, 0.0);
    EXPECT_EQ(ml_votes_exact(energies, 4.0, 0.5, 8, 6), (std::vector<int>{0, 0, 0, 0}));
}

// Near-noiseless, a single device's vote is recovered exactly. With K >= 2 devices on one
// cell the Rayleigh spread of the summed energy (relative sd 1/sqrt(R)) dominates instead.
TEST(Detector, ExactMlRecoversVotesAtHighSnr) {
    const int r = 8;
    const double es = 4.0;
    const double noise = 1e-6;
    const int n = 10000;
    ReceivedGrid y;
    int hits = 0;
    for (int t = 0; t < n; ++t) {
        const auto e = cell_energies({1, 0, 0, 0}, 1, r, noise, es, derive_key(9, {static_cast<std::uint64_t>(t)}), y);
        hits += ml_votes_exact(e, es, noise, r, 1) == std::vector<int>{1, 0, 0, 0};
    }
    EXPECT_GE(hits, 0.99 * n);

    // K = 4: the silent cells are still always recovered as empty.
    int silent = 0;
    for (int t = 0; t < 2000; ++t) {
        const auto e = cell_energies({4, 0, 0, 0}, 4, r, noise, es, derive_key(10, {static_cast<std::uint64_t>(t)}), y);
        const auto v = ml_votes_exact(e, es, noise, r, 4);
        silent += v[1] == 0 && v[2] == 0 && v[3] == 0 && v[0] >= 1;
    }
    EXPECT_EQ(silent, 2000);
}

TEST(Detector, RelaxedEstimateIsStationaryPointOfLikelihood) {
    const double es = 2.0;
    const double noise = 0.3;
    const int r = 8;
    for (double energy : {0.5, 3.0, 17.0, 60.0}) {
        const double k_hat = estimate_vote(energy, es, noise, r);
        if (es * k_hat + noise <= 0.0) {
            continue;
        }
        // Step and tolerance follow the natural scale c = E_s kappa + sigma^2 of the objective.
        const double c = es * k_hat + noise;
        const double h = 1e-4 * c / es;
        const double f0 = vote_neg_log_likelihood(k_hat, energy, es, noise, r);
        const double fp = vote_neg_log_likelihood(k_hat + h, energy, es, noise, r);
        const double fm = vote_neg_log_likelihood(k_hat - h, energy, es, noise, r);
        const double slope_scale = 2.0 * r * es / c;
        EXPECT_NEAR((fp - fm) / (2 * h), 0.0, 1e-6 * slope_scale) << energy;
        EXPECT_GT(fp, f0);
        EXPECT_GT(fm, f0);
    }
}

TEST(Detector, ExactMlRespectsBudgetAndTies) {
    // All cells equally loud: the budget allows at most K votes in total.
    const std::vector<double> energies(3, 4.0 * 8 * 3);
    const auto votes = ml_votes_exact(energies, 4.0, 0.01, 8, 3);
    int total = 0;
    for (int v : votes) {
        total += v;
    }
    EXPECT_LE(total, 3);
    EXPECT_THROW(ml_votes_exact(std::vector<double>(8, 1.0), 4.0, 0.1, 1, 20), Error);
}

TEST(Detector, RoundVotesClamps) {
    const std::vector<double> v{-0.7, 0.4, 1.6, 9.2};
    EXPECT_EQ(round_votes(v, 5), (std::vector<int>{0, 0, 2, 5}));
}

TEST(Aggregate, ExampleThreeExactVotes) {
    const BalancedConfig codec(5, 3, 1.0);
    const std::vector<std::vector<NumeralSequence>> numerals{{encode(codec, 0.28)}, {encode(codec, -0.86)}};
    const auto votes = true_votes(codec, numerals);
    // Position 0 carries numeral 2 from both devices (symbol index 2 of 1, -1, 2, -2).
    EXPECT_EQ(std::vector<double>(votes.digit(0, 0).begin(), votes.digit(0, 0).end()),
              (std::vector<double>{0, 0, 2, 0}));
    EXPECT_EQ(std::vector<double>(votes.digit(0, 1).begin(), votes.digit(0, 1).end()),
              (std::vector<double>{0, 1, 0, 1}));
    EXPECT_EQ(std::vector<double>(votes.digit(0, 2).begin(), votes.digit(0, 2).end()),
              (std::vector<double>{1, 0, 0, 1}));
    const auto agg = aggregate(votes, codec, 2);
    EXPECT_EQ(agg.digit_means[0], (std::vector<double>{-0.5, -1.5, 2.0}));
    EXPECT_EQ(agg.estimates[0], -18.0 / 62.0);
}

TEST(Aggregate, ZeroVotesGiveZero) {
    const BalancedConfig codec(7, 2, 0.5);
    const VoteEstimate votes(3, 2, 6);
    for (double g : aggregate(votes, codec, 25).estimates) {
        EXPECT_EQ(g, 0.0);
    }
}

TEST(Aggregate, ExactVotesReproduceQuantizedAverage) {
    const BalancedConfig codec(5, 2, 0.1);
    KeyedStream rng(4, StreamRole::data, {});
    for (int trial = 0; trial < 200; ++trial) {
        const int k = 1 + static_cast<int>(rng.below(25));
        std::vector<std::vector<NumeralSequence>> numerals;
        double qavg = 0.0;
        for (int d = 0; d < k; ++d) {
            const double g = rng.uniform(-0.12, 0.12);
            numerals.push_back({encode(codec, g)});
            qavg += quantize(codec, g);
        }
        qavg /= k;
        ASSERT_NEAR(aggregate(true_votes(codec, numerals), codec, k).estimates[0], qavg, 1e-15);
    }
}

TEST(Aggregate, LinearInVotes) {
    const BalancedConfig codec(5, 2, 1.0);
    VoteEstimate a(1, 2, 4);
    VoteEstimate b(1, 2, 4);
    VoteEstimate sum(1, 2, 4);
    KeyedStream rng(8, StreamRole::data, {});
    for (std::size_t i = 0; i < a.values().size(); ++i) {
        a.values()[i] = rng.uniform(-1, 3);
        b.values()[i] = rng.uniform(-1, 3);
        sum.values()[i] = a.values()[i] + b.values()[i];
    }
    EXPECT_NEAR(aggregate(sum, codec, 5).estimates[0],
                aggregate(a, codec, 5).estimates[0] + aggregate(b, codec, 5).estimates[0], 1e-12);
}

TEST(Link, IdealLinkReproducesExampleThree) {
    LinkConfig cfg;
    cfg.mode = LinkMode::bypass;
    cfg.channel.devices = 2;
    const std::vector<std::vector<double>> g{{0.28}, {-0.86}};
    const auto result = OacLink(BalancedConfig(5, 3, 1.0), cfg).run(g, 1);
    EXPECT_EQ(result.estimate[0], -18.0 / 62.0);
    EXPECT_DOUBLE_EQ(result.true_average[0], -0.29);
    EXPECT_EQ(result.quantized_average[0], -18.0 / 62.0);
}

TEST(Link, ExactModeReturnsTrueAverage) {
    LinkConfig cfg;
    cfg.mode = LinkMode::exact;
    cfg.channel.devices = 2;
    const std::vector<std::vector<double>> g{{0.28, 0.1}, {-0.86, 0.3}};
    const auto result = OacLink(BalancedConfig(5, 3, 1.0), cfg).run(g, 1);
    EXPECT_DOUBLE_EQ(result.estimate[0], -0.29);
    EXPECT_DOUBLE_EQ(result.estimate[1], 0.2);
}

// Noiseless, many antennas: the energy detector recovers ternary votes exactly after rounding.
TEST(Link, TernaryVotesRecoveredInLargeArrayLimit) {
    const BalancedConfig codec(3, 1, 1.0);
    LinkConfig cfg;
    cfg.subcarriers = 2;
    cfg.channel.devices = 25;
    // Relative vote error is 1/sqrt(R) when noiseless; R = 8192 puts every cell well inside +-0.5.
    cfg.channel.antennas = 8192;
    cfg.channel.noise_var = 0.0;
    const OacLink link(codec, cfg);
    KeyedStream rng(12, StreamRole::data, {});
    std::vector<std::vector<double>> g;
    for (int k = 0; k < 25; ++k) {
        g.push_back({rng.uniform(-1.0, 1.0)});
    }
    const auto round = link.prepare(g);
    const auto truth = true_votes(codec, round.numerals);
    LinkWorkspace ws;
    int exact = 0;
    for (int t = 0; t < 50; ++t) {
        const auto est = link.transmit(round, derive_key(5, {static_cast<std::uint64_t>(t)}), ws);
        const auto rounded = round_votes(est.values(), 25);
        bool same = true;
        for (std::size_t i = 0; i < rounded.size(); ++i) {
            same = same && rounded[i] == truth.values()[i];
        }
        exact += same;
    }
    EXPECT_GE(exact, 48);
}

TEST(Link, CapacityLimitIsEnforced) {
    LinkConfig cfg;
    cfg.subcarriers = 8;
    cfg.max_symbols = 2;
    cfg.channel.devices = 1;
    const OacLink link(BalancedConfig(5, 2, 1.0), cfg);
    const std::vector<std::vector<double>> fits{std::vector<double>(2, 0.1)};
    EXPECT_NO_THROW(link.prepare(fits));
    const std::vector<std::vector<double>> too_many{std::vector<double>(3, 0.1)};
    try {
        link.prepare(too_many);
        FAIL();
    } catch (const Error &e) {
        EXPECT_EQ(e.kind(), ErrorKind::capacity);
    }
}

TEST(Link, MultiSymbolRoundIsUnbiasedPerGradient) {
    const BalancedConfig codec(5, 2, 1.0);
    LinkConfig cfg;
    cfg.subcarriers = 16;
    cfg.channel.devices = 5;
    cfg.channel.antennas = 16;
    cfg.channel.noise_var = 0.01;
    const OacLink link(codec, cfg);
    std::vector<std::vector<double>> g(5, std::vector<double>(5));
    KeyedStream rng(2, StreamRole::data, {});
    for (auto &row : g) {
        for (double &v : row) {
            v = rng.uniform(-1, 1);
        }
    }
    const auto round = link.prepare(g);
    EXPECT_EQ(round.grid.symbols(), 3);
    LinkWorkspace ws;
    const int n = 4000;
    std::vector<double> mean(5, 0.0);
    std::vector<double> m2(5, 0.0);
    for (int t = 0; t < n; ++t) {
        const auto est = link.estimate(round, derive_key(3, {static_cast<std::uint64_t>(t)}), ws);
        for (std::size_t q = 0; q < 5; ++q) {
            mean[q] += est[q] / n;
            m2[q] += est[q] * est[q] / n;
        }
    }
    for (std::size_t q = 0; q < 5; ++q) {
        const double se = std::sqrt((m2[q] - mean[q] * mean[q]) / n);
        EXPECT_NEAR(mean[q], round.quantized_average[q], 4.0 * se) << q;
    }
}
