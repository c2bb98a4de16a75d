// include/oac/analysis.hpp - Closed-form estimator variance/MSE and the Monte Carlo check.
//
// For fixed vote counts K_l the relaxed estimate K^_l = ||y_l||^2/(E_s R) - sigma^2/E_s
// is unbiased with variance (K_l + sigma^2/E_s)^2 / R, because ||y_l||^2/R is
// Gamma(R, R/(E_s K_l + sigma^2)). Propagating through the linear decoder gives
//
//   Var[g^] = v_max^2 / (xi^2 R K^2) * sum_i sum_l a_l^2 (K_{i,l} + sigma^2/E_s)^2 b^{2i}
//
// and MSE = Var[g^] + ((1/K) sum_k (quantized_k - g_k))^2.

#pragma once

#include "oac/detector.hpp"
#include "oac/error.hpp"
#include "oac/link.hpp"
#include "oac/numeral_codec.hpp"
#include "oac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

namespace oac {

/// (1/R) (K_l + sigma^2/E_s)^2.
inline double var_vote(double votes, double noise_var, double energy_scale, int antennas) {
    detail::require(antennas >= 1, ErrorKind::config, "antenna count must be >= 1");
    const double t = votes + noise_var / energy_scale;
    return t * t / antennas;
}

struct TheoryInputs {
    BalancedConfig codec;
    int antennas = 1;
    int devices = 1;
    double noise_var = 0.0;
    double energy_scale = 0.0;
    /// votes[i][l]: devices whose numeral at position i equals a_l (l < b - 1).
    std::vector<std::vector<double>> votes;
    /// Per-device true values of this gradient (only needed for the bias).
    std::vector<double> true_gradients;
};

/// Theory inputs with votes derived from per-device gradients of a single coordinate.
inline TheoryInputs theory_inputs_from_gradients(const BalancedConfig &codec, std::span<const double> gradients,
                                                 int antennas, double noise_var) {
    detail::require(!gradients.empty(), ErrorKind::domain, "need at least one device gradient");
    TheoryInputs in{codec, antennas, static_cast<int>(gradients.size()), noise_var,
                    static_cast<double>(codec.base() - 1), {}, {gradients.begin(), gradients.end()}};
    in.votes.assign(static_cast<std::size_t>(codec.digits()), std::vector<double>(static_cast<std::size_t>(codec.base() - 1), 0.0));
    for (double g : gradients) {
        const auto seq = encode(codec, g);
        for (int i = 0; i < codec.digits(); ++i) {
            const int x = seq.at_position(i);
            if (x != 0) {
                in.votes[static_cast<std::size_t>(i)][static_cast<std::size_t>(index_of_symbol(codec.base(), x))] += 1.0;
            }
        }
    }
    return in;
}

inline double var_gradient_estimate(const TheoryInputs &in) {
    const auto &codec = in.codec;
    detail::require(in.votes.size() == static_cast<std::size_t>(codec.digits()), ErrorKind::shape,
                    "vote profile needs one row per numeral position");
    detail::require(in.devices >= 1 && in.antennas >= 1, ErrorKind::config, "K and R must be >= 1");
    const SymbolSet symbols(codec.base());
    const double floor_votes = in.noise_var / in.energy_scale;
    double total = 0.0;
    double weight = 1.0; // b^{2i}
    for (int i = 0; i < codec.digits(); ++i) {
        const auto &row = in.votes[static_cast<std::size_t>(i)];
        detail::require(row.size() == static_cast<std::size_t>(codec.base() - 1), ErrorKind::shape,
                        "vote profile rows need b - 1 entries");
        double digit_sum = 0.0;
        for (std::size_t l = 0; l < row.size(); ++l) {
            const double a = symbols.symbols()[l];
            const double t = row[l] + floor_votes;
            digit_sum += a * a * t * t;
        }
        total += digit_sum * weight;
        weight *= static_cast<double>(codec.base()) * codec.base();
    }
    const double xi = static_cast<double>(codec.bias());
    const double k = in.devices;
    return codec.v_max() * codec.v_max() * total / (xi * xi * in.antennas * k * k);
}

struct MseDecomposition {
    double variance = 0.0;
    double squared_bias = 0.0;
    double mse = 0.0;
};

inline MseDecomposition mse_gradient_estimate(const TheoryInputs &in) {
    detail::require(in.true_gradients.size() == static_cast<std::size_t>(in.devices), ErrorKind::shape,
                    "need one true gradient per device");
    MseDecomposition out;
    out.variance = var_gradient_estimate(in);
    double error = 0.0;
    for (double g : in.true_gradients) {
        error += quantize(in.codec, g) - g;
    }
    error /= in.devices;
    out.squared_bias = error * error;
    out.mse = out.variance + out.squared_bias;
    return out;
}

/// Sample moments accumulated in contiguous blocks, with delete-one-block jackknife errors.
class BlockedMoments {
public:
    struct Estimate {
        double value = 0.0;
        double se = 0.0;
    };

    BlockedMoments(int blocks, double center) : center_(center), sums_(static_cast<std::size_t>(blocks)) {}

    void add(int block, double x) {
        auto &s = sums_[static_cast<std::size_t>(block)];
        const double d = x - center_;
        s.n += 1.0;
        s.s1 += d;
        s.s2 += d * d;
    }

    double count() const { return total().n; }
    Estimate mean() const { return jackknife([](const Sums &s, double c) { return c + s.s1 / s.n; }); }
    Estimate variance() const {
        return jackknife([](const Sums &s, double) { return (s.s2 - s.s1 * s.s1 / s.n) / (s.n - 1.0); });
    }
    /// Mean squared deviation from `target`.
    Estimate mse(double target) const {
        return jackknife([target](const Sums &s, double c) {
            const double shift = target - c;
            return (s.s2 - 2.0 * shift * s.s1) / s.n + shift * shift;
        });
    }

private:
    struct Sums {
        double n = 0.0;
        double s1 = 0.0;
        double s2 = 0.0;
    };

    Sums total() const {
        Sums t;
        for (const auto &s : sums_) {
            t.n += s.n;
            t.s1 += s.s1;
            t.s2 += s.s2;
        }
        return t;
    }

    template <typename Statistic>
    Estimate jackknife(Statistic stat) const {
        const Sums all = total();
        Estimate out{stat(all, center_), 0.0};
        std::vector<double> partial;
        for (const auto &s : sums_) {
            if (s.n == 0.0) {
                continue;
            }
            const Sums rest{all.n - s.n, all.s1 - s.s1, all.s2 - s.s2};
            partial.push_back(stat(rest, center_));
        }
        const auto b = static_cast<double>(partial.size());
        if (b < 2.0) {
            return out;
        }
        double mean = 0.0;
        for (double p : partial) {
            mean += p;
        }
        mean /= b;
        double ss = 0.0;
        for (double p : partial) {
            ss += (p - mean) * (p - mean);
        }
        out.se = std::sqrt((b - 1.0) / b * ss);
        return out;
    }

    double center_;
    std::vector<Sums> sums_;
};

struct MonteCarloConfig {
    BalancedConfig codec{5, 2, 1.0};
    ChannelConfig channel;
    DetectorOptions detector;
    /// One value of a single gradient coordinate per device (size K).
    std::vector<double> gradients;
    std::int64_t trials = 1000;
    std::uint64_t seed = 1;
    int threads = 1;
    int blocks = 100;
    /// Feed exact vote counts to the aggregator instead of simulating the channel.
    bool bypass_channel = false;
};

struct VoteStats {
    int position = 0;
    int symbol_index = 0;
    double truth = 0.0;
    double theory_var = 0.0;
    BlockedMoments::Estimate mean;
    BlockedMoments::Estimate variance;
};

struct MseReport {
    std::int64_t trials = 0;
    std::uint64_t seed = 0;
    double true_average = 0.0;
    double quantized_average = 0.0;
    MseDecomposition theory;
    BlockedMoments::Estimate mean;
    BlockedMoments::Estimate variance;
    BlockedMoments::Estimate mse;
    std::vector<VoteStats> votes; // one entry per (position, symbol index)
};

/// Runs the full chain with fixed gradients for `trials` independent channel/noise draws.
/// Trial t uses seed derive_key(seed, {t}); results do not depend on `threads`.
inline MseReport monte_carlo_mse(const MonteCarloConfig &cfg) {
    detail::require(cfg.trials >= 2, ErrorKind::config, "Monte Carlo needs at least two trials");
    detail::require(static_cast<int>(cfg.gradients.size()) == cfg.channel.devices, ErrorKind::shape,
                    "need one gradient value per device");
    const auto &codec = cfg.codec;
    const int per_digit = codec.base() - 1;
    LinkConfig link_cfg;
    link_cfg.mode = cfg.bypass_channel ? LinkMode::bypass : LinkMode::over_the_air;
    link_cfg.subcarriers = per_digit * codec.digits();
    link_cfg.channel = cfg.channel;
    link_cfg.detector = cfg.detector;
    const OacLink link(codec, link_cfg);

    std::vector<std::vector<double>> per_device;
    per_device.reserve(cfg.gradients.size());
    for (double g : cfg.gradients) {
        per_device.push_back({g});
    }
    const PreparedRound round = link.prepare(per_device);
    const VoteEstimate truth = true_votes(codec, round.numerals);

    MseReport report;
    report.trials = cfg.trials;
    report.seed = cfg.seed;
    report.true_average = round.true_average[0];
    report.quantized_average = round.quantized_average[0];
    report.theory = mse_gradient_estimate(
        theory_inputs_from_gradients(codec, cfg.gradients, cfg.channel.antennas, cfg.channel.noise_var));

    const int blocks = static_cast<int>(std::clamp<std::int64_t>(cfg.blocks, 2, cfg.trials));
    const int cells = codec.digits() * per_digit;
    BlockedMoments estimate_moments(blocks, report.quantized_average);
    std::vector<BlockedMoments> vote_moments;
    for (int c = 0; c < cells; ++c) {
        vote_moments.emplace_back(blocks, truth.values()[static_cast<std::size_t>(c)]);
    }

    auto run_block = [&](int block, LinkWorkspace &ws, BlockedMoments &est, std::vector<BlockedMoments> &vm) {
        const std::int64_t begin = cfg.trials * block / blocks;
        const std::int64_t end = cfg.trials * (block + 1) / blocks;
        for (std::int64_t t = begin; t < end; ++t) {
            const std::uint64_t trial_seed = derive_key(cfg.seed, {static_cast<std::uint64_t>(t)});
            const VoteEstimate votes = cfg.bypass_channel ? truth : link.transmit(round, trial_seed, ws);
            est.add(block, aggregate(votes, codec, cfg.channel.devices).estimates[0]);
            for (int c = 0; c < cells; ++c) {
                vm[static_cast<std::size_t>(c)].add(block, votes.values()[static_cast<std::size_t>(c)]);
            }
        }
    };

    const int threads = std::clamp(cfg.threads, 1, blocks);
    if (threads == 1) {
        LinkWorkspace ws;
        for (int b = 0; b < blocks; ++b) {
            run_block(b, ws, estimate_moments, vote_moments);
        }
    } else {
        // Each block is written by exactly one thread; blocks are merged by index.
        std::vector<std::jthread> pool;
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                LinkWorkspace ws;
                for (int b = w; b < blocks; b += threads) {
                    run_block(b, ws, estimate_moments, vote_moments);
                }
            });
        }
    }

    report.mean = estimate_moments.mean();
    report.variance = estimate_moments.variance();
    report.mse = estimate_moments.mse(report.true_average);
    const SymbolSet symbols(codec.base());
    for (int i = 0; i < codec.digits(); ++i) {
        for (int l = 0; l < per_digit; ++l) {
            const auto &m = vote_moments[static_cast<std::size_t>(i * per_digit + l)];
            VoteStats vs;
            vs.position = i;
            vs.symbol_index = l;
            vs.truth = truth.at(0, i, l);
            vs.theory_var = var_vote(vs.truth, cfg.channel.noise_var,
                                     static_cast<double>(per_digit), cfg.channel.antennas);
            vs.mean = m.mean();
            vs.variance = m.variance();
            report.votes.push_back(vs);
        }
    }
    return report;
}

} // namespace oac
