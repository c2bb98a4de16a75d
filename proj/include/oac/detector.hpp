// include/oac/detector.hpp - Non-coherent vote-count detection and aggregation.

#pragma once

#include "oac/error.hpp"
#include "oac/numeral_codec.hpp"
#include "oac/phy_channel.hpp"
#include "oac/resource_map.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace oac {

struct DetectorOptions {
    /// Clamp every vote estimate into [0, K]. Off by default: clamping biases the estimator.
    bool clamp_votes = false;
    /// Multiplier on the noise variance assumed at the server (1 = perfect knowledge).
    double noise_scale = 1.0;
};

/// Per (gradient q, position i, symbol index l) vote counts, real-valued when estimated.
class VoteEstimate {
public:
    VoteEstimate() = default;
    VoteEstimate(int gradients, int digits, int symbols_per_digit)
        : gradients_(gradients), digits_(digits), symbols_per_digit_(symbols_per_digit),
          values_(static_cast<std::size_t>(gradients) * digits * symbols_per_digit, 0.0) {}

    int gradients() const noexcept { return gradients_; }
    int digits() const noexcept { return digits_; }
    int symbols_per_digit() const noexcept { return symbols_per_digit_; }

    double &at(int q, int position, int l) { return values_[index(q, position, l)]; }
    double at(int q, int position, int l) const { return values_[index(q, position, l)]; }

    /// The b - 1 votes of digit `position` of gradient q.
    std::span<const double> digit(int q, int position) const {
        return {values_.data() + index(q, position, 0), static_cast<std::size_t>(symbols_per_digit_)};
    }

    std::span<const double> values() const & noexcept { return values_; }
    std::span<double> values() & noexcept { return values_; }
    std::span<const double> values() const && = delete; // would dangle

private:
    std::size_t index(int q, int position, int l) const {
        detail::require(q >= 0 && q < gradients_ && position >= 0 && position < digits_ && l >= 0 &&
                            l < symbols_per_digit_,
                        ErrorKind::index, "vote index out of range");
        return (static_cast<std::size_t>(q) * digits_ + position) * symbols_per_digit_ + l;
    }

    int gradients_ = 0;
    int digits_ = 0;
    int symbols_per_digit_ = 0;
    std::vector<double> values_;
};

struct AggregateEstimate {
    std::vector<std::vector<double>> digit_means; // per q, most-significant first
    std::vector<double> estimates;                // per q, decode(digit_means[q])
};

/// Relaxed ML estimate ||y||^2 / (E_s R) - sigma^2 / E_s from the received energy.
inline double estimate_vote(double energy, double energy_scale, double noise_var, int antennas) {
    return energy / (energy_scale * antennas) - noise_var / energy_scale;
}

inline std::vector<double> estimate_votes(std::span<const double> energies, double energy_scale, double noise_var,
                                          int antennas) {
    detail::require(antennas >= 1, ErrorKind::config, "antenna count must be >= 1");
    std::vector<double> votes(energies.size());
    std::transform(energies.begin(), energies.end(), votes.begin(),
                   [&](double e) { return estimate_vote(e, energy_scale, noise_var, antennas); });
    return votes;
}

inline double vector_energy(std::span<const cplx> y) {
    double e = 0.0;
    for (const cplx &v : y) {
        e += std::norm(v);
    }
    return e;
}

/// Negative log-likelihood (up to a constant) of one cell at a real vote count kappa:
/// 2R ln((E_s kappa + sigma^2) / 2) + 2 ||y||^2 / (E_s kappa + sigma^2).
inline double vote_neg_log_likelihood(double kappa, double energy, double energy_scale, double noise_var,
                                      int antennas) {
    const double c = energy_scale * kappa + noise_var;
    if (c <= 0.0) {
        // Degenerate covariance: only a zero observation is possible.
        return energy == 0.0 ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    }
    return 2.0 * antennas * std::log(0.5 * c) + 2.0 * energy / c;
}

/// Largest enumeration ml_votes_exact will attempt.
inline constexpr std::int64_t ml_search_limit = 20'000'000;

/// Exhaustive constrained ML over kappa_l in {0..K}, sum kappa_l <= K.
/// Ties resolve to the smaller total, then lexicographically smaller vector.
inline std::vector<int> ml_votes_exact(std::span<const double> energies, double energy_scale, double noise_var,
                                       int antennas, int devices) {
    detail::require(devices >= 0, ErrorKind::config, "device count must be >= 0");
    const auto cells = energies.size();
    std::int64_t combos = 1;
    for (std::size_t l = 0; l < cells; ++l) {
        combos *= devices + 1;
        detail::require(combos <= ml_search_limit, ErrorKind::capacity,
                        "exact ML search over (K+1)^(b-1) candidates is too large");
    }

    // cost[l][kappa], precomputed since the objective separates over cells.
    std::vector<std::vector<double>> cost(cells, std::vector<double>(static_cast<std::size_t>(devices) + 1));
    for (std::size_t l = 0; l < cells; ++l) {
        for (int kappa = 0; kappa <= devices; ++kappa) {
            cost[l][static_cast<std::size_t>(kappa)] =
                vote_neg_log_likelihood(kappa, energies[l], energy_scale, noise_var, antennas);
        }
    }

    std::vector<int> current(cells, 0);
    std::vector<int> best(cells, 0);
    double best_cost = std::numeric_limits<double>::infinity();
    int best_total = std::numeric_limits<int>::max();
    bool have_best = false;

    auto better = [&](double c, int total) {
        if (!have_best || c < best_cost) {
            return true;
        }
        if (c > best_cost) {
            return false;
        }
        if (total != best_total) {
            return total < best_total;
        }
        return current < best;
    };

    auto search = [&](auto &&self, std::size_t l, int remaining, double partial) -> void {
        if (l == cells) {
            const int total = devices - remaining;
            if (better(partial, total)) {
                best = current;
                best_cost = partial;
                best_total = total;
                have_best = true;
            }
            return;
        }
        for (int kappa = 0; kappa <= remaining; ++kappa) {
            current[l] = kappa;
            self(self, l + 1, remaining - kappa, partial + cost[l][static_cast<std::size_t>(kappa)]);
        }
        current[l] = 0;
    };
    search(search, 0, devices, 0.0);
    return best;
}

/// Rounds and clamps relaxed estimates to {0..K}.
inline std::vector<int> round_votes(std::span<const double> votes, int devices) {
    std::vector<int> out(votes.size());
    std::transform(votes.begin(), votes.end(), out.begin(), [devices](double v) {
        return static_cast<int>(std::clamp(std::lround(v), 0L, static_cast<long>(devices)));
    });
    return out;
}

/// Vote estimates for every resource set from the received grid.
inline VoteEstimate detect(const ReceivedGrid &received, std::span<const ResourceSet> sets, const GridConfig &grid,
                           double noise_var, int devices, const DetectorOptions &options = {}) {
    const auto &codec = grid.codec();
    const int per_digit = codec.base() - 1;
    const double assumed_noise = noise_var * options.noise_scale;
    VoteEstimate votes(static_cast<int>(sets.size()), codec.digits(), per_digit);
    for (std::size_t q = 0; q < sets.size(); ++q) {
        for (int i = 0; i < codec.digits(); ++i) {
            for (int l = 0; l < per_digit; ++l) {
                double v = estimate_vote(received.energy(sets[q].at(i, l)), grid.energy_scale(), assumed_noise,
                                         received.antennas());
                if (options.clamp_votes) {
                    v = std::clamp(v, 0.0, static_cast<double>(devices));
                }
                votes.at(static_cast<int>(q), i, l) = v;
            }
        }
    }
    return votes;
}

/// Exact vote counts K_l implied by the devices' numerals (numerals[k][q]).
inline VoteEstimate true_votes(const BalancedConfig &codec, std::span<const std::vector<NumeralSequence>> numerals) {
    detail::require(!numerals.empty(), ErrorKind::domain, "need at least one device");
    const int gradients = static_cast<int>(numerals.front().size());
    VoteEstimate votes(gradients, codec.digits(), codec.base() - 1);
    for (const auto &device : numerals) {
        detail::require(static_cast<int>(device.size()) == gradients, ErrorKind::shape,
                        "devices carry different gradient counts");
        for (int q = 0; q < gradients; ++q) {
            for (int i = 0; i < codec.digits(); ++i) {
                const int x = device[static_cast<std::size_t>(q)].at_position(i);
                if (x != 0) {
                    votes.at(q, i, index_of_symbol(codec.base(), x)) += 1.0;
                }
            }
        }
    }
    return votes;
}

/// mu_{q,i} = (1/K) sum_l a_l K_l and g_q = decode(mu_q).
inline AggregateEstimate aggregate(const VoteEstimate &votes, const BalancedConfig &codec, int devices) {
    detail::require(devices >= 1, ErrorKind::config, "device count must be >= 1");
    detail::require(votes.digits() == codec.digits() && votes.symbols_per_digit() == codec.base() - 1,
                    ErrorKind::shape, "vote layout does not match the codec");
    const SymbolSet symbols(codec.base());
    AggregateEstimate out;
    out.digit_means.resize(static_cast<std::size_t>(votes.gradients()));
    out.estimates.resize(static_cast<std::size_t>(votes.gradients()));
    for (int q = 0; q < votes.gradients(); ++q) {
        auto &means = out.digit_means[static_cast<std::size_t>(q)];
        means.assign(static_cast<std::size_t>(codec.digits()), 0.0);
        for (int i = 0; i < codec.digits(); ++i) {
            double weighted = 0.0;
            const auto digit = votes.digit(q, i);
            for (std::size_t l = 0; l < digit.size(); ++l) {
                weighted += symbols.symbols()[l] * digit[l];
            }
            means[static_cast<std::size_t>(codec.digits() - 1 - i)] = weighted / devices;
        }
        out.estimates[static_cast<std::size_t>(q)] = decode(codec, means);
    }
    return out;
}

} // namespace oac
