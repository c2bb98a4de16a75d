// include/oac/link.hpp - One communication round: encode, map, activate, channel, detect, aggregate.

#pragma once

#include "oac/detector.hpp"
#include "oac/error.hpp"
#include "oac/numeral_codec.hpp"
#include "oac/phy_channel.hpp"
#include "oac/resource_map.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oac {

enum class LinkMode {
    exact,        // plain average, no quantization or channel
    bypass,       // quantized numerals averaged without the channel
    over_the_air, // full simulated link
};

constexpr std::string_view to_string(LinkMode mode) noexcept {
    switch (mode) {
    case LinkMode::exact: return "exact";
    case LinkMode::bypass: return "bypass";
    case LinkMode::over_the_air: return "ota";
    }
    return "ota";
}

inline LinkMode link_mode_from_string(std::string_view name) {
    if (name == "exact" || name == "ideal-aggregation") {
        return LinkMode::exact;
    }
    if (name == "bypass" || name == "ideal" || name == "quantized") {
        return LinkMode::bypass;
    }
    if (name == "ota" || name == "over_the_air") {
        return LinkMode::over_the_air;
    }
    detail::fail(ErrorKind::config, "unknown link mode '" + std::string(name) + "' (expected exact, bypass or ota)");
}

struct LinkConfig {
    LinkMode mode = LinkMode::over_the_air;
    int subcarriers = 1200;
    /// Upper bound on OFDM symbols per round; unset means ceil(Q / M_par).
    std::optional<int> max_symbols;
    ChannelConfig channel;
    DetectorOptions detector;
};

/// Encoded state of one round, reusable across channel realizations.
struct PreparedRound {
    GridConfig grid;
    std::vector<ResourceSet> sets;
    std::vector<std::vector<NumeralSequence>> numerals; // [device][gradient]
    std::vector<double> true_average;
    std::vector<double> quantized_average;
    std::int64_t clipped = 0; // coordinates with |g| > v_max, over all devices
};

struct LinkResult {
    std::vector<double> estimate;
    std::vector<double> true_average;
    std::vector<double> quantized_average;
    std::int64_t clipped = 0;
};

/// Scratch buffers for repeated transmissions.
struct LinkWorkspace {
    std::vector<ActivationFrame> frames;
    ReceivedGrid received;
};

class OacLink {
public:
    OacLink(BalancedConfig codec, LinkConfig cfg) : codec_(codec), cfg_(std::move(cfg)) {
        cfg_.channel.validate();
        detail::require(cfg_.subcarriers >= (codec.base() - 1) * codec.digits(), ErrorKind::config,
                        "subcarriers must be >= (base-1)*digits");
    }

    const BalancedConfig &codec() const noexcept { return codec_; }
    const LinkConfig &config() const noexcept { return cfg_; }

    /// gradients[k][q]; all devices must carry Q values.
    PreparedRound prepare(std::span<const std::vector<double>> gradients) const {
        detail::require(static_cast<int>(gradients.size()) == cfg_.channel.devices, ErrorKind::shape,
                        std::to_string(gradients.size()) + " gradient vectors supplied for K = " +
                            std::to_string(cfg_.channel.devices));
        const auto q_count = gradients.front().size();
        int symbols = GridConfig::symbols_for(cfg_.subcarriers, codec_, static_cast<std::int64_t>(q_count));
        if (cfg_.max_symbols && symbols > *cfg_.max_symbols) {
            detail::fail(ErrorKind::capacity, std::to_string(q_count) + " gradients need " + std::to_string(symbols) +
                                                  " OFDM symbols but at most " + std::to_string(*cfg_.max_symbols) +
                                                  " are configured");
        }
        GridConfig grid(cfg_.subcarriers, symbols, codec_);
        auto sets = map_gradients(grid, static_cast<int>(q_count));
        PreparedRound round{std::move(grid), std::move(sets), {}, {}, {}, 0};
        round.numerals.resize(gradients.size());
        round.true_average.assign(q_count, 0.0);
        round.quantized_average.assign(q_count, 0.0);
        std::vector<std::int64_t> level_sums(q_count, 0);
        for (std::size_t k = 0; k < gradients.size(); ++k) {
            const auto &g = gradients[k];
            detail::require(g.size() == q_count, ErrorKind::shape, "devices carry different gradient counts");
            auto &seqs = round.numerals[k];
            seqs.reserve(q_count);
            for (std::size_t q = 0; q < q_count; ++q) {
                seqs.push_back(encode(codec_, g[q]));
                round.true_average[q] += g[q];
                level_sums[q] += quantization_level(codec_, g[q]) - codec_.bias();
                if (std::abs(g[q]) > codec_.v_max()) {
                    ++round.clipped;
                }
            }
        }
        const auto devices = static_cast<double>(gradients.size());
        for (std::size_t q = 0; q < q_count; ++q) {
            round.true_average[q] /= devices;
            round.quantized_average[q] =
                codec_.v_max() * (static_cast<double>(level_sums[q]) / devices) / static_cast<double>(codec_.bias());
        }
        return round;
    }

    /// Votes seen by the server for one channel realization keyed by `seed`.
    VoteEstimate transmit(const PreparedRound &round, std::uint64_t seed, LinkWorkspace &ws) const {
        const int devices = cfg_.channel.devices;
        ws.frames.resize(static_cast<std::size_t>(devices));
        for (int k = 0; k < devices; ++k) {
            activate_device(round.grid, round.sets, k, round.numerals[static_cast<std::size_t>(k)], seed,
                            ws.frames[static_cast<std::size_t>(k)]);
        }
        const ChannelRealization chan(cfg_.channel, {round.grid.subcarriers(), round.grid.symbols()}, seed);
        superpose_into(ws.frames, chan, cfg_.channel.noise_var, seed, ws.received);
        return detect(ws.received, round.sets, round.grid, cfg_.channel.noise_var, devices, cfg_.detector);
    }

    /// Estimated averages for a prepared round under the configured mode.
    std::vector<double> estimate(const PreparedRound &round, std::uint64_t seed, LinkWorkspace &ws) const {
        switch (cfg_.mode) {
        case LinkMode::exact: return round.true_average;
        case LinkMode::bypass: return aggregate(true_votes(codec_, round.numerals), codec_, cfg_.channel.devices).estimates;
        case LinkMode::over_the_air: return aggregate(transmit(round, seed, ws), codec_, cfg_.channel.devices).estimates;
        }
        return {};
    }

    LinkResult run(std::span<const std::vector<double>> gradients, std::uint64_t seed) const {
        LinkWorkspace ws;
        auto round = prepare(gradients);
        LinkResult result;
        result.estimate = estimate(round, seed, ws);
        result.true_average = std::move(round.true_average);
        result.quantized_average = std::move(round.quantized_average);
        result.clipped = round.clipped;
        return result;
    }

private:
    BalancedConfig codec_;
    LinkConfig cfg_;
};

} // namespace oac
