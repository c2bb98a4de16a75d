// include/oac/resource_map.hpp - Gradient-to-subcarrier allocation and activation.

#pragma once

#include "oac/error.hpp"
#include "oac/numeral_codec.hpp"
#include "oac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <complex>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace oac {

/// One time-frequency resource: OFDM symbol index and subcarrier index.
struct Cell {
    int symbol = 0;
    int subcarrier = 0;

    auto operator<=>(const Cell &) const = default;
};

class GridConfig {
public:
    GridConfig(int subcarriers, int symbols, BalancedConfig codec)
        : subcarriers_(subcarriers), symbols_(symbols), codec_(codec) {
        detail::require(symbols >= 1, ErrorKind::config, "OFDM symbol count must be >= 1");
        detail::require(subcarriers >= cells_per_gradient(), ErrorKind::config,
                        "subcarriers (" + std::to_string(subcarriers) + ") must be >= (base-1)*digits (" +
                            std::to_string(cells_per_gradient()) + ")");
    }

    int subcarriers() const noexcept { return subcarriers_; }
    int symbols() const noexcept { return symbols_; }
    const BalancedConfig &codec() const noexcept { return codec_; }

    /// (b - 1) D cells per gradient.
    int cells_per_gradient() const noexcept { return (codec_.base() - 1) * codec_.digits(); }
    /// M_par: gradients per OFDM symbol.
    int gradients_per_symbol() const noexcept { return subcarriers_ / cells_per_gradient(); }
    std::int64_t capacity() const noexcept { return std::int64_t{gradients_per_symbol()} * symbols_; }
    /// Per-activated-cell energy E_s = b - 1.
    double energy_scale() const noexcept { return static_cast<double>(codec_.base() - 1); }

    /// OFDM symbols needed to carry `gradients` values in one shot.
    static int symbols_for(int subcarriers, const BalancedConfig &codec, std::int64_t gradients) {
        const int per_symbol = subcarriers / ((codec.base() - 1) * codec.digits());
        detail::require(per_symbol >= 1, ErrorKind::config, "subcarriers cannot hold a single gradient");
        return static_cast<int>(std::max<std::int64_t>(1, (gradients + per_symbol - 1) / per_symbol));
    }

private:
    int subcarriers_;
    int symbols_;
    BalancedConfig codec_;
};

/// Cells T_q reserved for gradient q, indexed by (position i, symbol index l).
struct ResourceSet {
    int gradient = 0;
    int symbols_per_digit = 0;   // b - 1
    std::vector<Cell> cells;     // cells[i * (b - 1) + l]

    const Cell &at(int position, int symbol_index) const {
        return cells.at(static_cast<std::size_t>(position * symbols_per_digit + symbol_index));
    }
};

/// Contiguous frequency-first allocation: gradient q uses the slot q mod M_par
/// of OFDM symbol q / M_par; leftover subcarriers at the top of each symbol stay idle.
inline std::vector<ResourceSet> map_gradients(const GridConfig &grid, int gradients) {
    detail::require(gradients >= 0, ErrorKind::config, "gradient count must be non-negative");
    if (gradients > grid.capacity()) {
        const int needed = GridConfig::symbols_for(grid.subcarriers(), grid.codec(), gradients);
        detail::fail(ErrorKind::capacity, std::to_string(gradients) + " gradients exceed grid capacity " +
                                              std::to_string(grid.capacity()) + "; " + std::to_string(needed) +
                                              " OFDM symbols required");
    }
    const int per_gradient = grid.cells_per_gradient();
    const int per_symbol = grid.gradients_per_symbol();
    const int symbols_per_digit = grid.codec().base() - 1;
    std::vector<ResourceSet> sets;
    sets.reserve(static_cast<std::size_t>(gradients));
    for (int q = 0; q < gradients; ++q) {
        ResourceSet set{q, symbols_per_digit, {}};
        set.cells.reserve(static_cast<std::size_t>(per_gradient));
        const int symbol = q / per_symbol;
        const int first = (q % per_symbol) * per_gradient;
        for (int c = 0; c < per_gradient; ++c) {
            set.cells.push_back({symbol, first + c});
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

/// Nonzero transmit entry of one device.
struct ActiveCell {
    Cell cell;
    std::complex<double> value;
};

/// Sparse transmit grid of one device.
struct ActivationFrame {
    int device = 0;
    double energy_scale = 0.0;
    std::vector<ActiveCell> entries;

    std::complex<double> value_at(Cell cell) const {
        for (const auto &entry : entries) {
            if (entry.cell == cell) {
                return entry.value;
            }
        }
        return {};
    }
};

/// Phase key for device k, gradient q, position i.
inline std::complex<double> randomization_phase(std::uint64_t seed, int device, int gradient, int position) {
    KeyedStream stream(seed, StreamRole::phase,
                       {static_cast<std::uint64_t>(device), static_cast<std::uint64_t>(gradient),
                        static_cast<std::uint64_t>(position)});
    return stream.unit_phase();
}

/// Frame of one device. Numeral x at position i lights cell (i, index_of_symbol(x))
/// with sqrt(E_s) times a random unit phase; a zero numeral lights nothing.
inline void activate_device(const GridConfig &grid, std::span<const ResourceSet> sets, int device,
                            std::span<const NumeralSequence> numerals, std::uint64_t seed, ActivationFrame &frame) {
    detail::require(numerals.size() == sets.size(), ErrorKind::shape,
                    "device " + std::to_string(device) + " supplied " + std::to_string(numerals.size()) +
                        " numeral sequences for " + std::to_string(sets.size()) + " resource sets");
    const auto &codec = grid.codec();
    const double amplitude = std::sqrt(grid.energy_scale());
    frame.device = device;
    frame.energy_scale = grid.energy_scale();
    frame.entries.clear();
    for (std::size_t q = 0; q < sets.size(); ++q) {
        const auto &seq = numerals[q];
        detail::require(seq.size() == static_cast<std::size_t>(codec.digits()), ErrorKind::shape,
                        "numeral sequence length does not match the digit count");
        for (int i = 0; i < codec.digits(); ++i) {
            const int x = seq.at_position(i);
            if (x == 0) {
                continue;
            }
            const int l = index_of_symbol(codec.base(), x);
            const auto phase = randomization_phase(seed, device, sets[q].gradient, i);
            frame.entries.push_back({sets[q].at(i, l), amplitude * phase});
        }
    }
}

/// numerals[k][q] is the sequence of gradient q at device k.
inline std::vector<ActivationFrame> activate(const GridConfig &grid, std::span<const ResourceSet> sets,
                                             std::span<const std::vector<NumeralSequence>> numerals,
                                             std::uint64_t seed) {
    std::vector<ActivationFrame> frames(numerals.size());
    for (std::size_t k = 0; k < numerals.size(); ++k) {
        activate_device(grid, sets, static_cast<int>(k), numerals[k], seed, frames[k]);
    }
    return frames;
}

} // namespace oac
