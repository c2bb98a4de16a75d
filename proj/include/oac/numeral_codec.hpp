// include/oac/numeral_codec.hpp - Balanced-base numeral encoder/decoder.
//
// A real value v in [-v_max, v_max] is mapped to D numerals drawn from the
// symmetric symbol set {-(b-1)/2, ..., (b-1)/2} of an odd base b. Decoding the
// numerals is linear, so decoding element-wise averages of numerals gives the
// average of the quantized values.

#pragma once

#include "oac/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace oac {

class BalancedConfig {
public:
    /// Largest supported b^D; keeps every level exactly representable in a double.
    static constexpr std::int64_t max_levels = std::int64_t{1} << 52;

    BalancedConfig(int base, int digits, double v_max) : base_(base), digits_(digits), v_max_(v_max) {
        detail::require(base >= 3, ErrorKind::config, "base must be >= 3 (got " + std::to_string(base) + ")");
        detail::require(base % 2 == 1, ErrorKind::config, "base must be odd (got " + std::to_string(base) + ")");
        detail::require(digits >= 1, ErrorKind::config, "digits must be >= 1 (got " + std::to_string(digits) + ")");
        detail::require(std::isfinite(v_max) && v_max > 0.0, ErrorKind::config, "v_max must be a positive finite value");
        levels_ = 1;
        for (int i = 0; i < digits; ++i) {
            detail::require(levels_ <= max_levels / base, ErrorKind::config,
                            "base^digits exceeds the supported range of 2^52 levels");
            levels_ *= base;
        }
    }

    int base() const noexcept { return base_; }
    int digits() const noexcept { return digits_; }
    double v_max() const noexcept { return v_max_; }

    /// b^D, the number of quantization levels.
    std::int64_t levels() const noexcept { return levels_; }
    /// Bias xi = (b^D - 1) / 2, always an integer for odd b.
    std::int64_t bias() const noexcept { return (levels_ - 1) / 2; }
    /// Largest symbol magnitude (b - 1) / 2.
    int max_symbol() const noexcept { return (base_ - 1) / 2; }
    /// Quantization step 2 v_max / (b^D - 1).
    double step() const noexcept { return 2.0 * v_max_ / static_cast<double>(levels_ - 1); }

    bool operator==(const BalancedConfig &) const = default;

private:
    int base_;
    int digits_;
    double v_max_;
    std::int64_t levels_ = 1;
};

/// D balanced numerals of one scalar, most-significant first.
class NumeralSequence {
public:
    NumeralSequence(int base, std::vector<int> msb_first) : numerals_(std::move(msb_first)) {
        const int bound = (base - 1) / 2;
        for (int x : numerals_) {
            detail::require(x >= -bound && x <= bound, ErrorKind::domain,
                            "numeral " + std::to_string(x) + " is outside the base-" + std::to_string(base) +
                                " symbol set");
        }
    }

    std::size_t size() const noexcept { return numerals_.size(); }

    /// Numerals in storage order x_{D-1}, ..., x_0.
    std::span<const int> msb_first() const noexcept { return numerals_; }

    /// Numeral at positional weight b^position.
    int at_position(int position) const {
        detail::require(position >= 0 && static_cast<std::size_t>(position) < numerals_.size(), ErrorKind::index,
                        "numeral position out of range");
        return numerals_[numerals_.size() - 1 - static_cast<std::size_t>(position)];
    }

    bool operator==(const NumeralSequence &) const = default;

private:
    std::vector<int> numerals_;
};

/// Symbol a_j for index j in Z_b: order 1, -1, 2, -2, ..., 0.
inline int symbol_of_index(int base, int index) {
    detail::require(index >= 0 && index < base, ErrorKind::index,
                    "symbol index " + std::to_string(index) + " outside Z_" + std::to_string(base));
    if (index == base - 1) {
        return 0;
    }
    return index % 2 == 1 ? -(index + 1) / 2 : (index + 2) / 2;
}

/// Inverse of symbol_of_index.
inline int index_of_symbol(int base, int symbol) {
    const int bound = (base - 1) / 2;
    detail::require(symbol >= -bound && symbol <= bound, ErrorKind::domain,
                    "symbol " + std::to_string(symbol) + " is not in the base-" + std::to_string(base) + " set");
    if (symbol == 0) {
        return base - 1;
    }
    return symbol > 0 ? 2 * symbol - 2 : -2 * symbol - 1;
}

/// The ordered symbol set a_0 ... a_{b-1}.
class SymbolSet {
public:
    explicit SymbolSet(int base) : base_(base) {
        detail::require(base >= 3 && base % 2 == 1, ErrorKind::config, "base must be odd and >= 3");
        symbols_.reserve(static_cast<std::size_t>(base));
        for (int j = 0; j < base; ++j) {
            symbols_.push_back(symbol_of_index(base, j));
        }
    }

    int base() const noexcept { return base_; }
    std::span<const int> symbols() const noexcept { return symbols_; }
    int symbol(int index) const { return symbol_of_index(base_, index); }
    int index(int symbol) const { return index_of_symbol(base_, symbol); }

    /// Symbols that occupy a subcarrier, i.e. all but the trailing zero.
    std::span<const int> nonzero_symbols() const noexcept { return std::span<const int>(symbols_).first(symbols_.size() - 1); }

private:
    int base_;
    std::vector<int> symbols_;
};

/// Integer level floor(xi v / v_max + xi + 1/2), with v clipped to [-v_max, v_max]
/// and the result clamped to [0, b^D - 1].
inline std::int64_t quantization_level(const BalancedConfig &cfg, double v) {
    detail::require(!std::isnan(v), ErrorKind::domain, "cannot encode NaN");
    const double clipped = std::clamp(v, -cfg.v_max(), cfg.v_max());
    const double xi = static_cast<double>(cfg.bias());
    const auto level = static_cast<std::int64_t>(std::floor(xi * clipped / cfg.v_max() + xi + 0.5));
    return std::clamp<std::int64_t>(level, 0, cfg.levels() - 1);
}

inline NumeralSequence encode(const BalancedConfig &cfg, double v) {
    std::int64_t level = quantization_level(cfg, v);
    std::vector<int> numerals(static_cast<std::size_t>(cfg.digits()));
    for (auto it = numerals.rbegin(); it != numerals.rend(); ++it) {
        *it = static_cast<int>(level % cfg.base()) - cfg.max_symbol();
        level /= cfg.base();
    }
    return NumeralSequence(cfg.base(), std::move(numerals));
}

/// (v_max / xi) * sum_i seq_i b^i over possibly non-integer numerals.
inline double decode(const BalancedConfig &cfg, std::span<const double> msb_first) {
    detail::require(msb_first.size() == static_cast<std::size_t>(cfg.digits()), ErrorKind::shape,
                    "decode expects " + std::to_string(cfg.digits()) + " numerals, got " +
                        std::to_string(msb_first.size()));
    double weighted = 0.0;
    for (double x : msb_first) {
        weighted = weighted * cfg.base() + x;
    }
    return cfg.v_max() * weighted / static_cast<double>(cfg.bias());
}

inline double decode(const BalancedConfig &cfg, const NumeralSequence &seq) {
    std::vector<double> values(seq.msb_first().begin(), seq.msb_first().end());
    return decode(cfg, values);
}

inline double step_size(const BalancedConfig &cfg) { return cfg.step(); }

/// decode(encode(v)).
inline double quantize(const BalancedConfig &cfg, double v) {
    return cfg.v_max() * static_cast<double>(quantization_level(cfg, v) - cfg.bias()) /
           static_cast<double>(cfg.bias());
}

/// Element-wise mean of the numerals of K sequences (most-significant first).
inline std::vector<double> average_numerals(std::span<const NumeralSequence> sequences) {
    detail::require(!sequences.empty(), ErrorKind::domain, "average_numerals needs at least one sequence");
    const std::size_t digits = sequences.front().size();
    std::vector<std::int64_t> sums(digits, 0);
    for (const auto &seq : sequences) {
        detail::require(seq.size() == digits, ErrorKind::shape, "sequences have different lengths");
        for (std::size_t i = 0; i < digits; ++i) {
            sums[i] += seq.msb_first()[i];
        }
    }
    std::vector<double> means(digits);
    const auto count = static_cast<double>(sequences.size());
    for (std::size_t i = 0; i < digits; ++i) {
        means[i] = static_cast<double>(sums[i]) / count;
    }
    return means;
}

} // namespace oac
