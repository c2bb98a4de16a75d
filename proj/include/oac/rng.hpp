// include/oac/rng.hpp - Counter-based random streams.
//
// Every random quantity in the simulator is drawn from a KeyedStream whose
// state is a pure function of (seed, role, indices...). Two streams with the
// same key produce the same sequence no matter which thread creates them or in
// which order, so serial and parallel runs agree bit-for-bit.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <numbers>

namespace oac {

/// Tag that separates the purposes a stream is used for.
enum class StreamRole : std::uint64_t {
    channel = 1,
    noise = 2,
    phase = 3,
    delay = 4,
    taps = 5,
    batch = 6,
    init = 7,
    data = 8,
    trial = 9,
    profile = 10,
    partition = 11,
};

namespace detail {

constexpr std::uint64_t golden_gamma = 0x9e3779b97f4a7c15ULL;

// SplitMix64 output function.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Derives a 64-bit key from a seed and a list of indices.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> indices) noexcept {
    // Indices go through a different affine map than the seed so that no index
    // value can cancel the running state.
    std::uint64_t h = detail::mix64(seed + detail::golden_gamma);
    for (std::uint64_t index : indices) {
        h = detail::mix64(h ^ detail::mix64(index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    }
    return h;
}

class KeyedStream {
public:
    using result_type = std::uint64_t;

    explicit KeyedStream(std::uint64_t key) noexcept : key_(key) {}

    KeyedStream(std::uint64_t seed, StreamRole role, std::initializer_list<std::uint64_t> indices) noexcept
        : key_(derive_key(derive_key(seed, {static_cast<std::uint64_t>(role)}), indices)) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        ++counter_;
        return detail::mix64(key_ + counter_ * detail::golden_gamma);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Standard normal (Marsaglia polar method, pairs cached).
    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u = 0.0;
        double v = 0.0;
        double s = 0.0;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

    /// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
    std::complex<double> complex_normal(double variance = 1.0) noexcept {
        const double sigma = std::sqrt(0.5 * variance);
        const double re = normal();
        const double im = normal();
        return {sigma * re, sigma * im};
    }

    /// Uniformly distributed point on the unit circle.
    std::complex<double> unit_phase() noexcept { return std::polar(1.0, 2.0 * std::numbers::pi * uniform()); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        // Lemire's multiply-shift; the residual bias is < n / 2^64.
        __extension__ using u128 = unsigned __int128;
        return static_cast<std::uint64_t>((static_cast<u128>((*this)()) * n) >> 64);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace oac
