// include/oac/phy_channel.hpp - Frequency-domain multi-antenna fading channel.
//
// Received cell (l, m) at the server is y = sum_k h_{k,l,m} x_{k,l,m} + n with
// h ~ CN(0, I_R) per subcarrier (iid_flat) or the frequency response of an ITU
// EPA tapped delay line (epa_tdl). Timing errors inside the cyclic prefix are
// modelled as the rotation exp(-i 2 pi l (d_k + N_err) / N) on h.

#pragma once

#include "oac/error.hpp"
#include "oac/resource_map.hpp"
#include "oac/rng.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oac {

using cplx = std::complex<double>;

enum class FadingModel { iid_flat, epa_tdl };

constexpr std::string_view to_string(FadingModel model) noexcept {
    return model == FadingModel::iid_flat ? "iid_flat" : "epa_tdl";
}

inline FadingModel fading_model_from_string(std::string_view name) {
    if (name == "iid_flat") {
        return FadingModel::iid_flat;
    }
    if (name == "epa_tdl" || name == "epa") {
        return FadingModel::epa_tdl;
    }
    detail::fail(ErrorKind::config, "unknown fading model '" + std::string(name) + "' (expected iid_flat or epa_tdl)");
}

struct SyncConfig {
    double t_sync_s = 0.0;         // largest arrival-time spread across devices
    double n_err = 0.0;            // DFT window offset at the server, in samples
    int fft_size = 2048;
    double sample_rate_hz = 30.72e6;
};

struct ChannelConfig {
    int devices = 1;
    int antennas = 1;
    double noise_var = 0.0;
    FadingModel model = FadingModel::iid_flat;
    SyncConfig sync;
    double subcarrier_spacing_hz = 15e3;

    void validate() const {
        detail::require(devices >= 1, ErrorKind::config, "device count K must be >= 1");
        detail::require(antennas >= 1, ErrorKind::config, "antenna count R must be >= 1");
        detail::require(std::isfinite(noise_var) && noise_var >= 0.0, ErrorKind::config, "noise variance must be >= 0");
        detail::require(sync.fft_size >= 1, ErrorKind::config, "fft size must be >= 1");
        detail::require(sync.sample_rate_hz > 0.0, ErrorKind::config, "sample rate must be positive");
        detail::require(sync.t_sync_s >= 0.0, ErrorKind::config, "T_sync must be >= 0");
        detail::require(subcarrier_spacing_hz > 0.0, ErrorKind::config, "subcarrier spacing must be positive");
    }
};

inline double noise_var_from_snr_db(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

/// Reciprocal of the occupied bandwidth M * spacing.
inline double default_t_sync(int subcarriers, double spacing_hz) { return 1.0 / (subcarriers * spacing_hz); }

struct GridDims {
    int subcarriers = 1;
    int symbols = 1;
};

struct PowerDelayProfile {
    std::vector<double> delays_s;
    std::vector<double> powers; // linear, summing to one
};

/// ITU Extended Pedestrian A, normalized to unit total power.
inline const PowerDelayProfile &epa_profile() {
    static const PowerDelayProfile profile = [] {
        constexpr std::array<double, 7> delays_ns{0, 30, 70, 90, 110, 190, 410};
        constexpr std::array<double, 7> powers_db{0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8};
        PowerDelayProfile p;
        double total = 0.0;
        for (std::size_t i = 0; i < delays_ns.size(); ++i) {
            p.delays_s.push_back(delays_ns[i] * 1e-9);
            p.powers.push_back(std::pow(10.0, powers_db[i] / 10.0));
            total += p.powers.back();
        }
        for (double &power : p.powers) {
            power /= total;
        }
        return p;
    }();
    return profile;
}

class ChannelRealization {
public:
    ChannelRealization(const ChannelConfig &cfg, GridDims dims, std::uint64_t seed)
        : cfg_(cfg), dims_(dims), seed_(seed), delays_(static_cast<std::size_t>(cfg.devices)) {
        cfg.validate();
        const double max_delay = cfg.sync.t_sync_s * cfg.sync.sample_rate_hz;
        for (int k = 0; k < cfg.devices; ++k) {
            KeyedStream stream(seed, StreamRole::delay, {static_cast<std::uint64_t>(k)});
            delays_[static_cast<std::size_t>(k)] = max_delay * stream.uniform();
        }
        if (cfg.model == FadingModel::epa_tdl) {
            const auto &pdp = epa_profile();
            taps_.resize(static_cast<std::size_t>(cfg.devices) * cfg.antennas * pdp.powers.size());
            std::size_t n = 0;
            for (int k = 0; k < cfg.devices; ++k) {
                for (int r = 0; r < cfg.antennas; ++r) {
                    KeyedStream stream(seed, StreamRole::taps,
                                       {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(r)});
                    for (double power : pdp.powers) {
                        taps_[n++] = stream.complex_normal(power);
                    }
                }
            }
        }
    }

    const ChannelConfig &config() const noexcept { return cfg_; }
    GridDims dims() const noexcept { return dims_; }
    int devices() const noexcept { return cfg_.devices; }
    int antennas() const noexcept { return cfg_.antennas; }

    /// Arrival delay d_k of device k in samples.
    double delay_samples(int device) const { return delays_.at(static_cast<std::size_t>(device)); }

    /// exp(-i 2 pi l (d_k + N_err) / N).
    cplx rotation(int device, int subcarrier) const {
        const double offset = delay_samples(device) + cfg_.sync.n_err;
        if (offset == 0.0) {
            return {1.0, 0.0};
        }
        return std::polar(1.0, -2.0 * std::numbers::pi * subcarrier * offset / cfg_.sync.fft_size);
    }

    /// y += h_{k,l,m} * x for all R antennas.
    void accumulate(int device, int subcarrier, int symbol, cplx x, std::span<cplx> y) const {
        check(device, subcarrier, symbol, y.size());
        const cplx gain = x * rotation(device, subcarrier);
        if (cfg_.model == FadingModel::iid_flat) {
            // Constant over OFDM symbols within a round.
            KeyedStream stream(seed_, StreamRole::channel,
                               {static_cast<std::uint64_t>(device), static_cast<std::uint64_t>(subcarrier)});
            for (auto &out : y) {
                out += stream.complex_normal() * gain;
            }
            return;
        }
        const auto &pdp = epa_profile();
        const std::size_t taps = pdp.powers.size();
        std::array<cplx, 8> phasors{};
        for (std::size_t p = 0; p < taps; ++p) {
            phasors[p] = std::polar(1.0, -2.0 * std::numbers::pi * subcarrier * cfg_.subcarrier_spacing_hz *
                                             pdp.delays_s[p]);
        }
        const cplx *g = taps_.data() + static_cast<std::size_t>(device) * cfg_.antennas * taps;
        for (auto &out : y) {
            cplx h{};
            for (std::size_t p = 0; p < taps; ++p) {
                h += g[p] * phasors[p];
            }
            out += h * gain;
            g += taps;
        }
    }

    /// h_{k,l,m} including the timing rotation.
    std::vector<cplx> response(int device, int subcarrier, int symbol) const {
        std::vector<cplx> h(static_cast<std::size_t>(cfg_.antennas));
        accumulate(device, subcarrier, symbol, {1.0, 0.0}, h);
        return h;
    }

private:
    void check(int device, int subcarrier, int symbol, std::size_t out_size) const {
        detail::require(device >= 0 && device < cfg_.devices, ErrorKind::index, "device index out of range");
        detail::require(subcarrier >= 0 && subcarrier < dims_.subcarriers && symbol >= 0 && symbol < dims_.symbols,
                        ErrorKind::index, "cell outside the channel grid");
        detail::require(out_size == static_cast<std::size_t>(cfg_.antennas), ErrorKind::shape,
                        "output vector length must equal the antenna count");
    }

    ChannelConfig cfg_;
    GridDims dims_;
    std::uint64_t seed_;
    std::vector<double> delays_;
    std::vector<cplx> taps_; // [device][antenna][tap]
};

inline ChannelRealization draw_channel(const ChannelConfig &cfg, GridDims dims, std::uint64_t seed) {
    return ChannelRealization(cfg, dims, seed);
}

/// Received R-vectors over an (M, S) grid.
class ReceivedGrid {
public:
    ReceivedGrid() = default;
    ReceivedGrid(GridDims dims, int antennas) { reset(dims, antennas); }

    void reset(GridDims dims, int antennas) {
        dims_ = dims;
        antennas_ = antennas;
        data_.assign(static_cast<std::size_t>(dims.subcarriers) * dims.symbols * antennas, cplx{});
    }

    GridDims dims() const noexcept { return dims_; }
    int antennas() const noexcept { return antennas_; }

    std::span<const cplx> at(int subcarrier, int symbol) const { return {data_.data() + offset(subcarrier, symbol), size()}; }
    std::span<cplx> at(int subcarrier, int symbol) { return {data_.data() + offset(subcarrier, symbol), size()}; }
    std::span<const cplx> at(Cell cell) const { return at(cell.subcarrier, cell.symbol); }

    /// ||y_{l,m}||^2.
    double energy(Cell cell) const {
        double e = 0.0;
        for (const cplx &v : at(cell)) {
            e += std::norm(v);
        }
        return e;
    }

private:
    std::size_t size() const noexcept { return static_cast<std::size_t>(antennas_); }
    std::size_t offset(int subcarrier, int symbol) const {
        detail::require(subcarrier >= 0 && subcarrier < dims_.subcarriers && symbol >= 0 && symbol < dims_.symbols,
                        ErrorKind::index, "cell outside the received grid");
        return (static_cast<std::size_t>(symbol) * dims_.subcarriers + subcarrier) * antennas_;
    }

    GridDims dims_{};
    int antennas_ = 0;
    std::vector<cplx> data_;
};

/// Fills `out` with sum_k h_k x_k + n; n ~ CN(0, noise_var I_R) keyed by (seed, cell).
inline void superpose_into(std::span<const ActivationFrame> frames, const ChannelRealization &chan, double noise_var,
                           std::uint64_t seed, ReceivedGrid &out) {
    detail::require(frames.size() == static_cast<std::size_t>(chan.devices()), ErrorKind::shape,
                    std::to_string(frames.size()) + " frames supplied for " + std::to_string(chan.devices()) +
                        " devices");
    const GridDims dims = chan.dims();
    out.reset(dims, chan.antennas());
    if (noise_var > 0.0) {
        for (int m = 0; m < dims.symbols; ++m) {
            for (int l = 0; l < dims.subcarriers; ++l) {
                KeyedStream stream(seed, StreamRole::noise, {static_cast<std::uint64_t>(m), static_cast<std::uint64_t>(l)});
                for (cplx &v : out.at(l, m)) {
                    v = stream.complex_normal(noise_var);
                }
            }
        }
    }
    for (const auto &frame : frames) {
        detail::require(frame.device >= 0 && frame.device < chan.devices(), ErrorKind::shape,
                        "frame device index outside the channel realization");
        for (const auto &entry : frame.entries) {
            chan.accumulate(frame.device, entry.cell.subcarrier, entry.cell.symbol, entry.value,
                            out.at(entry.cell.subcarrier, entry.cell.symbol));
        }
    }
}

inline ReceivedGrid superpose(std::span<const ActivationFrame> frames, const ChannelRealization &chan,
                              const ChannelConfig &cfg, std::uint64_t seed) {
    ReceivedGrid out;
    superpose_into(frames, chan, cfg.noise_var, seed, out);
    return out;
}

} // namespace oac
