// include/oac/feel/train.hpp - FedSGD over the simulated over-the-air link.
//
// Each round every device computes a mini-batch gradient at the shared model,
// the link returns one estimate of their average, and every device applies the
// same momentum update, so all model copies stay bit-identical.

#pragma once

#include "oac/error.hpp"
#include "oac/feel/data.hpp"
#include "oac/feel/models.hpp"
#include "oac/link.hpp"
#include "oac/numeral_codec.hpp"
#include "oac/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace oac::feel {

enum class VmaxPolicy {
    fixed,    // configured v_max every round; larger coordinates are clipped
    adaptive, // previous round's largest |gradient| (first round: configured v_max)
};

inline VmaxPolicy vmax_policy_from_string(std::string_view name) {
    if (name == "fixed") {
        return VmaxPolicy::fixed;
    }
    if (name == "adaptive" || name == "max-abs") {
        return VmaxPolicy::adaptive;
    }
    oac::detail::fail(ErrorKind::config, "unknown v_max policy '" + std::string(name) + "' (expected fixed or adaptive)");
}

constexpr std::string_view to_string(VmaxPolicy p) noexcept { return p == VmaxPolicy::fixed ? "fixed" : "adaptive"; }

struct LearningConfig {
    double learning_rate = 0.001;
    int batch_size = 64;
    double momentum = 0.9;
    int rounds = 100;
    VmaxPolicy vmax_policy = VmaxPolicy::fixed;
    /// Evaluate test accuracy every this many rounds (and always at the last round).
    int eval_every = 1;

    void validate() const {
        oac::detail::require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorKind::config,
                             "learning rate must be positive");
        oac::detail::require(batch_size >= 1, ErrorKind::config, "batch size must be >= 1");
        oac::detail::require(momentum >= 0.0 && momentum < 1.0, ErrorKind::config, "momentum must be in [0, 1)");
        oac::detail::require(rounds >= 1, ErrorKind::config, "rounds must be >= 1");
        oac::detail::require(eval_every >= 1, ErrorKind::config, "eval_every must be >= 1");
    }
};

struct RoundReport {
    int round = 0;
    double true_gradient_norm = 0.0; // ||g_bar||_2
    double estimate_error = 0.0;     // ||g_hat - g_bar||_2
    double quantization_error = 0.0; // ||quantized average - g_bar||_2
    std::int64_t clipped = 0;
    double v_max = 0.0;
    double train_loss = 0.0;     // mean mini-batch loss over devices
    double test_accuracy = -1.0; // -1 when not evaluated this round
};

class TrainingDiverged : public Error {
public:
    TrainingDiverged(const std::string &message, std::vector<RoundReport> reports)
        : Error(ErrorKind::divergence, message), reports_(std::move(reports)) {}

    const std::vector<RoundReport> &reports() const noexcept { return reports_; }

private:
    std::vector<RoundReport> reports_;
};

/// n_b sample indices drawn without replacement from `part` (all of it when smaller).
inline std::vector<std::size_t> sample_batch(std::span<const std::size_t> part, int batch_size, std::uint64_t seed,
                                             int round, int device) {
    oac::detail::require(!part.empty(), ErrorKind::config, "device " + std::to_string(device) + " has an empty partition");
    std::vector<std::size_t> pool(part.begin(), part.end());
    const std::size_t take = std::min(pool.size(), static_cast<std::size_t>(batch_size));
    KeyedStream stream(seed, StreamRole::batch, {static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(device)});
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(stream.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(take);
    return pool;
}

struct LocalGradients {
    std::vector<std::vector<double>> gradients; // [device][q]
    std::vector<double> losses;
};

/// g_k = (1/n_b) sum over batch k of grad f(w; x, y).
inline LocalGradients local_gradients(const Model &model, std::span<const double> w, const Dataset &data,
                                      std::span<const std::vector<std::size_t>> batches) {
    LocalGradients out;
    out.gradients.resize(batches.size());
    out.losses.resize(batches.size());
    for (std::size_t k = 0; k < batches.size(); ++k) {
        oac::detail::require(!batches[k].empty(), ErrorKind::config, "device " + std::to_string(k) + " has an empty batch");
        out.gradients[k].assign(model.parameter_count(), 0.0);
        out.losses[k] = model.loss_and_gradient(w, data, batches[k], out.gradients[k]);
    }
    return out;
}

/// Average of the devices' gradients as seen through the link.
inline LinkResult oac_round(std::span<const std::vector<double>> gradients, const BalancedConfig &codec,
                            const LinkConfig &link, std::uint64_t seed) {
    return OacLink(codec, link).run(gradients, seed);
}

struct TrainSetup {
    LearningConfig learning;
    BalancedConfig codec{5, 2, 0.1};
    LinkConfig link;
    std::uint64_t seed = 1;
};

struct TrainResult {
    std::vector<RoundReport> reports;
    std::vector<double> parameters;
    double final_accuracy = 0.0;
};

namespace train_detail {

inline double norm2(std::span<const double> a) {
    double s = 0.0;
    for (double v : a) {
        s += v * v;
    }
    return std::sqrt(s);
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    return std::sqrt(s);
}

} // namespace train_detail

/// Runs `rounds` FedSGD rounds. `on_round` (optional) sees every report as it is produced.
inline TrainResult train(const TrainSetup &setup, const Model &model, const Dataset &train_data, const Dataset &test_data,
                         std::span<const std::vector<std::size_t>> partition,
                         const std::function<void(const RoundReport &)> &on_round = {}) {
    const auto &lc = setup.learning;
    lc.validate();
    oac::detail::require(static_cast<int>(partition.size()) == setup.link.channel.devices, ErrorKind::config,
                         "partition has " + std::to_string(partition.size()) + " devices but the link expects " +
                             std::to_string(setup.link.channel.devices));
    TrainResult result;
    std::vector<double> w = model.initial_parameters(setup.seed);
    std::vector<double> velocity(w.size(), 0.0);
    double v_max = setup.codec.v_max();
    const auto devices = static_cast<int>(partition.size());

    for (int t = 0; t < lc.rounds; ++t) {
        std::vector<std::vector<std::size_t>> batches;
        batches.reserve(partition.size());
        for (int k = 0; k < devices; ++k) {
            batches.push_back(sample_batch(partition[static_cast<std::size_t>(k)], lc.batch_size, setup.seed, t, k));
        }
        const auto local = local_gradients(model, w, train_data, batches);
        const auto finite_value = [](double v) { return std::isfinite(v); };
        const bool local_finite =
            std::all_of(local.losses.begin(), local.losses.end(), finite_value) &&
            std::all_of(local.gradients.begin(), local.gradients.end(),
                        [&](const auto &g) { return std::all_of(g.begin(), g.end(), finite_value); });
        if (!local_finite) {
            throw TrainingDiverged("training diverged at round " + std::to_string(t) +
                                       " (non-finite local loss or gradient)",
                                   result.reports);
        }

        const BalancedConfig codec(setup.codec.base(), setup.codec.digits(), v_max);
        const auto link = oac_round(local.gradients, codec, setup.link,
                                    derive_key(setup.seed, {static_cast<std::uint64_t>(StreamRole::trial),
                                                            static_cast<std::uint64_t>(t)}));

        RoundReport report;
        report.round = t;
        report.true_gradient_norm = train_detail::norm2(link.true_average);
        report.estimate_error = train_detail::distance(link.estimate, link.true_average);
        report.quantization_error = train_detail::distance(link.quantized_average, link.true_average);
        report.clipped = link.clipped;
        report.v_max = v_max;
        double loss = 0.0;
        for (double l : local.losses) {
            loss += l;
        }
        report.train_loss = loss / devices;

        for (std::size_t q = 0; q < w.size(); ++q) {
            velocity[q] = lc.momentum * velocity[q] + link.estimate[q];
            w[q] -= lc.learning_rate * velocity[q];
        }

        const bool finite = std::isfinite(report.train_loss) &&
                            std::all_of(w.begin(), w.end(), [](double v) { return std::isfinite(v); });
        if (t % lc.eval_every == 0 || t + 1 == lc.rounds || !finite) {
            report.test_accuracy = finite ? model.accuracy(w, test_data) : 0.0;
        }
        result.reports.push_back(report);
        if (on_round) {
            on_round(report);
        }
        if (!finite) {
            throw TrainingDiverged("training diverged at round " + std::to_string(t) + " (non-finite loss or weights)",
                                   result.reports);
        }

        if (lc.vmax_policy == VmaxPolicy::adaptive) {
            double largest = 0.0;
            for (const auto &g : local.gradients) {
                for (double v : g) {
                    largest = std::max(largest, std::abs(v));
                }
            }
            if (largest > 0.0) {
                v_max = largest;
            }
        }
    }
    result.final_accuracy = result.reports.back().test_accuracy;
    result.parameters = std::move(w);
    return result;
}

} // namespace oac::feel
