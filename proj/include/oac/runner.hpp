// include/oac/runner.hpp - Subcommand bodies shared by the command-line tool and the tests.
//
// Every file written here starts with the resolved configuration, so a result
// can always be traced back to the exact run that produced it.

#pragma once

#include "oac/analysis.hpp"
#include "oac/config.hpp"
#include "oac/error.hpp"
#include "oac/feel/data.hpp"
#include "oac/feel/models.hpp"
#include "oac/feel/train.hpp"
#include "oac/link.hpp"
#include "oac/numeral_codec.hpp"
#include "oac/rng.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace oac::runner {

/// Process exit codes.
enum ExitCode : int { ok = 0, config_error = 2, capacity_error = 3, divergence_error = 4 };

inline int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::capacity: return capacity_error;
    case ErrorKind::divergence: return divergence_error;
    default: return config_error;
    }
}

inline json error_json(ErrorKind kind, const std::string &message) {
    return {{"error", {{"kind", std::string(to_string(kind))}, {"message", message}}}, {"exit_code", exit_code_for(kind)}};
}

/// OAC_OUTPUT_DIR wins over the configured directory.
inline std::filesystem::path resolve_output_dir(const ExperimentConfig &cfg) {
    if (const char *env = std::getenv("OAC_OUTPUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return cfg.run.output_dir;
}

/// Fixed-notation formatting with `digits` decimals; shortest round-trip form when digits < 0.
inline std::string format_number(double v, int digits = -1) {
    char buf[64];
    if (digits >= 0) {
        std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    } else {
        std::snprintf(buf, sizeof buf, "%.17g", v);
    }
    return buf;
}

class ResultSink {
public:
    ResultSink(const ExperimentConfig &cfg, std::string command)
        : ResultSink(cfg, std::move(command), resolve_output_dir(cfg)) {}

    ResultSink(const ExperimentConfig &cfg, std::string command, std::filesystem::path dir)
        : cfg_(cfg), command_(std::move(command)), dir_(std::move(dir)) {
        std::error_code ec;
        std::filesystem::create_directories(dir_, ec);
        detail::require(!ec, ErrorKind::io, "cannot create output directory " + dir_.string() + ": " + ec.message());
    }

    const std::filesystem::path &dir() const noexcept { return dir_; }

    /// Opens `name` and writes the provenance comment lines plus the CSV header.
    std::ofstream open_csv(const std::string &name, const std::string &header) const {
        const auto path = dir_ / name;
        std::ofstream out(path);
        detail::require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
        out << "# command: " << command_ << '\n'
            << "# config_hash: " << config_hash(cfg_) << '\n'
            << "# config: " << to_json(cfg_).dump() << '\n'
            << header << '\n';
        return out;
    }

    /// Writes `body` merged with the config echo to `name`; returns the full document.
    json write_summary(const std::string &name, json body) const {
        body["command"] = command_;
        body["config_hash"] = config_hash(cfg_);
        body["config"] = to_json(cfg_);
        body["derived"] = derived_json(cfg_);
        const auto path = dir_ / name;
        std::ofstream out(path);
        detail::require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
        out << body.dump(2) << '\n';
        return body;
    }

private:
    ExperimentConfig cfg_;
    std::string command_;
    std::filesystem::path dir_;
};

// ------------------------------------------------------------------ codec

inline json codec_encode(const BalancedConfig &codec, double v) {
    const auto seq = encode(codec, v);
    const std::vector<int> numerals(seq.msb_first().begin(), seq.msb_first().end());
    return {{"op", "encode"},
            {"value", v},
            {"level", quantization_level(codec, v)},
            {"numerals", numerals},
            {"quantized", quantize(codec, v)},
            {"clipped", std::abs(v) > codec.v_max()}};
}

inline json codec_decode(const BalancedConfig &codec, std::span<const double> numerals_msb_first) {
    return {{"op", "decode"},
            {"numerals", std::vector<double>(numerals_msb_first.begin(), numerals_msb_first.end())},
            {"value", decode(codec, numerals_msb_first)}};
}

inline json codec_step(const BalancedConfig &codec) {
    return {{"op", "step"},
            {"base", codec.base()},
            {"digits", codec.digits()},
            {"v_max", codec.v_max()},
            {"levels", codec.levels()},
            {"bias", codec.bias()},
            {"step", step_size(codec)}};
}

/// Parses "1,-2,2" or "1 -2 2".
inline std::vector<double> parse_list(const std::string &text) {
    std::string s = text;
    for (char &c : s) {
        if (c == ',' || c == ';' || c == '\t') {
            c = ' ';
        }
    }
    std::istringstream in(s);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(tok, &used);
        } catch (const std::exception &) {
            used = 0;
        }
        detail::require(used == tok.size(), ErrorKind::config, "not a number: '" + tok + "'");
        out.push_back(v);
    }
    return out;
}

/// One row per line (comma or whitespace separated); blank lines and '#' comments are skipped.
inline std::vector<std::vector<double>> read_rows(const std::filesystem::path &path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorKind::config, "cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            rows.push_back(parse_list(line));
        } catch (const Error &e) {
            detail::fail(ErrorKind::config, path.string() + ":" + std::to_string(number) + ": " + e.what());
        }
        detail::require(rows.back().size() == rows.front().size(), ErrorKind::shape,
                        path.string() + ":" + std::to_string(number) + ": expected " +
                            std::to_string(rows.front().size()) + " values");
    }
    detail::require(!rows.empty(), ErrorKind::config, path.string() + " holds no rows");
    return rows;
}

// ---------------------------------------------------------------- linksim

/// gradients[k] is device k's vector; K is taken from the number of rows.
inline LinkResult run_linksim(ExperimentConfig cfg, const std::vector<std::vector<double>> &gradients,
                              const ResultSink *sink = nullptr, int precision = 6) {
    cfg.channel.devices = static_cast<int>(gradients.size());
    cfg.validate();
    const OacLink link(cfg.balanced(), cfg.link_config());
    auto result = link.run(gradients, cfg.run.seed);
    if (sink != nullptr) {
        auto out = sink->open_csv("linksim.csv", "q,true_average,quantized_average,estimate");
        for (std::size_t q = 0; q < result.estimate.size(); ++q) {
            out << q << ',' << format_number(result.true_average[q], precision) << ','
                << format_number(result.quantized_average[q], precision) << ','
                << format_number(result.estimate[q], precision) << '\n';
        }
        sink->write_summary("linksim_summary.json", {{"devices", cfg.channel.devices},
                                                     {"gradients", result.estimate.size()},
                                                     {"clipped", result.clipped},
                                                     {"estimate", result.estimate},
                                                     {"true_average", result.true_average},
                                                     {"quantized_average", result.quantized_average}});
    }
    return result;
}

// ------------------------------------------------------------- mse-verify

struct MseRow {
    int param_set_id = 0;
    std::uint64_t seed = 0;
    std::vector<double> gradients;
    MseReport report;
};

/// `count` gradient profiles with K values drawn uniformly from [-v_max, v_max].
inline std::vector<std::vector<double>> random_profiles(int count, int devices, double v_max, std::uint64_t seed) {
    std::vector<std::vector<double>> sets;
    for (int p = 0; p < count; ++p) {
        KeyedStream stream(seed, StreamRole::profile, {static_cast<std::uint64_t>(p)});
        std::vector<double> g(static_cast<std::size_t>(devices));
        for (double &v : g) {
            v = stream.uniform(-v_max, v_max);
        }
        sets.push_back(std::move(g));
    }
    return sets;
}

inline MseRow mse_row(const ExperimentConfig &cfg, int id, const std::vector<double> &gradients) {
    MonteCarloConfig mc;
    mc.codec = cfg.balanced();
    mc.channel = cfg.channel_config();
    mc.channel.devices = static_cast<int>(gradients.size());
    mc.detector = {cfg.channel.clamp_votes, cfg.channel.noise_scale};
    mc.gradients = gradients;
    mc.trials = cfg.run.trials;
    mc.seed = derive_key(cfg.run.seed, {static_cast<std::uint64_t>(id)});
    mc.threads = cfg.run.threads;
    return {id, mc.seed, gradients, monte_carlo_mse(mc)};
}

/// Empty `sets` means cfg.run.profiles random profiles of cfg.channel.devices values.
inline std::vector<MseRow> run_mse_verify(const ExperimentConfig &cfg, std::vector<std::vector<double>> sets,
                                          const ResultSink *sink = nullptr,
                                          const std::function<void(const MseRow &)> &on_row = {}) {
    cfg.validate();
    if (sets.empty()) {
        sets = random_profiles(cfg.run.profiles, cfg.channel.devices, cfg.codec.v_max, cfg.run.seed);
    }
    std::ofstream csv;
    if (sink != nullptr) {
        csv = sink->open_csv("mse_verify.csv", "param_set_id,theory_var,emp_var,emp_var_se,theory_bias2,emp_mse,trials,seed");
    }
    std::vector<MseRow> rows;
    json summary_rows = json::array();
    for (std::size_t i = 0; i < sets.size(); ++i) {
        auto row = mse_row(cfg, static_cast<int>(i), sets[i]);
        const auto &r = row.report;
        if (sink != nullptr) {
            csv << row.param_set_id << ',' << format_number(r.theory.variance) << ',' << format_number(r.variance.value)
                << ',' << format_number(r.variance.se) << ',' << format_number(r.theory.squared_bias) << ','
                << format_number(r.mse.value) << ',' << r.trials << ',' << row.seed << '\n';
            csv.flush();
            summary_rows.push_back({{"param_set_id", row.param_set_id},
                                    {"seed", row.seed},
                                    {"gradients", row.gradients},
                                    {"true_average", r.true_average},
                                    {"quantized_average", r.quantized_average},
                                    {"theory_var", r.theory.variance},
                                    {"theory_bias2", r.theory.squared_bias},
                                    {"theory_mse", r.theory.mse},
                                    {"emp_mean", r.mean.value},
                                    {"emp_mean_se", r.mean.se},
                                    {"emp_var", r.variance.value},
                                    {"emp_var_se", r.variance.se},
                                    {"emp_mse", r.mse.value},
                                    {"emp_mse_se", r.mse.se}});
        }
        if (on_row) {
            on_row(row);
        }
        rows.push_back(std::move(row));
    }
    if (sink != nullptr) {
        sink->write_summary("mse_verify_summary.json", {{"param_sets", summary_rows}});
    }
    return rows;
}

// ------------------------------------------------------------------- feel

struct FeelData {
    feel::Dataset train;
    feel::Dataset test;
};

inline FeelData load_feel_data(const ExperimentConfig &cfg) {
    const auto &l = cfg.learning;
    if (l.task == "mnist") {
        detail::require(!l.mnist_dir.empty(), ErrorKind::config, "learning.mnist_dir must be set for the mnist task");
        auto tt = feel::load_mnist(l.mnist_dir, l.train_limit, l.test_limit);
        return {std::move(tt.train), std::move(tt.test)};
    }
    feel::BlobSpec spec;
    spec.classes = l.synthetic_classes;
    spec.features = l.synthetic_features;
    spec.train_per_class = l.synthetic_train_per_class;
    spec.test_per_class = l.synthetic_test_per_class;
    spec.separation = l.synthetic_separation;
    auto tt = feel::make_blobs(spec, cfg.run.seed);
    const feel::Standardizer scale(tt.train);
    scale.apply(tt.train);
    scale.apply(tt.test);
    return {std::move(tt.train), std::move(tt.test)};
}

inline std::unique_ptr<feel::Model> make_model(const ExperimentConfig &cfg, const feel::Dataset &data) {
    const auto &l = cfg.learning;
    if (l.model == "softmax") {
        return std::make_unique<feel::SoftmaxRegression>(data.features, data.classes);
    }
    if (l.model == "cnn") {
        detail::require(data.height > 0 && data.width > 0, ErrorKind::config, "the cnn model needs image data");
        return std::make_unique<feel::Cnn>(data.height, data.width, l.cnn_filters, l.cnn_kernel, data.classes);
    }
    return std::make_unique<feel::Mlp>(data.features, l.hidden, data.classes);
}

inline feel::TrainSetup train_setup(const ExperimentConfig &cfg) {
    feel::TrainSetup setup;
    setup.learning = cfg.learning_config();
    setup.codec = cfg.balanced();
    setup.link = cfg.link_config();
    setup.seed = cfg.run.seed;
    return setup;
}

inline std::string round_csv_line(const feel::RoundReport &r) {
    std::ostringstream line;
    line << r.round << ',' << format_number(r.train_loss) << ','
         << (r.test_accuracy < 0.0 ? std::string() : format_number(r.test_accuracy)) << ','
         << format_number(r.true_gradient_norm) << ',' << format_number(r.estimate_error) << ','
         << format_number(r.quantization_error) << ',' << r.clipped << ',' << format_number(r.v_max);
    return line.str();
}

/// Trains and writes feel_rounds.csv plus feel_summary.json. Divergence is rethrown
/// after the summary records it.
inline feel::TrainResult run_feel(const ExperimentConfig &cfg, const ResultSink *sink = nullptr,
                                  const std::function<void(const feel::RoundReport &)> &on_round = {}) {
    cfg.validate();
    const auto data = load_feel_data(cfg);
    const auto model = make_model(cfg, data.train);
    const auto partition = feel::make_partition(
        {feel::partition_mode_from_string(cfg.learning.partition), cfg.channel.devices}, data.train, cfg.run.seed);

    std::ofstream csv;
    if (sink != nullptr) {
        csv = sink->open_csv("feel_rounds.csv",
                             "round,train_loss,test_accuracy,true_gradient_norm,estimate_error,quantization_error,"
                             "clipped,v_max");
    }
    auto observe = [&](const feel::RoundReport &r) {
        if (sink != nullptr) {
            csv << round_csv_line(r) << '\n';
            csv.flush();
        }
        if (on_round) {
            on_round(r);
        }
    };
    auto summarize = [&](const std::vector<feel::RoundReport> &reports, bool diverged, std::span<const double> w) {
        if (sink == nullptr) {
            return;
        }
        double best = 0.0;
        for (const auto &r : reports) {
            best = std::max(best, r.test_accuracy);
        }
        sink->write_summary("feel_summary.json", {{"model", std::string(model->name())},
                                                  {"parameters", model->parameter_count()},
                                                  {"train_samples", data.train.size()},
                                                  {"test_samples", data.test.size()},
                                                  {"rounds_completed", reports.size()},
                                                  {"diverged", diverged},
                                                  {"final_accuracy", reports.empty() ? 0.0 : reports.back().test_accuracy},
                                                  {"best_accuracy", best},
                                                  {"final_parameters_norm", [&] {
                                                       double s = 0.0;
                                                       for (double v : w) {
                                                           s += v * v;
                                                       }
                                                       return std::sqrt(s);
                                                   }()}});
    };
    try {
        auto result = feel::train(train_setup(cfg), *model, data.train, data.test, partition, observe);
        summarize(result.reports, false, result.parameters);
        return result;
    } catch (const feel::TrainingDiverged &e) {
        summarize(e.reports(), true, {});
        throw;
    }
}

} // namespace oac::runner
