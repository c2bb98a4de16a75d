// include/oac/config.hpp - Experiment configuration: JSON loading, validation, echo and hashing.

#pragma once

#include "oac/error.hpp"
#include "oac/feel/data.hpp"
#include "oac/feel/train.hpp"
#include "oac/link.hpp"
#include "oac/numeral_codec.hpp"
#include "oac/phy_channel.hpp"
#include "oac/resource_map.hpp"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>

namespace oac {

struct CodecSection {
    int base = 5;
    int digits = 2;
    double v_max = 0.1;
};

struct GridSection {
    int subcarriers = 1200;
    double subcarrier_spacing_hz = 15e3;
    int fft_size = 2048;
    double sample_rate_hz = 30.72e6;
    std::optional<int> max_symbols;
};

struct ChannelSection {
    std::string model = "iid_flat";
    int devices = 25;
    int antennas = 1;
    double snr_db = 20.0;
    double n_err = 3.0;
    std::optional<double> t_sync_s; // unset: 1 / (M * spacing)
    bool clamp_votes = false;
    double noise_scale = 1.0;
    std::string link = "ota";
};

struct LearningSection {
    std::string task = "synthetic";
    std::string model = "mlp";
    int hidden = 32;
    double learning_rate = 0.001;
    int batch_size = 64;
    double momentum = 0.9;
    int rounds = 100;
    int eval_every = 1;
    std::string partition = "homogeneous";
    std::string vmax_policy = "fixed";
    std::string mnist_dir;
    std::uint32_t train_limit = 0;
    std::uint32_t test_limit = 0;
    int cnn_filters = 8;
    int cnn_kernel = 5;
    int synthetic_classes = 10;
    int synthetic_features = 20;
    int synthetic_train_per_class = 500;
    int synthetic_test_per_class = 200;
    double synthetic_separation = 1.0;
};

struct RunSection {
    std::uint64_t seed = 1;
    std::int64_t trials = 100000;
    int threads = 1;
    int profiles = 10;
    std::string output_dir = "out";
};

/// Fully resolved experiment; the defaults reproduce the single-cell setup with
/// M = 1200, K = 25, SNR 20 dB, N_err = 3 and momentum 0.9.
struct ExperimentConfig {
    CodecSection codec;
    GridSection grid;
    ChannelSection channel;
    LearningSection learning;
    RunSection run;

    BalancedConfig balanced() const { return BalancedConfig(codec.base, codec.digits, codec.v_max); }

    double noise_var() const { return noise_var_from_snr_db(channel.snr_db); }

    double t_sync() const {
        return channel.t_sync_s.value_or(default_t_sync(grid.subcarriers, grid.subcarrier_spacing_hz));
    }

    ChannelConfig channel_config() const {
        ChannelConfig c;
        c.devices = channel.devices;
        c.antennas = channel.antennas;
        c.noise_var = noise_var();
        c.model = fading_model_from_string(channel.model);
        c.sync = {t_sync(), channel.n_err, grid.fft_size, grid.sample_rate_hz};
        c.subcarrier_spacing_hz = grid.subcarrier_spacing_hz;
        return c;
    }

    LinkConfig link_config() const {
        LinkConfig l;
        l.mode = link_mode_from_string(channel.link);
        l.subcarriers = grid.subcarriers;
        l.max_symbols = grid.max_symbols;
        l.channel = channel_config();
        l.detector = {channel.clamp_votes, channel.noise_scale};
        return l;
    }

    feel::LearningConfig learning_config() const {
        feel::LearningConfig l;
        l.learning_rate = learning.learning_rate;
        l.batch_size = learning.batch_size;
        l.momentum = learning.momentum;
        l.rounds = learning.rounds;
        l.eval_every = learning.eval_every;
        l.vmax_policy = feel::vmax_policy_from_string(learning.vmax_policy);
        return l;
    }

    /// Re-checks every cross-field invariant; throws a config error naming the field.
    void validate() const {
        auto field = [](const char *name, auto &&fn) {
            try {
                fn();
            } catch (const Error &e) {
                throw Error(e.kind(), std::string(name) + ": " + e.what());
            }
        };
        field("codec", [&] { (void)balanced(); });
        field("grid", [&] {
            detail::require(grid.subcarrier_spacing_hz > 0.0, ErrorKind::config, "subcarrier spacing must be positive");
            (void)GridConfig(grid.subcarriers, 1, balanced());
            if (grid.max_symbols) {
                detail::require(*grid.max_symbols >= 1, ErrorKind::config, "max_symbols must be >= 1");
            }
        });
        field("channel", [&] {
            channel_config().validate();
            detail::require(channel.noise_scale > 0.0, ErrorKind::config, "noise_scale must be positive");
            (void)link_mode_from_string(channel.link);
        });
        field("learning", [&] {
            learning_config().validate();
            (void)feel::partition_mode_from_string(learning.partition);
            detail::require(learning.task == "synthetic" || learning.task == "mnist", ErrorKind::config,
                            "task must be synthetic or mnist");
            detail::require(learning.model == "mlp" || learning.model == "softmax" || learning.model == "cnn",
                            ErrorKind::config, "model must be mlp, softmax or cnn");
            detail::require(learning.hidden >= 1, ErrorKind::config, "hidden must be >= 1");
        });
        field("run", [&] {
            detail::require(run.trials >= 2, ErrorKind::config, "trials must be >= 2");
            detail::require(run.threads >= 1, ErrorKind::config, "threads must be >= 1");
            detail::require(run.profiles >= 1, ErrorKind::config, "profiles must be >= 1");
        });
    }
};

using json = nlohmann::json;

inline json to_json(const ExperimentConfig &c) {
    json j;
    j["codec"] = {{"base", c.codec.base}, {"digits", c.codec.digits}, {"v_max", c.codec.v_max}};
    j["grid"] = {{"subcarriers", c.grid.subcarriers},
                 {"subcarrier_spacing_hz", c.grid.subcarrier_spacing_hz},
                 {"fft_size", c.grid.fft_size},
                 {"sample_rate_hz", c.grid.sample_rate_hz},
                 {"max_symbols", c.grid.max_symbols ? json(*c.grid.max_symbols) : json(nullptr)}};
    j["channel"] = {{"model", c.channel.model},
                    {"devices", c.channel.devices},
                    {"antennas", c.channel.antennas},
                    {"snr_db", c.channel.snr_db},
                    {"n_err", c.channel.n_err},
                    {"t_sync_s", c.channel.t_sync_s ? json(*c.channel.t_sync_s) : json(nullptr)},
                    {"clamp_votes", c.channel.clamp_votes},
                    {"noise_scale", c.channel.noise_scale},
                    {"link", c.channel.link}};
    const auto &l = c.learning;
    j["learning"] = {{"task", l.task},
                     {"model", l.model},
                     {"hidden", l.hidden},
                     {"learning_rate", l.learning_rate},
                     {"batch_size", l.batch_size},
                     {"momentum", l.momentum},
                     {"rounds", l.rounds},
                     {"eval_every", l.eval_every},
                     {"partition", l.partition},
                     {"vmax_policy", l.vmax_policy},
                     {"mnist_dir", l.mnist_dir},
                     {"train_limit", l.train_limit},
                     {"test_limit", l.test_limit},
                     {"cnn_filters", l.cnn_filters},
                     {"cnn_kernel", l.cnn_kernel},
                     {"synthetic_classes", l.synthetic_classes},
                     {"synthetic_features", l.synthetic_features},
                     {"synthetic_train_per_class", l.synthetic_train_per_class},
                     {"synthetic_test_per_class", l.synthetic_test_per_class},
                     {"synthetic_separation", l.synthetic_separation}};
    j["run"] = {{"seed", c.run.seed},
                {"trials", c.run.trials},
                {"threads", c.run.threads},
                {"profiles", c.run.profiles},
                {"output_dir", c.run.output_dir}};
    return j;
}

/// Derived quantities echoed next to the configuration.
inline json derived_json(const ExperimentConfig &c) {
    const auto codec = c.balanced();
    const GridConfig grid(c.grid.subcarriers, 1, codec);
    return {{"bias_xi", codec.bias()},
            {"step_delta", codec.step()},
            {"levels", codec.levels()},
            {"energy_scale", grid.energy_scale()},
            {"gradients_per_symbol", grid.gradients_per_symbol()},
            {"noise_var", c.noise_var()},
            {"t_sync_s", c.t_sync()}};
}

/// 64-bit FNV-1a over the canonical (key-sorted, compact) config dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig &c) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace config_detail {

template <typename T>
void read(const json &section, const std::string &path, std::string_view key, T &out, std::set<std::string> &seen) {
    const std::string k(key);
    seen.insert(k);
    if (!section.contains(k)) {
        return;
    }
    try {
        out = section.at(k).get<T>();
    } catch (const json::exception &e) {
        detail::fail(ErrorKind::config, path + "." + k + ": wrong type (" + e.what() + ")");
    }
}

template <typename T>
void read(const json &section, const std::string &path, std::string_view key, std::optional<T> &out,
          std::set<std::string> &seen) {
    const std::string k(key);
    seen.insert(k);
    if (!section.contains(k) || section.at(k).is_null()) {
        return;
    }
    try {
        out = section.at(k).get<T>();
    } catch (const json::exception &e) {
        detail::fail(ErrorKind::config, path + "." + k + ": wrong type (" + e.what() + ")");
    }
}

inline void reject_unknown(const json &section, const std::string &path, const std::set<std::string> &seen) {
    for (const auto &item : section.items()) {
        detail::require(seen.contains(item.key()), ErrorKind::config, "unknown field " + path + "." + item.key());
    }
}

inline const json &section(const json &root, const std::string &name) {
    static const json empty = json::object();
    if (!root.contains(name)) {
        return empty;
    }
    const auto &s = root.at(name);
    detail::require(s.is_object(), ErrorKind::config, name + ": expected an object");
    return s;
}

inline std::pair<int, int> line_column(std::string_view text, std::size_t byte) {
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

} // namespace config_detail

/// Builds a config from a JSON object. A run summary (with a "config" member) is accepted too.
inline ExperimentConfig config_from_json(const json &input) {
    detail::require(input.is_object(), ErrorKind::config, "configuration root must be a JSON object");
    const json &root = input.contains("config") && input.at("config").is_object() ? input.at("config") : input;
    using config_detail::read;
    ExperimentConfig c;
    for (const auto &item : root.items()) {
        static const std::set<std::string> sections{"codec", "grid", "channel", "learning", "run", "derived"};
        detail::require(sections.contains(item.key()), ErrorKind::config, "unknown section '" + item.key() + "'");
    }
    {
        std::set<std::string> seen;
        const auto &s = config_detail::section(root, "codec");
        read(s, "codec", "base", c.codec.base, seen);
        read(s, "codec", "digits", c.codec.digits, seen);
        read(s, "codec", "v_max", c.codec.v_max, seen);
        config_detail::reject_unknown(s, "codec", seen);
    }
    {
        std::set<std::string> seen;
        const auto &s = config_detail::section(root, "grid");
        read(s, "grid", "subcarriers", c.grid.subcarriers, seen);
        read(s, "grid", "subcarrier_spacing_hz", c.grid.subcarrier_spacing_hz, seen);
        read(s, "grid", "fft_size", c.grid.fft_size, seen);
        read(s, "grid", "sample_rate_hz", c.grid.sample_rate_hz, seen);
        read(s, "grid", "max_symbols", c.grid.max_symbols, seen);
        config_detail::reject_unknown(s, "grid", seen);
    }
    {
        std::set<std::string> seen;
        const auto &s = config_detail::section(root, "channel");
        read(s, "channel", "model", c.channel.model, seen);
        read(s, "channel", "devices", c.channel.devices, seen);
        read(s, "channel", "antennas", c.channel.antennas, seen);
        read(s, "channel", "snr_db", c.channel.snr_db, seen);
        read(s, "channel", "n_err", c.channel.n_err, seen);
        read(s, "channel", "t_sync_s", c.channel.t_sync_s, seen);
        read(s, "channel", "clamp_votes", c.channel.clamp_votes, seen);
        read(s, "channel", "noise_scale", c.channel.noise_scale, seen);
        read(s, "channel", "link", c.channel.link, seen);
        config_detail::reject_unknown(s, "channel", seen);
    }
    {
        std::set<std::string> seen;
        const auto &s = config_detail::section(root, "learning");
        auto &l = c.learning;
        read(s, "learning", "task", l.task, seen);
        read(s, "learning", "model", l.model, seen);
        read(s, "learning", "hidden", l.hidden, seen);
        read(s, "learning", "learning_rate", l.learning_rate, seen);
        read(s, "learning", "batch_size", l.batch_size, seen);
        read(s, "learning", "momentum", l.momentum, seen);
        read(s, "learning", "rounds", l.rounds, seen);
        read(s, "learning", "eval_every", l.eval_every, seen);
        read(s, "learning", "partition", l.partition, seen);
        read(s, "learning", "vmax_policy", l.vmax_policy, seen);
        read(s, "learning", "mnist_dir", l.mnist_dir, seen);
        read(s, "learning", "train_limit", l.train_limit, seen);
        read(s, "learning", "test_limit", l.test_limit, seen);
        read(s, "learning", "cnn_filters", l.cnn_filters, seen);
        read(s, "learning", "cnn_kernel", l.cnn_kernel, seen);
        read(s, "learning", "synthetic_classes", l.synthetic_classes, seen);
        read(s, "learning", "synthetic_features", l.synthetic_features, seen);
        read(s, "learning", "synthetic_train_per_class", l.synthetic_train_per_class, seen);
        read(s, "learning", "synthetic_test_per_class", l.synthetic_test_per_class, seen);
        read(s, "learning", "synthetic_separation", l.synthetic_separation, seen);
        config_detail::reject_unknown(s, "learning", seen);
    }
    {
        std::set<std::string> seen;
        const auto &s = config_detail::section(root, "run");
        read(s, "run", "seed", c.run.seed, seen);
        read(s, "run", "trials", c.run.trials, seen);
        read(s, "run", "threads", c.run.threads, seen);
        read(s, "run", "profiles", c.run.profiles, seen);
        read(s, "run", "output_dir", c.run.output_dir, seen);
        config_detail::reject_unknown(s, "run", seen);
    }
    c.validate();
    return c;
}

inline ExperimentConfig parse_config(std::string_view text, const std::string &origin = "<config>") {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error &e) {
        const auto [line, col] = config_detail::line_column(text, e.byte);
        detail::fail(ErrorKind::config, origin + ":" + std::to_string(line) + ":" + std::to_string(col) +
                                            ": parse error: " + e.what());
    }
    return config_from_json(j);
}

inline ExperimentConfig load_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    detail::require(static_cast<bool>(in), ErrorKind::config, "cannot open config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path.string());
}

} // namespace oac
