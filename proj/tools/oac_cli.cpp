// tools/oac_cli.cpp - Command-line front end: codec, linksim, mse-verify, feel.

#include "oac/config.hpp"
#include "oac/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using oac::ExperimentConfig;
using oac::json;
namespace runner = oac::runner;

// Flags that override individual config fields; unset flags leave the file (or default) value.
struct Overrides {
    std::string config_path;
    std::optional<int> base;
    std::optional<int> digits;
    std::optional<double> v_max;
    std::optional<int> antennas;
    std::optional<int> devices;
    std::optional<double> snr_db;
    std::optional<double> n_err;
    std::optional<std::string> model;
    std::optional<std::string> link;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> trials;
    std::optional<int> threads;
    std::optional<std::string> output_dir;

    void attach(CLI::App &app, bool channel_flags) {
        app.add_option("--config", config_path, "JSON experiment configuration");
        app.add_option("--base", base, "odd numeral base (>= 3)");
        app.add_option("--digits", digits, "numerals per gradient");
        app.add_option("--vmax", v_max, "clipping range");
        app.add_option("--seed", seed, "master seed");
        app.add_option("--out", output_dir, "output directory (OAC_OUTPUT_DIR takes precedence)");
        if (channel_flags) {
            app.add_option("--antennas", antennas, "receive antennas R");
            app.add_option("--devices", devices, "edge devices K");
            app.add_option("--snr-db", snr_db, "per-device SNR in dB");
            app.add_option("--n-err", n_err, "timing error in samples");
            app.add_option("--channel", model, "fading model: iid_flat or epa_tdl");
            app.add_option("--link", link, "link mode: exact, bypass or ota");
            app.add_option("--trials", trials, "Monte Carlo trials");
            app.add_option("--threads", threads, "worker threads");
        }
    }

    ExperimentConfig resolve() const {
        ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : oac::load_config(config_path);
        auto set = [](auto &field, const auto &value) {
            if (value) {
                field = *value;
            }
        };
        set(c.codec.base, base);
        set(c.codec.digits, digits);
        set(c.codec.v_max, v_max);
        set(c.channel.antennas, antennas);
        set(c.channel.devices, devices);
        set(c.channel.snr_db, snr_db);
        set(c.channel.n_err, n_err);
        set(c.channel.model, model);
        set(c.channel.link, link);
        set(c.run.seed, seed);
        set(c.run.trials, trials);
        set(c.run.threads, threads);
        set(c.run.output_dir, output_dir);
        c.validate();
        return c;
    }
};

int fail(oac::ErrorKind kind, const std::string &message) {
    const auto doc = runner::error_json(kind, message);
    std::cerr << doc.dump() << '\n';
    return doc["exit_code"].get<int>();
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Balanced-numeral over-the-air gradient aggregation simulator"};
    app.require_subcommand(1);

    // codec
    auto *codec_cmd = app.add_subcommand("codec", "encode, decode and step-size queries (JSON lines on stdout)");
    Overrides codec_opts;
    codec_opts.attach(*codec_cmd, false);
    std::vector<double> encode_values;
    std::vector<std::string> decode_lists;
    bool want_step = false;
    codec_cmd->add_option("--encode", encode_values, "value(s) to encode")->allow_extra_args(false);
    codec_cmd->add_option("--decode", decode_lists, "MSB-first numerals, e.g. 1,-2,2");
    codec_cmd->add_flag("--step", want_step, "print the quantization step");

    // linksim
    auto *link_cmd = app.add_subcommand("linksim", "one aggregation round for gradients read from a file");
    Overrides link_opts;
    link_opts.attach(*link_cmd, true);
    std::string gradients_path;
    bool ideal_link = false;
    int precision = 6;
    link_cmd->add_option("--gradients", gradients_path, "one row per device, comma separated")->required();
    link_cmd->add_flag("--ideal-link", ideal_link, "skip the channel (exact vote counts)");
    link_cmd->add_option("--precision", precision, "decimals in the printed estimates");

    // mse-verify
    auto *mse_cmd = app.add_subcommand("mse-verify", "Monte Carlo check of the variance and MSE expressions");
    Overrides mse_opts;
    mse_opts.attach(*mse_cmd, true);
    std::string sets_path;
    std::optional<int> profiles;
    mse_cmd->add_option("--param-sets", sets_path, "one gradient profile (K values) per line");
    mse_cmd->add_option("--profiles", profiles, "random profiles when no file is given");

    // feel
    auto *feel_cmd = app.add_subcommand("feel", "federated training over the simulated link");
    Overrides feel_opts;
    feel_opts.attach(*feel_cmd, true);
    std::optional<std::string> partition;
    std::optional<int> rounds;
    std::optional<std::string> task;
    std::optional<std::string> mnist_dir;
    std::optional<std::string> learner;
    feel_cmd->add_option("--partition", partition, "homo or hetero");
    feel_cmd->add_option("--rounds", rounds, "communication rounds");
    feel_cmd->add_option("--task", task, "synthetic or mnist");
    feel_cmd->add_option("--mnist-dir", mnist_dir, "directory holding the IDX files");
    feel_cmd->add_option("--model", learner, "mlp, softmax or cnn");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        return fail(oac::ErrorKind::config, e.what());
    }

    try {
        if (*codec_cmd) {
            const auto cfg = codec_opts.resolve();
            const auto codec = cfg.balanced();
            if (encode_values.empty() && decode_lists.empty()) {
                want_step = true;
            }
            for (double v : encode_values) {
                std::cout << runner::codec_encode(codec, v).dump() << '\n';
            }
            for (const auto &list : decode_lists) {
                const auto numerals = runner::parse_list(list);
                std::cout << runner::codec_decode(codec, numerals).dump() << '\n';
            }
            if (want_step) {
                std::cout << runner::codec_step(codec).dump() << '\n';
            }
            return runner::ok;
        }
        if (*link_cmd) {
            auto cfg = link_opts.resolve();
            if (ideal_link) {
                cfg.channel.link = "bypass";
            }
            const auto rows = runner::read_rows(gradients_path);
            cfg.channel.devices = static_cast<int>(rows.size());
            const runner::ResultSink sink(cfg, "linksim");
            const auto result = runner::run_linksim(cfg, rows, &sink, precision);
            for (double v : result.estimate) {
                std::cout << runner::format_number(v, precision) << '\n';
            }
            return runner::ok;
        }
        if (*mse_cmd) {
            auto cfg = mse_opts.resolve();
            if (profiles) {
                cfg.run.profiles = *profiles;
            }
            std::vector<std::vector<double>> sets;
            if (!sets_path.empty()) {
                sets = runner::read_rows(sets_path);
            }
            const runner::ResultSink sink(cfg, "mse-verify");
            runner::run_mse_verify(cfg, sets, &sink, [](const runner::MseRow &row) {
                const auto &r = row.report;
                std::cout << json{{"param_set_id", row.param_set_id},
                                  {"theory_var", r.theory.variance},
                                  {"emp_var", r.variance.value},
                                  {"emp_var_se", r.variance.se},
                                  {"theory_bias2", r.theory.squared_bias},
                                  {"emp_mse", r.mse.value}}
                                 .dump()
                          << '\n';
            });
            return runner::ok;
        }
        if (*feel_cmd) {
            auto cfg = feel_opts.resolve();
            auto set = [](auto &field, const auto &value) {
                if (value) {
                    field = *value;
                }
            };
            set(cfg.learning.partition, partition);
            set(cfg.learning.rounds, rounds);
            set(cfg.learning.task, task);
            set(cfg.learning.mnist_dir, mnist_dir);
            set(cfg.learning.model, learner);
            cfg.validate();
            const runner::ResultSink sink(cfg, "feel");
            const auto result = runner::run_feel(cfg, &sink, [](const oac::feel::RoundReport &r) {
                if (r.test_accuracy >= 0.0) {
                    std::cerr << "round " << r.round << " loss " << r.train_loss << " accuracy " << r.test_accuracy
                              << '\n';
                }
            });
            std::cout << json{{"final_accuracy", result.final_accuracy},
                              {"rounds", result.reports.size()},
                              {"output_dir", sink.dir().string()}}
                             .dump()
                      << '\n';
            return runner::ok;
        }
    } catch (const oac::Error &e) {
        return fail(e.kind(), e.what());
    } catch (const std::exception &e) {
        return fail(oac::ErrorKind::config, e.what());
    }
    return runner::ok;
}
