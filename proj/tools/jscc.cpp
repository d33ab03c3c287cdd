// Command-line harness: train, eval, dump-constellation, synth.

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jscc/jscc.hpp"

namespace {

void check_device() {
    const char* dev = std::getenv("JSCC_DEVICE");
    if (dev == nullptr || *dev == '\0') return;
    const std::string d = dev;
    jscc::require(d == "cpu", jscc::ErrorCategory::device,
                  "JSCC_DEVICE=" + d + " is not available; this build supports only 'cpu'");
}

std::vector<double> parse_snrs(const std::vector<std::string>& items) {
    std::vector<double> out;
    for (const auto& s : items) {
        double v = 0.0;
        jscc::require(jscc::parse_number(s, v) && !std::isnan(v), jscc::ErrorCategory::config,
                      "snr: cannot parse '" + s + "'");
        out.push_back(v);
    }
    jscc::require(!out.empty(), jscc::ErrorCategory::config, "snr: list is empty");
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Joint source-channel image coding over digital constellations"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    bool quiet = false;
    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", config_path, "key = value config file")->required();
    train->add_option("--out", out_dir, "output directory (overrides out_dir)");
    train->add_flag("--quiet", quiet, "suppress per-epoch progress");

    std::string checkpoint, data_dir, out_csv, channel = "awgn", metric, eval_config;
    std::vector<std::string> snrs{"1", "4", "7", "10", "13", "16"};
    int draws = 0;
    std::uint64_t eval_seed = 20240101;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint over an SNR sweep");
    eval->add_option("--checkpoint", checkpoint)->required();
    eval->add_option("--data", data_dir, "directory of evaluation images")->required();
    eval->add_option("--out", out_csv, "CSV path")->required();
    eval->add_option("--snr", snrs, "comma-separated test SNRs in dB; 'inf' means noiseless")->delimiter(',');
    eval->add_option("--channel", channel, "awgn or fading");
    eval->add_option("--metric", metric, "psnr or msssim (default: the training target)");
    eval->add_option("--draws", draws, "channel draws per image (default 10 fading, 1 awgn)");
    eval->add_option("--seed", eval_seed, "evaluation seed");
    eval->add_option("--config", eval_config, "run config to check against the checkpoint");

    std::string dump_ckpt, dump_data, dump_out;
    int dump_batch = 32;
    auto* dump = app.add_subcommand("dump-constellation", "write constellation points and usage probabilities");
    dump->add_option("--checkpoint", dump_ckpt)->required();
    dump->add_option("--data", dump_data, "reference image directory")->required();
    dump->add_option("--out", dump_out, "CSV path")->required();
    dump->add_option("--batch", dump_batch, "reference batch size");

    std::string synth_out;
    int synth_count = 100, synth_size = 32;
    std::uint64_t synth_seed = 1;
    auto* synth = app.add_subcommand("synth", "generate a synthetic PNG dataset");
    synth->add_option("--out", synth_out)->required();
    synth->add_option("--count", synth_count);
    synth->add_option("--size", synth_size);
    synth->add_option("--seed", synth_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        check_device();
        if (*train) {
            auto cfg = jscc::load_config(config_path);
            if (!out_dir.empty()) cfg.out_dir = out_dir;
            jscc::StepCallback cb;
            const auto res = jscc::run_train(cfg, cb);
            if (!quiet) {
                for (const auto& r : res.result.history)
                    std::cout << "epoch " << r.epoch << " train " << jscc::format_number(r.train_loss) << " val "
                              << jscc::format_number(r.val_loss) << " lr " << jscc::format_number(r.lr) << '\n';
            }
            std::cout << "wrote " << res.checkpoint << '\n';
        } else if (*eval) {
            jscc::EvalOptions opt;
            opt.snrs = parse_snrs(snrs);
            opt.channel = jscc::parse_channel(channel);
            if (!metric.empty()) opt.metric = jscc::parse_metric(metric);
            opt.draws = draws;
            opt.seed = eval_seed;
            std::optional<jscc::ExperimentConfig> expect;
            if (!eval_config.empty()) expect = jscc::load_config(eval_config);
            const auto rows = jscc::run_eval(checkpoint, data_dir, opt, out_csv, expect);
            std::cout << jscc::eval_csv(rows);
        } else if (*dump) {
            jscc::dump_constellation(dump_ckpt, dump_data, dump_out, dump_batch);
            std::cout << "wrote " << dump_out << '\n';
        } else if (*synth) {
            jscc::write_synthetic_dataset(synth_out, synth_count, synth_size, synth_size, synth_seed);
        }
    } catch (const jscc::Error& e) {
        std::cerr << "error [" << jscc::category_name(e.category()) << "]: " << e.what() << '\n';
        return static_cast<int>(e.category());
    } catch (const std::exception& e) {
        std::cerr << "error [internal]: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
