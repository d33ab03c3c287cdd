#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jscc/channel.hpp"
#include "jscc/checkpoint.hpp"
#include "jscc/config.hpp"
#include "jscc/data.hpp"
#include "jscc/format.hpp"
#include "jscc/metrics.hpp"
#include "jscc/training.hpp"

namespace jscc {

/// Scalar type used by the command-line harness.
using Real = float;

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCategory::data, "cannot write " + path);
    out << text;
    require(static_cast<bool>(out), ErrorCategory::data, "write failed for " + path);
}

inline std::string history_csv(const std::vector<EpochRecord>& history) {
    std::string s = "epoch,train_loss,val_loss,lr,sigma_q\n";
    for (const auto& r : history)
        s += std::to_string(r.epoch) + "," + format_number(r.train_loss) + "," + format_number(r.val_loss) + "," +
             format_number(r.lr) + "," + format_number(r.sigma_q) + "\n";
    return s;
}

struct TrainOutputs {
    std::string checkpoint;
    std::string history;
    std::string resolved_config;
    TrainResult result;
};

/// Trains from a validated config and writes checkpoint, history and the
/// resolved config into `out_dir`.
inline TrainOutputs run_train(const ExperimentConfig& cfg, const StepCallback& on_step = {}) {
    validate(cfg);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(cfg.out_dir, ec);
    require(fs::is_directory(cfg.out_dir), ErrorCategory::data, "cannot create output directory " + cfg.out_dir);

    auto [train_set, val_set] = load_split(cfg.data);
    JsccModel<Real> model(cfg.codec, cfg.train.quantizer, cfg.train.modulation_order, cfg.train.power_budget,
                          cfg.train.anneal, cfg.train.seed);
    OptimizerState<Real> opt = make_optimizer(model, cfg.train);
    TrainOutputs out;
    out.result = train(model, opt, train_set, val_set, cfg.train, on_step);
    out.checkpoint = (fs::path(cfg.out_dir) / "checkpoint.json").string();
    out.history = (fs::path(cfg.out_dir) / "history.csv").string();
    out.resolved_config = (fs::path(cfg.out_dir) / "resolved_config.txt").string();
    save_checkpoint(out.checkpoint, model, opt, cfg);
    write_text_file(out.history, history_csv(out.result.history));
    write_text_file(out.resolved_config, resolved_config_text(cfg));
    return out;
}

struct EvalOptions {
    std::vector<double> snrs{1, 4, 7, 10, 13, 16};
    ChannelKind channel = ChannelKind::static_awgn;
    std::optional<MetricTarget> metric;  ///< defaults to the checkpoint's target
    int draws = 0;                      ///< 0: 10 for fading, 1 for AWGN
    std::uint64_t seed = 20240101;
    std::optional<MsSsimParams> msssim;  ///< defaults derived from the checkpoint config
    int batch_size = 32;
};

struct EvalRow {
    double snr = 0.0;
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_image;
};

inline int resolved_draws(const EvalOptions& o) {
    if (o.draws > 0) return o.draws;
    return o.channel == ChannelKind::slow_fading ? 10 : 1;
}

inline MsSsimParams eval_msssim(const ExperimentConfig& cfg) {
    MsSsimParams p = cfg.train.loss_msssim();
    p.peak = 255.0;
    return p;
}

/// Per-image quality over a channel sweep. Images are evaluated at full size
/// (reflect-padded to the downsample factor, scored on the original region);
/// each image's metric is averaged over `draws` channel realisations.
template <class T>
std::vector<EvalRow> evaluate(JsccModel<T>& model, const ImageSet& images, const EvalOptions& opt, MetricTarget metric,
                              const MsSsimParams& msssim) {
    require(!images.empty(), ErrorCategory::data, "evaluation dataset is empty");
    const int draws = resolved_draws(opt);
    const int factor = model.codec_config().downsample_factor;
    Codec<T>& codec = model.codec();

    struct Prepared {
        Padding pad;
        LatentBatch symbols;  ///< channel input, batch of one
    };
    std::vector<Prepared> prepared;
    prepared.reserve(images.size());
    for (const auto& ni : images) {
        auto [padded, pad] = reflect_pad(ni.image, factor);
        LatentBatch lat = codec.encode(to_tensor<T>(padded));
        if (model.quantized()) {
            lat.z = hard_quantize(lat.z, model.quantizer().constellation);
        } else {
            lat.z = deepjscc_normalize(lat.z, model.power_budget());
        }
        prepared.push_back({pad, std::move(lat)});
    }

    std::vector<double> snrs = opt.snrs;
    std::sort(snrs.begin(), snrs.end());
    std::vector<EvalRow> rows;
    for (std::size_t si = 0; si < snrs.size(); ++si) {
        const ChannelScenario scenario{opt.channel, snrs[si], model.power_budget()};
        EvalRow row;
        row.snr = snrs[si];
        for (std::size_t ii = 0; ii < images.size(); ++ii) {
            const Prepared& pr = prepared[ii];
            const Tensor<T> reference = to_tensor<T>(images[ii].image);
            double acc = 0.0;
            for (int d = 0; d < draws; ++d) {
                Rng rng = make_rng(opt.seed, {static_cast<std::uint64_t>(std::llround(snrs[si] * 1000.0)),
                                              static_cast<std::uint64_t>(ii), static_cast<std::uint64_t>(d)});
                const ChannelRealization r = draw_realization(scenario, rng);
                std::vector<Complex> tx = pr.symbols.z;
                if (r.csi_at_transmitter) tx = precode(tx, r);
                const auto y = equalize(transmit(tx, r, std::numeric_limits<double>::infinity(), rng), r);
                LatentBatch rx = pr.symbols;
                rx.z = y;
                const Tensor<T> full = codec.decode(rx);
                Tensor<T> recon(1, 3, pr.pad.height, pr.pad.width);
                for (int c = 0; c < 3; ++c)
                    for (int yy = 0; yy < pr.pad.height; ++yy)
                        for (int xx = 0; xx < pr.pad.width; ++xx)
                            recon(0, c, yy, xx) = full(0, c, yy + pr.pad.top, xx + pr.pad.left);
                acc += metric == MetricTarget::psnr ? psnr(reference, recon)[0] : ms_ssim(reference, recon, msssim)[0];
            }
            row.per_image.push_back(acc / draws);
        }
        double mean = 0.0;
        for (double v : row.per_image) mean += v;
        mean /= static_cast<double>(row.per_image.size());
        double var = 0.0;
        for (double v : row.per_image) var += (v - mean) * (v - mean);
        row.mean = mean;
        row.stddev = std::sqrt(var / static_cast<double>(row.per_image.size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string eval_csv(const std::vector<EvalRow>& rows) {
    std::string s = "snr,metric_mean,metric_std\n";
    for (const auto& r : rows) s += format_number(r.snr) + "," + format_number(r.mean) + "," + format_number(r.stddev) + "\n";
    return s;
}

/// Fails when a supplied run config disagrees with what the checkpoint holds.
inline void check_compatible(const ExperimentConfig& ck, const ExperimentConfig& other) {
    auto mismatch = [](const std::string& f, const std::string& a, const std::string& b) {
        throw Error(ErrorCategory::checkpoint,
                    "checkpoint/config mismatch on '" + f + "': checkpoint has " + a + ", config has " + b);
    };
    if (ck.train.quantizer != other.train.quantizer)
        mismatch("quantizer", quantizer_name(ck.train.quantizer), quantizer_name(other.train.quantizer));
    if (ck.train.quantized() && ck.train.modulation_order != other.train.modulation_order)
        mismatch("modulation_order", std::to_string(ck.train.modulation_order), std::to_string(other.train.modulation_order));
    if (ck.codec.c_out != other.codec.c_out) mismatch("c_out", std::to_string(ck.codec.c_out), std::to_string(other.codec.c_out));
    if (ck.codec.base_width != other.codec.base_width)
        mismatch("base_width", std::to_string(ck.codec.base_width), std::to_string(other.codec.base_width));
    if (ck.codec.downsample_factor != other.codec.downsample_factor)
        mismatch("downsample_factor", std::to_string(ck.codec.downsample_factor),
                 std::to_string(other.codec.downsample_factor));
    if (ck.codec.attention_units != other.codec.attention_units)
        mismatch("attention_units", std::to_string(ck.codec.attention_units), std::to_string(other.codec.attention_units));
}

inline std::vector<EvalRow> run_eval(const std::string& checkpoint, const std::string& data_dir, const EvalOptions& opt,
                                     const std::string& out_csv, const std::optional<ExperimentConfig>& expect = {}) {
    auto ck = load_checkpoint<Real>(checkpoint);
    if (expect) check_compatible(ck.config, *expect);
    const ImageSet images = load_images(data_dir);
    require(!images.empty(), ErrorCategory::data, "no images found in " + data_dir);
    const MetricTarget metric = opt.metric.value_or(ck.config.train.metric);
    const MsSsimParams ms = opt.msssim.value_or(eval_msssim(ck.config));
    auto rows = evaluate(*ck.model, images, opt, metric, ms);
    if (!out_csv.empty()) write_text_file(out_csv, eval_csv(rows));
    return rows;
}

struct ConstellationDump {
    Constellation constellation;
    SymbolDistribution distribution;
};

/// Usage estimate over a reference batch: the first `batch_size` images (by
/// file name), centre-cropped to the training crop size.
template <class T>
SymbolDistribution reference_distribution(JsccModel<T>& model, const ImageSet& images, int crop_size, int batch_size) {
    require(model.quantized(), ErrorCategory::contract,
            "constellation dump needs a quantized model; this checkpoint is the unquantized baseline");
    require(!images.empty(), ErrorCategory::data, "reference set is empty");
    std::vector<Image> crops;
    const std::size_t n = std::min(images.size(), static_cast<std::size_t>(batch_size));
    for (std::size_t i = 0; i < n; ++i) crops.push_back(center_crop(images[i].image, crop_size));
    std::vector<const Image*> ptrs;
    for (const auto& c : crops) ptrs.push_back(&c);
    const LatentBatch lat = model.codec().encode(to_tensor<T>(ptrs));
    const auto soft = soft_quantize(lat.z, model.quantizer().constellation, model.quantizer().sigma_q);
    return estimate_distribution(soft.weights, model.quantizer().constellation.order());
}

inline ConstellationDump dump_constellation(const std::string& checkpoint, const std::string& data_dir,
                                            const std::string& out_csv, int batch_size = 32) {
    auto ck = load_checkpoint<Real>(checkpoint);
    require(ck.model->quantized(), ErrorCategory::contract,
            "constellation dump needs a quantized model; this checkpoint is the unquantized baseline");
    const ImageSet images = load_images(data_dir);
    const auto dist = reference_distribution(*ck.model, images, ck.config.data.crop_size, batch_size);
    ConstellationDump d{ck.model->quantizer().constellation, dist};
    if (!out_csv.empty()) write_constellation_csv(out_csv, d.constellation, d.distribution);
    return d;
}

} // namespace jscc
