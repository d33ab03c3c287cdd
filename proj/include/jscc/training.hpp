#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "jscc/channel.hpp"
#include "jscc/codec.hpp"
#include "jscc/constellation.hpp"
#include "jscc/data.hpp"
#include "jscc/error.hpp"
#include "jscc/metrics.hpp"
#include "jscc/nn/adam.hpp"
#include "jscc/quantizer.hpp"
#include "jscc/random.hpp"

namespace jscc {

enum class MetricTarget { psnr, msssim };
enum class QuantizerKind { qam_fixed, learned, unquantized_baseline };

inline const char* metric_name(MetricTarget m) { return m == MetricTarget::psnr ? "psnr" : "msssim"; }

inline MetricTarget parse_metric(const std::string& s) {
    if (s == "psnr") return MetricTarget::psnr;
    if (s == "msssim" || s == "ms-ssim" || s == "ms_ssim") return MetricTarget::msssim;
    throw Error(ErrorCategory::config, "unknown metric '" + s + "' (expected psnr|msssim)");
}

inline const char* quantizer_name(QuantizerKind k) {
    switch (k) {
    case QuantizerKind::qam_fixed: return "qam_fixed";
    case QuantizerKind::learned: return "learned";
    case QuantizerKind::unquantized_baseline: return "unquantized_baseline";
    }
    return "?";
}

inline QuantizerKind parse_quantizer(const std::string& s) {
    if (s == "qam_fixed" || s == "qam") return QuantizerKind::qam_fixed;
    if (s == "learned") return QuantizerKind::learned;
    if (s == "unquantized_baseline" || s == "baseline" || s == "none") return QuantizerKind::unquantized_baseline;
    throw Error(ErrorCategory::config,
                "unknown quantizer '" + s + "' (expected qam_fixed|learned|unquantized_baseline)");
}

/// KL regularizer weight used when none is configured: 0.05 on AWGN below
/// 4096 points, otherwise 0.
inline double default_lambda(ChannelKind channel, std::size_t order) {
    if (channel == ChannelKind::slow_fading) return 0.0;
    return order >= 4096 ? 0.0 : 0.05;
}

inline double default_lr(ChannelKind channel) { return channel == ChannelKind::slow_fading ? 5e-5 : 1e-4; }

struct TrainConfig {
    MetricTarget metric = MetricTarget::psnr;
    std::optional<double> lambda;
    double snr_train_db = 10.0;
    ChannelKind channel = ChannelKind::static_awgn;
    std::size_t modulation_order = 16;
    QuantizerKind quantizer = QuantizerKind::qam_fixed;
    int batch_size = 32;
    std::optional<double> lr_init;
    double lr_decay = 0.8;
    int lr_patience = 4;
    int early_stop_patience = 8;
    int max_epochs = 1000;
    long max_steps = 0;  ///< 0 = no step limit
    double beta1 = 0.9;
    double beta2 = 0.99;
    double adam_eps = 1e-8;
    double power_budget = 1.0;
    double min_improvement = 1e-6;
    AnnealSchedule anneal;
    int msssim_scales = 5;
    int msssim_window = 11;
    double msssim_sigma = 1.5;
    int crop_size = 128;
    std::uint64_t seed = 0;
    bool deterministic = true;

    double resolved_lambda() const { return lambda.value_or(default_lambda(channel, modulation_order)); }
    double resolved_lr() const { return lr_init.value_or(default_lr(channel)); }
    bool quantized() const { return quantizer != QuantizerKind::unquantized_baseline; }

    /// MS-SSIM settings on [0, 1] pixels for the training loss.
    MsSsimParams loss_msssim() const {
        MsSsimParams p = MsSsimParams::with_scales(msssim_scales, 1.0);
        if (msssim_scales == 5) p.weights = MsSsimParams{}.weights;
        p.window = msssim_window;
        p.window_sigma = msssim_sigma;
        return p;
    }
};

inline void validate(const TrainConfig& c) {
    require(c.resolved_lambda() >= 0.0, ErrorCategory::config, "lambda must be >= 0");
    require(c.batch_size >= 1, ErrorCategory::config, "batch_size must be >= 1");
    require(c.lr_patience >= 1 && c.early_stop_patience >= 1, ErrorCategory::config, "patience values must be positive");
    require(c.max_epochs >= 1, ErrorCategory::config, "max_epochs must be >= 1");
    require(c.resolved_lr() > 0.0, ErrorCategory::config, "lr_init must be positive");
    require(c.lr_decay > 0.0 && c.lr_decay <= 1.0, ErrorCategory::config, "lr_decay must lie in (0, 1]");
    require(c.power_budget > 0.0, ErrorCategory::config, "power_budget must be positive");
    require(c.modulation_order >= 2, ErrorCategory::config, "modulation_order must be >= 2");
    require(c.anneal.period >= 1 && c.anneal.initial > 0.0 && c.anneal.cap >= c.anneal.initial, ErrorCategory::config,
            "invalid annealing schedule");
}

/// Sum_j p_j ln(p_j M), natural log, 0 ln 0 = 0.
inline double kl_to_uniform(const SymbolDistribution& d) {
    const double m = static_cast<double>(d.size());
    double s = 0.0;
    for (double p : d.probs)
        if (p > 0.0) s += p * std::log(p * m);
    return std::max(s, 0.0);
}

/// d KL / d p_j = ln(p_j M) + 1 (probabilities floored to keep it finite).
inline std::vector<double> kl_to_uniform_grad(const SymbolDistribution& d) {
    const double m = static_cast<double>(d.size());
    std::vector<double> g(d.size());
    for (std::size_t j = 0; j < d.size(); ++j) g[j] = std::log(std::max(d.probs[j], 1e-300) * m) + 1.0;
    return g;
}

struct LossSpec {
    MetricTarget metric = MetricTarget::psnr;
    double lambda = 0.0;
    MsSsimParams msssim = MsSsimParams::with_scales(5, 1.0);
};

inline LossSpec loss_spec(const TrainConfig& c) {
    LossSpec s;
    s.metric = c.metric;
    s.lambda = c.quantized() ? c.resolved_lambda() : 0.0;
    s.msssim = c.loss_msssim();
    return s;
}

/// Batch distortion on [0, 1] pixels: MSE, or 1 - mean MS-SSIM. `grad`
/// receives d/d x_hat and `grad_ref` (optional) d/d x.
template <class T>
double distortion(const Tensor<T>& x, const Tensor<T>& x_hat, const LossSpec& spec, Tensor<T>* grad = nullptr,
                  Tensor<T>* grad_ref = nullptr) {
    require_same_images(x, x_hat);
    if (spec.metric == MetricTarget::psnr) {
        double s = 0.0;
        const double inv = 1.0 / static_cast<double>(x.size());
        if (grad) *grad = zeros_like(x_hat);
        if (grad_ref) *grad_ref = zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double d = static_cast<double>(x_hat[i]) - static_cast<double>(x[i]);
            s += d * d;
            if (grad) (*grad)[i] = static_cast<T>(2.0 * d * inv);
            if (grad_ref) (*grad_ref)[i] = static_cast<T>(-2.0 * d * inv);
        }
        return s * inv;
    }
    Tensor<double> g;
    const auto values = grad ? ms_ssim_with_grad(x, x_hat, spec.msssim, g) : ms_ssim(x, x_hat, spec.msssim);
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    const double scale = -1.0 / static_cast<double>(values.size());
    if (grad) {
        *grad = zeros_like(x_hat);
        for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] = static_cast<T>(scale * g[i]);
    }
    if (grad_ref) {
        // MS-SSIM is symmetric in its arguments.
        Tensor<double> gr;
        ms_ssim_with_grad(x_hat, x, spec.msssim, gr);
        *grad_ref = zeros_like(x);
        for (std::size_t i = 0; i < gr.size(); ++i) (*grad_ref)[i] = static_cast<T>(scale * gr[i]);
    }
    return 1.0 - mean;
}

/// d(x, x_hat) + lambda * KL(P || U). `dist` may be null (unquantized).
template <class T>
double regularized_loss(const Tensor<T>& x, const Tensor<T>& x_hat, const SymbolDistribution* dist, const LossSpec& spec) {
    const double d = distortion(x, x_hat, spec);
    if (!dist || spec.lambda == 0.0) return d;
    return d + spec.lambda * kl_to_uniform(*dist);
}

/// Codec plus quantizer state: everything a checkpoint has to restore.
template <class T>
class JsccModel {
public:
    JsccModel(const CodecConfig& codec_cfg, QuantizerKind kind, std::size_t order, double power_budget,
              const AnnealSchedule& schedule, std::uint64_t seed)
        : init_rng_(make_rng(seed, {0x494e4954u})), codec_(codec_cfg, init_rng_), kind_(kind), order_(order),
          power_budget_(power_budget), schedule_(schedule), anneal_(anneal_start(schedule)) {
        if (kind != QuantizerKind::unquantized_baseline) {
            Constellation c = build_qam(order, power_budget);
            c.set_trainable(kind == QuantizerKind::learned);
            quantizer_.emplace(SoftHardQuantizer{std::move(c), anneal_.sigma_q, kind == QuantizerKind::learned});
        }
    }

    JsccModel(const JsccModel&) = delete;
    JsccModel& operator=(const JsccModel&) = delete;

    Codec<T>& codec() { return codec_; }
    const CodecConfig& codec_config() const { return codec_.config(); }
    QuantizerKind kind() const { return kind_; }
    bool quantized() const { return quantizer_.has_value(); }
    std::size_t order() const { return order_; }
    double power_budget() const { return power_budget_; }
    const AnnealSchedule& schedule() const { return schedule_; }
    const AnnealState& anneal() const { return anneal_; }

    SoftHardQuantizer& quantizer() {
        require(quantizer_.has_value(), ErrorCategory::contract, "model has no quantizer");
        return *quantizer_;
    }
    const SoftHardQuantizer& quantizer() const {
        require(quantizer_.has_value(), ErrorCategory::contract, "model has no quantizer");
        return *quantizer_;
    }

    void set_anneal(const AnnealState& s) {
        anneal_ = s;
        if (quantizer_) quantizer_->sigma_q = s.sigma_q;
    }
    void advance_anneal() { set_anneal(anneal_step(anneal_, schedule_)); }

    nn::ParamList<T> parameters() { return codec_.parameters(); }

private:
    Rng init_rng_;
    Codec<T> codec_;
    QuantizerKind kind_;
    std::size_t order_;
    double power_budget_;
    AnnealSchedule schedule_;
    AnnealState anneal_;
    std::optional<SoftHardQuantizer> quantizer_;
};

/// Power check policy at the channel input.
enum class PowerCheck { strict, record };

struct PassOptions {
    bool backward = true;
    bool soft_forward = false;  ///< feed z~ instead of z_bar forward (gradient checks)
    bool input_grad = false;    ///< also return d loss / d pixels
    PowerCheck power_check = PowerCheck::record;
};

struct PassResult {
    double loss = 0.0;
    double distortion = 0.0;
    double kl = 0.0;
    std::optional<SymbolDistribution> dist;
    std::vector<double> channel_power;  ///< per-image (1/k) sum |z_bar|^2
    std::vector<Complex> point_grad;    ///< learned constellation gradient
    Tensor<double> input_grad;
    int k = 0;
};

/// One forward (and optionally backward) pass of
///   encoder -> quantizer | normalisation -> [precoder] -> channel -> equalizer -> decoder.
/// Parameter gradients accumulate into the model's Param::grad buffers.
template <class T>
PassResult run_pass(JsccModel<T>& model, const Tensor<T>& pixels, const ChannelScenario& scenario,
                    const LossSpec& spec, Rng& rng, const PassOptions& opt = {}) {
    Codec<T>& codec = model.codec();
    const Tensor<T> x = codec.normalize(pixels);
    const Tensor<T> z_tensor = codec.encoder().forward(x);
    const LatentBatch latent = pack_latent(z_tensor);
    const int batch = latent.batch, k = latent.k;

    PassResult res;
    res.k = k;
    std::vector<Complex> channel_in(latent.z.size());
    std::optional<StraightThrough> st;
    if (model.quantized()) {
        st = straight_through_quantize(latent.z, model.quantizer());
        const auto& src = opt.soft_forward ? st->soft.values : st->symbols;
        channel_in = src;
        res.dist = estimate_distribution(st->soft.weights, model.quantizer().constellation.order());
    } else {
        for (int b = 0; b < batch; ++b) {
            auto n = deepjscc_normalize(latent.row(b), model.power_budget());
            std::copy(n.begin(), n.end(), channel_in.begin() + static_cast<std::ptrdiff_t>(b) * k);
        }
    }

    std::vector<Complex> coeff(batch);  // end-to-end linear gain seen by z_bar
    LatentBatch received = latent;
    res.channel_power.resize(batch);
    for (int b = 0; b < batch; ++b) {
        std::span<const Complex> row(channel_in.data() + static_cast<std::size_t>(b) * k, static_cast<std::size_t>(k));
        res.channel_power[b] = average_power(row);
        const ChannelRealization r = draw_realization(scenario, rng);
        Complex pre{1.0, 0.0};
        std::vector<Complex> tx(row.begin(), row.end());
        if (r.csi_at_transmitter) {
            tx = precode(row, r);
            pre = precoder_coefficient(r);
        }
        // Only the strict mode enforces the per-image budget; quantized
        // symbols meet it on average over the symbol distribution.
        const double budget = opt.power_check == PowerCheck::strict ? model.power_budget()
                                                                    : std::numeric_limits<double>::infinity();
        const auto y = transmit(tx, r, budget, rng);
        const auto eq = equalize(y, r);
        coeff[b] = equalizer_coefficient(r) * r.h * pre;
        std::copy(eq.begin(), eq.end(), received.z.begin() + static_cast<std::ptrdiff_t>(b) * k);
    }

    const Tensor<T> y_tensor =
        unpack_latent<T>(received.z, batch, codec.config().c_out, latent.grid_h, latent.grid_w);
    const Tensor<T> x_hat = codec.decoder().forward(y_tensor);

    Tensor<T> g_xhat, g_ref;
    res.distortion = distortion(x, x_hat, spec, opt.backward ? &g_xhat : nullptr,
                                opt.backward && opt.input_grad ? &g_ref : nullptr);
    res.loss = res.distortion;
    if (res.dist) {
        res.kl = kl_to_uniform(*res.dist);
        res.loss += spec.lambda * res.kl;
    }
    if (!opt.backward) return res;

    const Tensor<T> g_y = codec.decoder().backward(g_xhat);
    LatentBatch g_received = pack_latent(g_y);
    std::vector<Complex> g_in(latent.z.size());
    for (int b = 0; b < batch; ++b) {
        const Complex a = std::conj(coeff[b]);
        for (int i = 0; i < k; ++i) {
            const std::size_t idx = static_cast<std::size_t>(b) * k + i;
            g_in[idx] = a * g_received.z[idx];
        }
    }

    std::vector<Complex> g_z(latent.z.size());
    if (model.quantized()) {
        std::vector<double> g_col;
        if (spec.lambda != 0.0) {
            g_col = kl_to_uniform_grad(*res.dist);
            const double rows = static_cast<double>(latent.z.size());
            for (auto& v : g_col) v *= spec.lambda / rows;
        }
        auto grads = straight_through_backward(latent.z, model.quantizer(), *st, g_in, g_col);
        g_z = std::move(grads.latent);
        res.point_grad = std::move(grads.points);
    } else {
        for (int b = 0; b < batch; ++b) {
            const auto off = static_cast<std::size_t>(b) * k;
            auto g = deepjscc_normalize_backward(latent.row(b), model.power_budget(),
                                                 std::span<const Complex>(g_in.data() + off, static_cast<std::size_t>(k)));
            std::copy(g.begin(), g.end(), g_z.begin() + static_cast<std::ptrdiff_t>(off));
        }
    }
    const Tensor<T> g_z_tensor = unpack_latent<T>(g_z, batch, codec.config().c_out, latent.grid_h, latent.grid_w);
    const Tensor<T> g_x = codec.encoder().backward(g_z_tensor);
    if (opt.input_grad) {
        // The pixels feed both the encoder and the distortion reference.
        res.input_grad = g_x.template cast<double>();
        const double inv = 1.0 / codec.config().pixel_peak;
        for (std::size_t i = 0; i < res.input_grad.size(); ++i)
            res.input_grad[i] = (res.input_grad[i] + static_cast<double>(g_ref[i])) * inv;
    }
    return res;
}

/// Adam state for every network parameter and, in learned mode, the points.
template <class T>
struct OptimizerState {
    nn::AdamConfig config;
    long step = 0;
    std::vector<nn::AdamMoments<T>> params;
    nn::AdamMoments<double> points;
};

/// Stagnation tracking for LR decay and early stopping.
class PlateauTracker {
public:
    PlateauTracker(int lr_patience, int stop_patience, double min_improvement)
        : lr_patience_(lr_patience), stop_patience_(stop_patience), min_improvement_(min_improvement) {}

    struct Action {
        bool improved = false;
        bool decay_lr = false;
        bool stop = false;
    };

    Action observe(double value) {
        Action a;
        if (value < best_ - min_improvement_) {
            best_ = value;
            bad_lr_ = bad_stop_ = 0;
            a.improved = true;
            return a;
        }
        ++bad_lr_;
        ++bad_stop_;
        if (bad_lr_ >= lr_patience_) {
            a.decay_lr = true;
            bad_lr_ = 0;
        }
        if (bad_stop_ >= stop_patience_) a.stop = true;
        return a;
    }

    double best() const { return best_; }

private:
    int lr_patience_, stop_patience_;
    double min_improvement_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_lr_ = 0, bad_stop_ = 0;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    double sigma_q = 0.0;
};

struct StepInfo {
    long step = 0;
    double loss = 0.0;
    const PassResult* pass = nullptr;
    const SoftHardQuantizer* quantizer = nullptr;  ///< null for the baseline
};

using StepCallback = std::function<void(const StepInfo&)>;

struct TrainResult {
    std::vector<EpochRecord> history;
    long steps = 0;
    int best_epoch = 0;
    double best_val_loss = 0.0;
    bool early_stopped = false;
    double mean_channel_power = 0.0;  ///< empirical average over all training symbols
};

namespace detail {

template <class T>
struct Snapshot {
    std::vector<Tensor<T>> values;
    std::optional<Constellation> constellation;
    AnnealState anneal;
    OptimizerState<T> optimizer;
};

template <class T>
Snapshot<T> take_snapshot(JsccModel<T>& model, const OptimizerState<T>& opt) {
    Snapshot<T> s;
    for (auto* p : model.parameters()) s.values.push_back(p->value);
    if (model.quantized()) s.constellation = model.quantizer().constellation;
    s.anneal = model.anneal();
    s.optimizer = opt;
    return s;
}

template <class T>
void restore_snapshot(JsccModel<T>& model, OptimizerState<T>& opt, const Snapshot<T>& s) {
    auto ps = model.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value = s.values[i];
    if (s.constellation) model.quantizer().constellation = *s.constellation;
    model.set_anneal(s.anneal);
    opt = s.optimizer;
}

} // namespace detail

template <class T>
OptimizerState<T> make_optimizer(JsccModel<T>& model, const TrainConfig& cfg) {
    OptimizerState<T> opt;
    opt.config = {cfg.resolved_lr(), cfg.beta1, cfg.beta2, cfg.adam_eps};
    opt.params.resize(model.parameters().size());
    return opt;
}

/// Applies one optimizer update from the gradients of `pass`, then the
/// constellation power renormalisation (learned mode) and the anneal step.
template <class T>
void apply_update(JsccModel<T>& model, OptimizerState<T>& opt, const PassResult& pass) {
    opt.step += 1;
    auto ps = model.parameters();
    if (opt.params.size() != ps.size()) opt.params.resize(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i)
        nn::adam_update<T>(ps[i]->value.values(), ps[i]->grad.values(), opt.params[i], opt.config, opt.step);
    if (model.quantized() && model.quantizer().learnable) {
        auto& c = model.quantizer().constellation;
        std::vector<double> flat(2 * c.order()), grad(2 * c.order());
        for (std::size_t j = 0; j < c.order(); ++j) {
            flat[2 * j] = c[j].real();
            flat[2 * j + 1] = c[j].imag();
            grad[2 * j] = pass.point_grad[j].real();
            grad[2 * j + 1] = pass.point_grad[j].imag();
        }
        nn::adam_update<double>(flat, grad, opt.points, opt.config, opt.step);
        std::vector<Complex> pts(c.order());
        for (std::size_t j = 0; j < c.order(); ++j) pts[j] = {flat[2 * j], flat[2 * j + 1]};
        c.assign(pts);
        c = renormalize_power(c, *pass.dist);
    }
    model.advance_anneal();
}

/// Mean loss over a fixed set of centre crops with a fixed noise stream.
template <class T>
double validation_loss(JsccModel<T>& model, const ImageSet& val, const TrainConfig& cfg) {
    if (val.empty()) return std::numeric_limits<double>::quiet_NaN();
    const ChannelScenario scenario{cfg.channel, cfg.snr_train_db, cfg.power_budget};
    const LossSpec spec = loss_spec(cfg);
    Rng rng = make_rng(cfg.seed, {0x56414cu});
    std::vector<Image> crops;
    crops.reserve(val.size());
    for (const auto& ni : val) crops.push_back(center_crop(ni.image, cfg.crop_size));
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t begin = 0; begin < crops.size(); begin += cfg.batch_size) {
        const std::size_t end = std::min(crops.size(), begin + static_cast<std::size_t>(cfg.batch_size));
        std::vector<const Image*> ptrs;
        for (std::size_t i = begin; i < end; ++i) ptrs.push_back(&crops[i]);
        const auto res = run_pass(model, to_tensor<T>(ptrs), scenario, spec, rng, PassOptions{false});
        total += res.loss * static_cast<double>(end - begin);
        count += end - begin;
    }
    return total / static_cast<double>(count);
}

/// Full training loop with LR decay on plateaus, early stopping, and
/// restoration of the best-validation state at the end.
template <class T>
TrainResult train(JsccModel<T>& model, OptimizerState<T>& opt, const ImageSet& train_set, const ImageSet& val_set,
                  const TrainConfig& cfg, const StepCallback& on_step = {}) {
    validate(cfg);
    require(!train_set.empty(), ErrorCategory::data, "training set is empty");
    const ChannelScenario scenario{cfg.channel, cfg.snr_train_db, cfg.power_budget};
    const LossSpec spec = loss_spec(cfg);
    BatchStream stream(train_set, cfg.batch_size, cfg.crop_size, derive_seed(cfg.seed, {0x44415441u}));
    PlateauTracker plateau(cfg.lr_patience, cfg.early_stop_patience, cfg.min_improvement);

    TrainResult result;
    std::optional<detail::Snapshot<T>> best;
    double power_sum = 0.0;
    std::size_t power_count = 0;
    bool out_of_steps = false;

    for (int epoch = 1; epoch <= cfg.max_epochs && !out_of_steps; ++epoch) {
        const double lr_used = opt.config.lr;
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (int bi = 0; bi < stream.batches_per_epoch(); ++bi) {
            const Tensor<T> batch = stream.batch_tensor<T>(epoch, bi);
            Rng noise = make_rng(cfg.seed, {0x4e4f4953u, static_cast<std::uint64_t>(opt.step)});
            nn::zero_grad(model.parameters());
            const PassResult pass = run_pass(model, batch, scenario, spec, noise);
            if (!std::isfinite(pass.loss))
                throw Error(ErrorCategory::divergence,
                            "non-finite training loss at step " + std::to_string(opt.step + 1) + " (epoch " +
                                std::to_string(epoch) + ")");
            apply_update(model, opt, pass);
            for (double p : pass.channel_power) power_sum += p;
            power_count += pass.channel_power.size();
            loss_sum += pass.loss * batch.n();
            seen += static_cast<std::size_t>(batch.n());
            if (on_step) {
                StepInfo info{opt.step, pass.loss, &pass, model.quantized() ? &model.quantizer() : nullptr};
                on_step(info);
            }
            if (cfg.max_steps > 0 && opt.step >= cfg.max_steps) {
                out_of_steps = true;
                break;
            }
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(seen);
        rec.val_loss = val_set.empty() ? rec.train_loss : validation_loss(model, val_set, cfg);
        rec.lr = lr_used;
        rec.sigma_q = model.anneal().sigma_q;
        result.history.push_back(rec);
        if (!std::isfinite(rec.val_loss))
            throw Error(ErrorCategory::divergence, "non-finite validation loss in epoch " + std::to_string(epoch));

        const auto action = plateau.observe(rec.val_loss);
        if (action.improved) {
            best = detail::take_snapshot(model, opt);
            result.best_epoch = epoch;
            result.best_val_loss = rec.val_loss;
        }
        if (action.decay_lr) opt.config.lr *= cfg.lr_decay;
        if (action.stop) {
            result.early_stopped = true;
            break;
        }
    }
    result.steps = opt.step;
    if (best) {
        // Keep the learning-rate schedule position of the final state.
        const double lr_now = opt.config.lr;
        detail::restore_snapshot(model, opt, *best);
        opt.config.lr = lr_now;
    }
    result.mean_channel_power = power_count ? power_sum / static_cast<double>(power_count) : 0.0;
    return result;
}

} // namespace jscc
