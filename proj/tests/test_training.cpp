#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace jscc;

namespace {

CodecConfig tiny_codec() {
    CodecConfig c;
    c.c_out = 4;
    c.base_width = 4;
    c.downsample_factor = 2;
    c.attention_units = 1;
    return c;
}

ImageSet synthetic_set(int n, int size, std::uint64_t seed) {
    ImageSet s;
    for (int i = 0; i < n; ++i)
        s.push_back({"img_" + std::to_string(i), synthetic_image(size, size, derive_seed(seed, {std::uint64_t(i)}))});
    return s;
}

Tensor<double> pixels(int n, int size, std::uint64_t seed) {
    const auto set = synthetic_set(n, size, seed);
    std::vector<const Image*> ptrs;
    for (const auto& ni : set) ptrs.push_back(&ni.image);
    return to_tensor<double>(ptrs);
}

/// Central difference of the pass loss along sampled parameters and
/// inputs, compared with run_pass gradients. Noiseless channel, soft path.
void check_end_to_end(QuantizerKind kind, MetricTarget metric, double lambda, ChannelKind channel) {
    JsccModel<double> model(tiny_codec(), kind, 16, 1.0, AnnealSchedule{}, 7);
    model.set_anneal({0, 2.0});
    ChannelScenario sc{channel, std::numeric_limits<double>::infinity(), 1.0};
    LossSpec spec;
    spec.metric = metric;
    spec.lambda = lambda;
    spec.msssim = MsSsimParams::with_scales(1, 1.0);
    spec.msssim.window = 3;
    const auto x = pixels(2, 8, 3);
    PassOptions opt;
    opt.soft_forward = true;
    opt.input_grad = true;

    auto loss_at = [&](const Tensor<double>& px) {
        Rng rng(5);
        PassOptions o;
        o.backward = false;
        o.soft_forward = true;
        return run_pass(model, px, sc, spec, rng, o).loss;
    };
    nn::zero_grad(model.parameters());
    Rng rng(5);
    const auto res = run_pass(model, x, sc, spec, rng, opt);

    const double h = 1e-6;
    Rng pick_rng(11);
    auto ps = model.parameters();
    std::uniform_int_distribution<std::size_t> pick_param(0, ps.size() - 1);
    for (int t = 0; t < 25; ++t) {
        auto* p = ps[pick_param(pick_rng)];
        std::uniform_int_distribution<std::size_t> pick(0, p->value.size() - 1);
        const std::size_t i = pick(pick_rng);
        const double v0 = p->value[i];
        p->value[i] = v0 + h;
        const double fp = loss_at(x);
        p->value[i] = v0 - h;
        const double fm = loss_at(x);
        p->value[i] = v0;
        const double fd = (fp - fm) / (2 * h);
        EXPECT_NEAR(p->grad[i], fd, 1e-4 * std::max(std::abs(fd), 1e-3)) << p->name;
    }
    std::uniform_int_distribution<std::size_t> pick_px(0, x.size() - 1);
    for (int t = 0; t < 10; ++t) {
        const std::size_t i = pick_px(pick_rng);
        auto xp = x, xm = x;
        // pixel units: step of 255 h keeps the [0, 1] step at h
        xp[i] += 255 * h;
        xm[i] -= 255 * h;
        const double fd = (loss_at(xp) - loss_at(xm)) / (2 * 255 * h);
        EXPECT_NEAR(res.input_grad[i], fd, 1e-4 * std::max(std::abs(fd), 1e-5));
    }
    if (kind == QuantizerKind::learned) {
        auto c = model.quantizer().constellation;
        for (std::size_t j = 0; j < 16; j += 3) {
            for (int part = 0; part < 2; ++part) {
                auto eval_with = [&](double delta) {
                    std::vector<Complex> pts(c.points().begin(), c.points().end());
                    pts[j] += part == 0 ? Complex(delta, 0) : Complex(0, delta);
                    model.quantizer().constellation.assign(pts);
                    const double l = loss_at(x);
                    model.quantizer().constellation.assign(c.points());
                    return l;
                };
                const double fd = (eval_with(h) - eval_with(-h)) / (2 * h);
                const double an = part == 0 ? res.point_grad[j].real() : res.point_grad[j].imag();
                EXPECT_NEAR(an, fd, 1e-4 * std::max(std::abs(fd), 1e-3));
            }
        }
    }
}

} // namespace

TEST(Kl, Examples) {
    EXPECT_NEAR(kl_to_uniform(SymbolDistribution::uniform(16)), 0.0, 1e-15);
    SymbolDistribution one{std::vector<double>(16, 0.0)};
    one.probs[3] = 1.0;
    EXPECT_NEAR(kl_to_uniform(one), std::log(16.0), 1e-12);
    EXPECT_NEAR(kl_to_uniform(one), 2.7726, 1e-4);
    EXPECT_NEAR(kl_to_uniform(SymbolDistribution{{0.5, 0.5, 0, 0}}), std::log(2.0), 1e-12);
}

TEST(Loss, Examples) {
    LossSpec spec;
    spec.lambda = 0.05;
    Tensor<double> x(1, 1, 1, 2), y(1, 1, 1, 2);
    x[0] = 0.0;
    x[1] = 0.0;
    y[0] = 0.1;
    y[1] = 0.1;  // MSE 0.01
    const SymbolDistribution half{{0.5, 0.5, 0, 0}};
    EXPECT_NEAR(regularized_loss(x, y, &half, spec), 0.01 + 0.05 * std::log(2.0), 1e-12);
    EXPECT_NEAR(regularized_loss(x, y, &half, spec), 0.04466, 1e-5);
    const auto u = SymbolDistribution::uniform(4);
    EXPECT_EQ(regularized_loss(x, x, &u, spec), 0.0);
    spec.lambda = 0.0;
    EXPECT_EQ(regularized_loss(x, y, &half, spec), distortion(x, y, spec));
}

TEST(Defaults, LambdaAndLearningRate) {
    TrainConfig c;
    c.modulation_order = 64;
    EXPECT_DOUBLE_EQ(c.resolved_lambda(), 0.05);
    c.modulation_order = 4096;
    EXPECT_DOUBLE_EQ(c.resolved_lambda(), 0.0);
    c.modulation_order = 16;
    c.channel = ChannelKind::slow_fading;
    EXPECT_DOUBLE_EQ(c.resolved_lambda(), 0.0);
    EXPECT_DOUBLE_EQ(c.resolved_lr(), 5e-5);
    c.channel = ChannelKind::static_awgn;
    EXPECT_DOUBLE_EQ(c.resolved_lr(), 1e-4);
    c.lambda = 0.2;
    EXPECT_DOUBLE_EQ(c.resolved_lambda(), 0.2);
}

TEST(Plateau, DecayTwiceThenStop) {
    PlateauTracker p(4, 8, 1e-6);
    double lr = 1.0;
    EXPECT_TRUE(p.observe(1.0).improved);
    bool stopped = false;
    int epochs = 0;
    while (!stopped) {
        const auto a = p.observe(1.0 - 1e-7);  // below the improvement threshold
        if (a.decay_lr) lr *= 0.8;
        stopped = a.stop;
        ++epochs;
    }
    EXPECT_EQ(epochs, 8);
    EXPECT_NEAR(lr, 0.64, 1e-15);
}

TEST(Plateau, ImprovementResetsCounters) {
    PlateauTracker p(2, 3, 1e-6);
    p.observe(1.0);
    p.observe(1.0);
    EXPECT_TRUE(p.observe(0.5).improved);
    EXPECT_FALSE(p.observe(0.5).decay_lr);
    EXPECT_TRUE(p.observe(0.5).decay_lr);
}

TEST(EndToEnd, FixedQamPsnrGradient) {
    check_end_to_end(QuantizerKind::qam_fixed, MetricTarget::psnr, 0.05, ChannelKind::static_awgn);
}

TEST(EndToEnd, LearnedGradientWithKl) {
    check_end_to_end(QuantizerKind::learned, MetricTarget::psnr, 0.3, ChannelKind::static_awgn);
}

TEST(EndToEnd, BaselineMsSsimGradient) {
    check_end_to_end(QuantizerKind::unquantized_baseline, MetricTarget::msssim, 0.0, ChannelKind::static_awgn);
}

TEST(EndToEnd, FadingBaselineGradient) {
    check_end_to_end(QuantizerKind::unquantized_baseline, MetricTarget::psnr, 0.0, ChannelKind::slow_fading);
}

TEST(RunPass, BaselinePowerIsExact) {
    JsccModel<float> model(tiny_codec(), QuantizerKind::unquantized_baseline, 16, 1.0, AnnealSchedule{}, 1);
    Rng rng(1);
    const auto res = run_pass(model, pixels(3, 8, 4).cast<float>(), ChannelScenario{ChannelKind::static_awgn, 10, 1},
                              LossSpec{}, rng);
    for (double p : res.channel_power) EXPECT_NEAR(p, 1.0, 1e-9);
}

TEST(RunPass, PowerCheckModes) {
    const auto x = pixels(4, 8, 5).cast<float>();
    PassOptions strict;
    strict.backward = false;
    strict.power_check = PowerCheck::strict;
    JsccModel<float> base(tiny_codec(), QuantizerKind::unquantized_baseline, 16, 1.0, AnnealSchedule{}, 1);
    Rng rng(1);
    EXPECT_NO_THROW(run_pass(base, x, ChannelScenario{}, LossSpec{}, rng, strict));

    // Quantized symbols meet the budget only on average; record mode reports
    // the per-image power instead of rejecting it.
    JsccModel<float> q(tiny_codec(), QuantizerKind::qam_fixed, 16, 1.0, AnnealSchedule{}, 1);
    PassOptions rec = strict;
    rec.power_check = PowerCheck::record;
    const auto res = run_pass(q, x, ChannelScenario{}, LossSpec{}, rng, rec);
    for (double p : res.channel_power) {
        EXPECT_GT(p, 0.0);
        EXPECT_LE(p, build_qam(16, 1.0).max_power() + 1e-12);
    }
}

TEST(Train, LearnedConstellationKeepsPower) {
    TrainConfig cfg;
    cfg.quantizer = QuantizerKind::learned;
    cfg.modulation_order = 16;
    cfg.batch_size = 4;
    cfg.crop_size = 8;
    cfg.max_epochs = 3;
    cfg.lr_init = 1e-2;
    cfg.anneal.period = 3;
    JsccModel<float> model(tiny_codec(), cfg.quantizer, 16, 1.0, cfg.anneal, 3);
    auto opt = make_optimizer(model, cfg);
    int steps = 0;
    bool moved = false;
    const auto qam = build_qam(16, 1.0);
    const auto res = train(model, opt, synthetic_set(8, 8, 1), {}, cfg, [&](const StepInfo& s) {
        ++steps;
        EXPECT_NEAR(s.quantizer->constellation.weighted_power(*s.pass->dist), 1.0, 1e-9);
        EXPECT_DOUBLE_EQ(s.quantizer->sigma_q, anneal_sigma_at(s.step, cfg.anneal));
        if (std::abs(s.quantizer->constellation[0] - qam[0]) > 1e-6) moved = true;
    });
    EXPECT_EQ(steps, 6);
    EXPECT_TRUE(moved);
    EXPECT_EQ(res.history.size(), 3u);
}

TEST(Train, FixedConstellationStaysQam) {
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.crop_size = 8;
    cfg.max_epochs = 2;
    JsccModel<float> model(tiny_codec(), cfg.quantizer, 16, 1.0, cfg.anneal, 3);
    auto opt = make_optimizer(model, cfg);
    train(model, opt, synthetic_set(8, 8, 1), {}, cfg);
    const auto qam = build_qam(16, 1.0);
    for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(model.quantizer().constellation[j], qam[j]);
}

TEST(Train, Deterministic) {
    auto run = [] {
        TrainConfig cfg;
        cfg.batch_size = 4;
        cfg.crop_size = 8;
        cfg.max_epochs = 2;
        cfg.seed = 42;
        JsccModel<float> model(tiny_codec(), cfg.quantizer, 16, 1.0, cfg.anneal, cfg.seed);
        auto opt = make_optimizer(model, cfg);
        return train(model, opt, synthetic_set(10, 12, 1), synthetic_set(2, 12, 9), cfg).history;
    };
    const auto a = run(), b = run();
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].train_loss, b[i].train_loss);
        EXPECT_EQ(a[i].val_loss, b[i].val_loss);
    }
}

TEST(Train, DivergenceReportsStep) {
    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.crop_size = 8;
    cfg.max_epochs = 1;
    JsccModel<float> model(tiny_codec(), cfg.quantizer, 16, 1.0, cfg.anneal, 3);
    auto ps = model.parameters();
    ps.back()->value[0] = std::numeric_limits<float>::quiet_NaN();
    auto opt = make_optimizer(model, cfg);
    try {
        train(model, opt, synthetic_set(4, 8, 1), {}, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::divergence);
        EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos);
    }
}
