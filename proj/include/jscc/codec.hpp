#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include "jscc/constellation.hpp"
#include "jscc/error.hpp"
#include "jscc/nn/blocks.hpp"
#include "jscc/tensor.hpp"

namespace jscc {

struct CodecConfig {
    int c_out = 16;              ///< encoder output channels, even
    int base_width = 64;         ///< internal channel count
    int downsample_factor = 4;   ///< total spatial reduction per side, power of two
    int attention_units = 3;     ///< residual units per attention branch
    double pixel_peak = 255.0;   ///< images enter as [0, peak] and are scaled to [0, 1]
};

inline int downsample_stages(int factor) {
    int stages = 0;
    while ((1 << stages) < factor) ++stages;
    return stages;
}

inline void validate(const CodecConfig& cfg) {
    require(cfg.c_out > 0 && cfg.c_out % 2 == 0, ErrorCategory::config,
            "c_out must be a positive even integer, got " + std::to_string(cfg.c_out));
    require(cfg.base_width > 0, ErrorCategory::config, "base_width must be positive");
    require(cfg.downsample_factor > 0 && (cfg.downsample_factor & (cfg.downsample_factor - 1)) == 0,
            ErrorCategory::config, "downsample_factor must be a power of two");
    require(cfg.attention_units >= 1, ErrorCategory::config, "attention_units must be >= 1");
    require(cfg.pixel_peak > 0.0, ErrorCategory::config, "pixel_peak must be positive");
}

/// Number of complex channel uses for an H x W image.
inline int channel_uses(const CodecConfig& cfg, int height, int width) {
    const int f = cfg.downsample_factor;
    require(height > 0 && width > 0 && height % f == 0 && width % f == 0, ErrorCategory::shape,
            "image " + std::to_string(height) + "x" + std::to_string(width) + " is not divisible by the downsample factor " +
                std::to_string(f));
    return (height / f) * (width / f) * cfg.c_out / 2;
}

inline double bandwidth_ratio(const CodecConfig& cfg, int height, int width, int channels = 3) {
    return static_cast<double>(channel_uses(cfg, height, width)) / (static_cast<double>(height) * width * channels);
}

/// B latent vectors of k complex entries on an (h, w) grid of c_out/2 pairs.
struct LatentBatch {
    int batch = 0;
    int k = 0;
    int grid_h = 0, grid_w = 0;
    std::vector<Complex> z;

    std::span<Complex> row(int b) { return {z.data() + static_cast<std::size_t>(b) * k, static_cast<std::size_t>(k)}; }
    std::span<const Complex> row(int b) const {
        return {z.data() + static_cast<std::size_t>(b) * k, static_cast<std::size_t>(k)};
    }
};

/// Channel pairs (2m, 2m+1) become (real, imag); entry index = m*h*w + y*w + x.
template <class T>
LatentBatch pack_latent(const Tensor<T>& t) {
    require(t.c() % 2 == 0, ErrorCategory::shape, "latent tensor needs an even channel count");
    LatentBatch lb;
    lb.batch = t.n();
    lb.grid_h = t.h();
    lb.grid_w = t.w();
    const int hw = t.h() * t.w();
    lb.k = t.c() / 2 * hw;
    lb.z.resize(static_cast<std::size_t>(lb.batch) * lb.k);
    for (int b = 0; b < t.n(); ++b)
        for (int m = 0; m < t.c() / 2; ++m) {
            const T* re = t.plane(b, 2 * m);
            const T* im = t.plane(b, 2 * m + 1);
            Complex* dst = lb.z.data() + static_cast<std::size_t>(b) * lb.k + static_cast<std::size_t>(m) * hw;
            for (int p = 0; p < hw; ++p) dst[p] = Complex(static_cast<double>(re[p]), static_cast<double>(im[p]));
        }
    return lb;
}

template <class T>
Tensor<T> unpack_latent(std::span<const Complex> z, int batch, int channels, int h, int w) {
    const int hw = h * w;
    const std::size_t k = static_cast<std::size_t>(channels / 2) * hw;
    require(z.size() == k * batch, ErrorCategory::shape,
            "latent length " + std::to_string(z.size()) + " does not match " + std::to_string(batch) + " x " +
                std::to_string(k));
    Tensor<T> t(batch, channels, h, w);
    for (int b = 0; b < batch; ++b)
        for (int m = 0; m < channels / 2; ++m) {
            T* re = t.plane(b, 2 * m);
            T* im = t.plane(b, 2 * m + 1);
            const Complex* src = z.data() + b * k + static_cast<std::size_t>(m) * hw;
            for (int p = 0; p < hw; ++p) {
                re[p] = static_cast<T>(src[p].real());
                im[p] = static_cast<T>(src[p].imag());
            }
        }
    return t;
}

/// Stem conv -> strided residual blocks (with GDN) -> attention -> residual
/// block -> attention -> 1x1 conv to c_out.
template <class T>
class Encoder : public nn::Module<T> {
public:
    Encoder(const CodecConfig& cfg, Rng& rng) {
        validate(cfg);
        const int c = cfg.base_width;
        net_.template add<nn::Conv2d<T>>("stem", 3, c, 3, 1, 1, rng);
        const int stages = downsample_stages(cfg.downsample_factor);
        for (int s = 0; s < stages; ++s)
            net_.template add<nn::ResidualBlockWithStride<T>>("down" + std::to_string(s), c, c, rng);
        net_.template add<nn::AttentionBlock<T>>("attn0", c, cfg.attention_units, rng);
        net_.template add<nn::ResidualBlock<T>>("res", c, rng);
        net_.template add<nn::AttentionBlock<T>>("attn1", c, cfg.attention_units, rng);
        net_.template add<nn::Conv2d<T>>("head", c, cfg.c_out, 1, 1, 0, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override { return net_.forward(x); }
    Tensor<T> backward(const Tensor<T>& g) override { return net_.backward(g); }
    void collect(nn::ParamList<T>& out, const std::string& prefix) override { net_.collect(out, prefix); }

private:
    nn::Sequential<T> net_;
};

/// Mirror of the encoder: 1x1 conv -> attention -> residual block ->
/// attention -> pixel-shuffle upsampling blocks (inverse GDN) -> conv -> sigmoid.
template <class T>
class Decoder : public nn::Module<T> {
public:
    Decoder(const CodecConfig& cfg, Rng& rng) {
        validate(cfg);
        const int c = cfg.base_width;
        net_.template add<nn::Conv2d<T>>("head", cfg.c_out, c, 1, 1, 0, rng);
        net_.template add<nn::AttentionBlock<T>>("attn0", c, cfg.attention_units, rng);
        net_.template add<nn::ResidualBlock<T>>("res", c, rng);
        net_.template add<nn::AttentionBlock<T>>("attn1", c, cfg.attention_units, rng);
        const int stages = downsample_stages(cfg.downsample_factor);
        for (int s = 0; s < stages; ++s)
            net_.template add<nn::ResidualBlockUpsample<T>>("up" + std::to_string(s), c, c, rng);
        net_.template add<nn::Conv2d<T>>("tail", c, 3, 3, 1, 1, rng);
        net_.template add<nn::Sigmoid<T>>("out");
    }

    Tensor<T> forward(const Tensor<T>& x) override { return net_.forward(x); }
    Tensor<T> backward(const Tensor<T>& g) override { return net_.backward(g); }
    void collect(nn::ParamList<T>& out, const std::string& prefix) override { net_.collect(out, prefix); }

private:
    nn::Sequential<T> net_;
};

/// Encoder/decoder pair working on [0, peak] pixel tensors.
template <class T>
class Codec {
public:
    Codec(const CodecConfig& cfg, Rng& rng) : cfg_(cfg), encoder_(cfg, rng), decoder_(cfg, rng) {}

    const CodecConfig& config() const { return cfg_; }
    Encoder<T>& encoder() { return encoder_; }
    Decoder<T>& decoder() { return decoder_; }

    nn::ParamList<T> parameters() {
        nn::ParamList<T> out;
        encoder_.collect(out, "encoder.");
        decoder_.collect(out, "decoder.");
        return out;
    }

    Tensor<T> normalize(const Tensor<T>& pixels) const {
        require(pixels.c() == 3, ErrorCategory::shape, "codec expects 3-channel images");
        channel_uses(cfg_, pixels.h(), pixels.w());
        Tensor<T> x = pixels;
        const T inv = static_cast<T>(1.0 / cfg_.pixel_peak);
        for (auto& v : x.values()) v *= inv;
        return x;
    }

    Tensor<T> denormalize(const Tensor<T>& unit) const {
        Tensor<T> x = unit;
        const T peak = static_cast<T>(cfg_.pixel_peak);
        for (auto& v : x.values()) v = std::clamp(v * peak, T(0), peak);
        return x;
    }

    LatentBatch encode(const Tensor<T>& pixels) { return pack_latent(encoder_.forward(normalize(pixels))); }

    Tensor<T> decode(const LatentBatch& y) {
        require(y.k == cfg_.c_out / 2 * y.grid_h * y.grid_w, ErrorCategory::shape,
                "latent length " + std::to_string(y.k) + " inconsistent with c_out " + std::to_string(cfg_.c_out) +
                    " on a " + std::to_string(y.grid_h) + "x" + std::to_string(y.grid_w) + " grid");
        Tensor<T> t = unpack_latent<T>(y.z, y.batch, cfg_.c_out, y.grid_h, y.grid_w);
        return denormalize(decoder_.forward(t));
    }

private:
    CodecConfig cfg_;
    Encoder<T> encoder_;
    Decoder<T> decoder_;
};

/// z * sqrt(k P) / ||z||: the unquantized baseline's channel input.
inline std::vector<Complex> deepjscc_normalize(std::span<const Complex> z, double power_budget) {
    double n2 = 0.0;
    for (const auto& v : z) n2 += std::norm(v);
    require(n2 > 0.0 && std::isfinite(n2), ErrorCategory::shape, "cannot normalise a zero-norm latent");
    const double s = std::sqrt(static_cast<double>(z.size()) * power_budget / n2);
    std::vector<Complex> out(z.begin(), z.end());
    for (auto& v : out) v *= s;
    return out;
}

/// Vector-Jacobian product of deepjscc_normalize.
inline std::vector<Complex> deepjscc_normalize_backward(std::span<const Complex> z, double power_budget,
                                                        std::span<const Complex> grad) {
    double n2 = 0.0, dot = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        n2 += std::norm(z[i]);
        dot += z[i].real() * grad[i].real() + z[i].imag() * grad[i].imag();
    }
    const double s = std::sqrt(static_cast<double>(z.size()) * power_budget / n2);
    std::vector<Complex> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = s * (grad[i] - (dot / n2) * z[i]);
    return out;
}

} // namespace jscc
