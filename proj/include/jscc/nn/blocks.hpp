#pragma once

#include <memory>
#include <string>
#include <vector>

#include "jscc/nn/activations.hpp"
#include "jscc/nn/conv.hpp"
#include "jscc/nn/gdn.hpp"
#include "jscc/nn/module.hpp"
#include "jscc/nn/pixel_shuffle.hpp"

namespace jscc::nn {

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out = a;
    out += b;
    return out;
}

/// conv3x3(stride 2) -> LeakyReLU -> conv3x3 -> GDN, plus a strided 1x1 skip.
template <class T>
class ResidualBlockWithStride : public Module<T> {
public:
    ResidualBlockWithStride(int in, int out, Rng& rng) : skip_(in, out, 1, 2, 0, rng) {
        main_.template add<Conv2d<T>>("conv1", in, out, 3, 2, 1, rng);
        main_.template add<LeakyReLU<T>>("act");
        main_.template add<Conv2d<T>>("conv2", out, out, 3, 1, 1, rng);
        main_.template add<GDN<T>>("gdn", out, false);
    }

    Tensor<T> forward(const Tensor<T>& x) override { return add(main_.forward(x), skip_.forward(x)); }
    Tensor<T> backward(const Tensor<T>& g) override { return add(main_.backward(g), skip_.backward(g)); }
    void collect(ParamList<T>& out, const std::string& prefix) override {
        main_.collect(out, prefix);
        skip_.collect(out, prefix + "skip.");
    }

private:
    Sequential<T> main_;
    Conv2d<T> skip_;
};

/// conv3x3 -> LeakyReLU -> conv3x3 -> LeakyReLU with an identity skip.
template <class T>
class ResidualBlock : public Module<T> {
public:
    ResidualBlock(int channels, Rng& rng) {
        main_.template add<Conv2d<T>>("conv1", channels, channels, 3, 1, 1, rng);
        main_.template add<LeakyReLU<T>>("act1");
        main_.template add<Conv2d<T>>("conv2", channels, channels, 3, 1, 1, rng);
        main_.template add<LeakyReLU<T>>("act2");
    }

    Tensor<T> forward(const Tensor<T>& x) override { return add(main_.forward(x), x); }
    Tensor<T> backward(const Tensor<T>& g) override { return add(main_.backward(g), g); }
    void collect(ParamList<T>& out, const std::string& prefix) override { main_.collect(out, prefix); }

private:
    Sequential<T> main_;
};

/// Sub-pixel conv (conv3x3 to 4x channels -> pixel shuffle) -> LeakyReLU ->
/// conv3x3 -> inverse GDN, plus a sub-pixel skip.
template <class T>
class ResidualBlockUpsample : public Module<T> {
public:
    ResidualBlockUpsample(int in, int out, Rng& rng) {
        main_.template add<Conv2d<T>>("subpel", in, out * 4, 3, 1, 1, rng);
        main_.template add<PixelShuffle<T>>("shuffle", 2);
        main_.template add<LeakyReLU<T>>("act");
        main_.template add<Conv2d<T>>("conv", out, out, 3, 1, 1, rng);
        main_.template add<GDN<T>>("igdn", out, true);
        skip_.template add<Conv2d<T>>("subpel", in, out * 4, 3, 1, 1, rng);
        skip_.template add<PixelShuffle<T>>("shuffle", 2);
    }

    Tensor<T> forward(const Tensor<T>& x) override { return add(main_.forward(x), skip_.forward(x)); }
    Tensor<T> backward(const Tensor<T>& g) override { return add(main_.backward(g), skip_.backward(g)); }
    void collect(ParamList<T>& out, const std::string& prefix) override {
        main_.collect(out, prefix);
        skip_.collect(out, prefix + "skip.");
    }

private:
    Sequential<T> main_, skip_;
};

/// Bottleneck unit of the attention branches: 1x1 -> ReLU -> 3x3 -> ReLU -> 1x1,
/// identity skip, ReLU.
template <class T>
class ResidualUnit : public Module<T> {
public:
    ResidualUnit(int channels, Rng& rng) {
        const int half = channels / 2 > 0 ? channels / 2 : 1;
        main_.template add<Conv2d<T>>("conv1", channels, half, 1, 1, 0, rng);
        main_.template add<ReLU<T>>("act1");
        main_.template add<Conv2d<T>>("conv2", half, half, 3, 1, 1, rng);
        main_.template add<ReLU<T>>("act2");
        main_.template add<Conv2d<T>>("conv3", half, channels, 1, 1, 0, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override { return out_act_.forward(add(main_.forward(x), x)); }
    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> gs = out_act_.backward(g);
        return add(main_.backward(gs), gs);
    }
    void collect(ParamList<T>& out, const std::string& prefix) override { main_.collect(out, prefix); }

private:
    Sequential<T> main_;
    ReLU<T> out_act_;
};

/// Simplified attention: out = x + trunk(x) * sigmoid(mask(x)).
template <class T>
class AttentionBlock : public Module<T> {
public:
    AttentionBlock(int channels, int units, Rng& rng) {
        for (int i = 0; i < units; ++i) trunk_.template add<ResidualUnit<T>>("unit" + std::to_string(i), channels, rng);
        for (int i = 0; i < units; ++i) mask_.template add<ResidualUnit<T>>("unit" + std::to_string(i), channels, rng);
        mask_.template add<Conv2d<T>>("conv", channels, channels, 1, 1, 0, rng);
    }

    Tensor<T> forward(const Tensor<T>& x) override {
        trunk_out_ = trunk_.forward(x);
        gate_ = mask_.forward(x);
        for (auto& v : gate_.values()) v = sigmoid(v);
        Tensor<T> y = x;
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += trunk_out_[i] * gate_[i];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        Tensor<T> g_trunk = g, g_mask = g;
        for (std::size_t i = 0; i < g.size(); ++i) {
            g_trunk[i] = g[i] * gate_[i];
            g_mask[i] = g[i] * trunk_out_[i] * gate_[i] * (T(1) - gate_[i]);
        }
        Tensor<T> gx = g;
        gx += trunk_.backward(g_trunk);
        gx += mask_.backward(g_mask);
        return gx;
    }

    void collect(ParamList<T>& out, const std::string& prefix) override {
        trunk_.collect(out, prefix + "trunk.");
        mask_.collect(out, prefix + "mask.");
    }

private:
    Sequential<T> trunk_, mask_;
    Tensor<T> trunk_out_, gate_;
};

} // namespace jscc::nn
