#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "jscc/nn/module.hpp"

namespace jscc::nn {

/// Generalized divisive normalization across channels:
///   y_c = x_c / sqrt(beta_c + sum_k gamma_ck x_k^2)      (forward)
///   y_c = x_c * sqrt(beta_c + sum_k gamma_ck x_k^2)      (inverse)
///
/// beta = beta_min + b^2 and gamma = g^2 keep the denominator >= sqrt(beta_min).
/// Initialised to beta = 1, gamma = 0.1 I. Off-diagonal g starts at a small
/// pedestal so it still receives gradient.
template <class T>
class GDN : public Module<T> {
public:
    static constexpr double beta_min = 1e-6;
    static constexpr double off_diagonal_init = 1.0 / 262144.0;  // 2^-18

    explicit GDN(int channels, bool inverse = false)
        : channels_(channels), inverse_(inverse), beta_("beta", 1, channels, 1, 1),
          gamma_("gamma", channels, channels, 1, 1) {
        for (int c = 0; c < channels; ++c) beta_.value[c] = static_cast<T>(std::sqrt(1.0 - beta_min));
        for (int c = 0; c < channels; ++c)
            for (int k = 0; k < channels; ++k)
                gamma_.value[c * channels + k] = static_cast<T>(c == k ? std::sqrt(0.1) : off_diagonal_init);
    }

    bool inverse() const { return inverse_; }

    Tensor<T> forward(const Tensor<T>& x) override {
        require(x.c() == channels_, ErrorCategory::shape, "GDN channel mismatch");
        input_ = x;
        norm_ = Tensor<T>(x.n(), x.c(), x.h(), x.w());
        Tensor<T> y(x.n(), x.c(), x.h(), x.w());
        const int hw = x.h() * x.w();
        const int C = channels_;
        std::vector<T> beta(C), gamma(static_cast<std::size_t>(C) * C);
        effective(beta, gamma);
        std::vector<T> sq(C);
        for (int b = 0; b < x.n(); ++b) {
            const T* xs = x.sample(b);
            T* ns = norm_.sample(b);
            T* ys = y.sample(b);
            for (int p = 0; p < hw; ++p) {
                for (int k = 0; k < C; ++k) sq[k] = xs[k * hw + p] * xs[k * hw + p];
                for (int c = 0; c < C; ++c) {
                    T d = beta[c];
                    const T* gr = gamma.data() + static_cast<std::size_t>(c) * C;
                    for (int k = 0; k < C; ++k) d += gr[k] * sq[k];
                    const T s = std::sqrt(d);
                    ns[c * hw + p] = s;
                    ys[c * hw + p] = inverse_ ? xs[c * hw + p] * s : xs[c * hw + p] / s;
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        const Tensor<T>& x = input_;
        Tensor<T> gx(x.n(), x.c(), x.h(), x.w());
        const int hw = x.h() * x.w();
        const int C = channels_;
        std::vector<T> beta(C), gamma(static_cast<std::size_t>(C) * C);
        effective(beta, gamma);
        std::vector<T> g_beta(C, T(0)), g_gamma(static_cast<std::size_t>(C) * C, T(0));
        std::vector<T> gd(C);
        for (int b = 0; b < x.n(); ++b) {
            const T* xs = x.sample(b);
            const T* ns = norm_.sample(b);
            const T* gs = g.sample(b);
            T* gxs = gx.sample(b);
            for (int p = 0; p < hw; ++p) {
                for (int c = 0; c < C; ++c) {
                    const T s = ns[c * hw + p];
                    const T xv = xs[c * hw + p];
                    const T go = gs[c * hw + p];
                    // dy/dD for D = s^2
                    gd[c] = inverse_ ? go * xv / (T(2) * s) : -go * xv / (T(2) * s * s * s);
                    gxs[c * hw + p] += inverse_ ? go * s : go / s;
                }
                for (int c = 0; c < C; ++c) {
                    g_beta[c] += gd[c];
                    const T* gr = gamma.data() + static_cast<std::size_t>(c) * C;
                    T* ggr = g_gamma.data() + static_cast<std::size_t>(c) * C;
                    for (int k = 0; k < C; ++k) {
                        const T xk = xs[k * hw + p];
                        ggr[k] += gd[c] * xk * xk;
                        gxs[k * hw + p] += gd[c] * gr[k] * T(2) * xk;
                    }
                }
            }
        }
        for (int c = 0; c < C; ++c) beta_.grad[c] += T(2) * beta_.value[c] * g_beta[c];
        for (std::size_t i = 0; i < g_gamma.size(); ++i) gamma_.grad[i] += T(2) * gamma_.value[i] * g_gamma[i];
        return gx;
    }

    void collect(ParamList<T>& out, const std::string& prefix) override {
        beta_.name = prefix + "beta";
        gamma_.name = prefix + "gamma";
        out.push_back(&beta_);
        out.push_back(&gamma_);
    }

private:
    void effective(std::vector<T>& beta, std::vector<T>& gamma) const {
        for (int c = 0; c < channels_; ++c) beta[c] = static_cast<T>(beta_min) + beta_.value[c] * beta_.value[c];
        for (std::size_t i = 0; i < gamma.size(); ++i) gamma[i] = gamma_.value[i] * gamma_.value[i];
    }

    int channels_;
    bool inverse_;
    Param<T> beta_, gamma_;
    Tensor<T> input_, norm_;
};

} // namespace jscc::nn
