#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "jscc/nn/module.hpp"

namespace jscc::nn {

/// 2-D convolution (cross-correlation) with square kernels, lowered to GEMM.
template <class T>
class Conv2d : public Module<T> {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using MapM = Eigen::Map<Mat>;
    using CMapM = Eigen::Map<const Mat>;

public:
    Conv2d(int in, int out, int kernel, int stride, int padding, Rng& rng)
        : in_(in), out_(out), k_(kernel), stride_(stride), pad_(padding),
          weight_("weight", out, in, kernel, kernel), bias_("bias", 1, out, 1, 1) {
        const int fan_in = in * kernel * kernel;
        fan_in_uniform(weight_.value, fan_in, rng);
        fan_in_uniform(bias_.value, fan_in, rng);
    }

    /// "Same" padding for odd kernels.
    static Conv2d same(int in, int out, int kernel, int stride, Rng& rng) {
        return Conv2d(in, out, kernel, stride, kernel / 2, rng);
    }

    int out_size(int n) const { return (n + 2 * pad_ - k_) / stride_ + 1; }

    Tensor<T> forward(const Tensor<T>& x) override {
        require(x.c() == in_, ErrorCategory::shape,
                "conv expects " + std::to_string(in_) + " channels, got " + std::to_string(x.c()));
        in_h_ = x.h();
        in_w_ = x.w();
        const int oh = out_size(x.h()), ow = out_size(x.w());
        const int rows = in_ * k_ * k_;
        const int cols = oh * ow;
        cols_.assign(static_cast<std::size_t>(x.n()) * rows * cols, T(0));
        Tensor<T> y(x.n(), out_, oh, ow);
        CMapM w(weight_.value.data(), out_, rows);
        for (int b = 0; b < x.n(); ++b) {
            T* col = cols_.data() + static_cast<std::size_t>(b) * rows * cols;
            im2col(x.sample(b), x.h(), x.w(), oh, ow, col);
            MapM out(y.sample(b), out_, cols);
            out.noalias() = w * CMapM(col, rows, cols);
            for (int o = 0; o < out_; ++o) out.row(o).array() += bias_.value[o];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        const int oh = g.h(), ow = g.w();
        const int rows = in_ * k_ * k_;
        const int cols = oh * ow;
        Tensor<T> gx(g.n(), in_, in_h_, in_w_);
        CMapM w(weight_.value.data(), out_, rows);
        MapM gw(weight_.grad.data(), out_, rows);
        AlignedVector<T> gcol(static_cast<std::size_t>(rows) * cols);
        for (int b = 0; b < g.n(); ++b) {
            const T* col = cols_.data() + static_cast<std::size_t>(b) * rows * cols;
            CMapM go(g.sample(b), out_, cols);
            gw.noalias() += go * CMapM(col, rows, cols).transpose();
            for (int o = 0; o < out_; ++o) bias_.grad[o] += go.row(o).sum();
            MapM gc(gcol.data(), rows, cols);
            gc.noalias() = w.transpose() * go;
            col2im(gcol.data(), oh, ow, gx.sample(b));
        }
        return gx;
    }

    void collect(ParamList<T>& out, const std::string& prefix) override {
        weight_.name = prefix + "weight";
        bias_.name = prefix + "bias";
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    Param<T>& weight() { return weight_; }
    Param<T>& bias() { return bias_; }

private:
    void im2col(const T* src, int h, int w, int oh, int ow, T* col) const {
        for (int c = 0; c < in_; ++c)
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx) {
                    T* row = col + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * oh * ow;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky;
                        T* dst = row + oy * ow;
                        if (iy < 0 || iy >= h) {
                            for (int ox = 0; ox < ow; ++ox) dst[ox] = T(0);
                            continue;
                        }
                        const T* line = src + (static_cast<std::size_t>(c) * h + iy) * w;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx;
                            dst[ox] = (ix >= 0 && ix < w) ? line[ix] : T(0);
                        }
                    }
                }
    }

    void col2im(const T* col, int oh, int ow, T* dst) const {
        const int h = in_h_, w = in_w_;
        for (int c = 0; c < in_; ++c)
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx) {
                    const T* row = col + static_cast<std::size_t>((c * k_ + ky) * k_ + kx) * oh * ow;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int iy = oy * stride_ - pad_ + ky;
                        if (iy < 0 || iy >= h) continue;
                        T* line = dst + (static_cast<std::size_t>(c) * h + iy) * w;
                        const T* srow = row + oy * ow;
                        for (int ox = 0; ox < ow; ++ox) {
                            const int ix = ox * stride_ - pad_ + kx;
                            if (ix >= 0 && ix < w) line[ix] += srow[ox];
                        }
                    }
                }
    }

    int in_, out_, k_, stride_, pad_;
    Param<T> weight_, bias_;
    int in_h_ = 0, in_w_ = 0;
    AlignedVector<T> cols_;
};

} // namespace jscc::nn
