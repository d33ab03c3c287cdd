#pragma once

#include "jscc/nn/module.hpp"

namespace jscc::nn {

/// (N, C*r*r, H, W) -> (N, C, H*r, W*r); out[c][y*r+i][x*r+j] = in[c*r*r + i*r + j][y][x].
template <class T>
class PixelShuffle : public Module<T> {
public:
    explicit PixelShuffle(int factor = 2) : r_(factor) {}

    Tensor<T> forward(const Tensor<T>& x) override {
        require(x.c() % (r_ * r_) == 0, ErrorCategory::shape, "pixel shuffle: channels not divisible by r^2");
        const int c_out = x.c() / (r_ * r_);
        Tensor<T> y(x.n(), c_out, x.h() * r_, x.w() * r_);
        for (int b = 0; b < x.n(); ++b)
            for (int c = 0; c < c_out; ++c)
                for (int i = 0; i < r_; ++i)
                    for (int j = 0; j < r_; ++j) {
                        const int src = c * r_ * r_ + i * r_ + j;
                        for (int yy = 0; yy < x.h(); ++yy)
                            for (int xx = 0; xx < x.w(); ++xx) y(b, c, yy * r_ + i, xx * r_ + j) = x(b, src, yy, xx);
                    }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& g) override {
        const int c_in = g.c() * r_ * r_;
        Tensor<T> gx(g.n(), c_in, g.h() / r_, g.w() / r_);
        for (int b = 0; b < g.n(); ++b)
            for (int c = 0; c < g.c(); ++c)
                for (int i = 0; i < r_; ++i)
                    for (int j = 0; j < r_; ++j) {
                        const int dst = c * r_ * r_ + i * r_ + j;
                        for (int yy = 0; yy < gx.h(); ++yy)
                            for (int xx = 0; xx < gx.w(); ++xx) gx(b, dst, yy, xx) = g(b, c, yy * r_ + i, xx * r_ + j);
                    }
        return gx;
    }

private:
    int r_;
};

} // namespace jscc::nn
