#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "jscc/nn/blocks.hpp"

using namespace jscc;
using namespace jscc::nn;

namespace {

Tensor<double> randn(int n, int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
    Tensor<double> t(n, c, h, w);
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& v : t.values()) v = g(rng);
    return t;
}

double inner(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Compares backward() against central differences of <g, forward(x)>
/// for the input and for a sample of every parameter's entries.
void check_module(Module<double>& m, Tensor<double> x, std::uint64_t seed, double tol = 1e-6) {
    const Tensor<double> y0 = m.forward(x);
    const Tensor<double> g = randn(y0.n(), y0.c(), y0.h(), y0.w(), seed);
    auto ps = parameters(m);
    zero_grad(ps);
    m.forward(x);
    const Tensor<double> gx = m.backward(g);

    const double h = 1e-6;
    Rng rng(seed + 1);
    auto probe = [&](double& slot, double analytic, const std::string& what) {
        const double v0 = slot;
        slot = v0 + h;
        const double fp = inner(g, m.forward(x));
        slot = v0 - h;
        const double fm = inner(g, m.forward(x));
        slot = v0;
        const double fd = (fp - fm) / (2 * h);
        EXPECT_NEAR(analytic, fd, tol * std::max(1.0, std::abs(fd))) << what;
    };
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    for (int t = 0; t < 12; ++t) {
        const std::size_t i = pick(rng);
        probe(x[i], gx[i], "input");
    }
    for (auto* p : ps) {
        std::uniform_int_distribution<std::size_t> pp(0, p->value.size() - 1);
        for (int t = 0; t < 4; ++t) {
            const std::size_t i = pp(rng);
            probe(p->value[i], p->grad[i], p->name);
        }
    }
}

} // namespace

TEST(Conv2d, ShapesAndGradient) {
    Rng rng(1);
    Conv2d<double> c(3, 5, 3, 2, 1, rng);
    const auto x = randn(2, 3, 8, 6, 2);
    const auto y = c.forward(x);
    EXPECT_EQ(y.shape_string(), Tensor<double>(2, 5, 4, 3).shape_string());
    check_module(c, x, 3);
    Conv2d<double> c1(4, 2, 1, 1, 0, rng);
    check_module(c1, randn(1, 4, 5, 5, 4), 5);
}

TEST(Conv2d, MatchesDirectConvolution) {
    Rng rng(2);
    Conv2d<double> c(2, 3, 3, 1, 1, rng);
    const auto x = randn(1, 2, 5, 4, 3);
    const auto y = c.forward(x);
    auto ps = parameters(c);
    const auto& w = ps[0]->value;
    const auto& b = ps[1]->value;
    for (int o = 0; o < 3; ++o)
        for (int yy = 0; yy < 5; ++yy)
            for (int xx = 0; xx < 4; ++xx) {
                double s = b[o];
                for (int i = 0; i < 2; ++i)
                    for (int ky = 0; ky < 3; ++ky)
                        for (int kx = 0; kx < 3; ++kx) {
                            const int sy = yy + ky - 1, sx = xx + kx - 1;
                            if (sy < 0 || sy >= 5 || sx < 0 || sx >= 4) continue;
                            s += w[((o * 2 + i) * 3 + ky) * 3 + kx] * x(0, i, sy, sx);
                        }
                EXPECT_NEAR(y(0, o, yy, xx), s, 1e-12);
            }
}

TEST(Activations, Gradients) {
    LeakyReLU<double> l;
    check_module(l, randn(1, 2, 4, 4, 6), 7);
    Sigmoid<double> s;
    check_module(s, randn(1, 2, 4, 4, 8), 9);
}

TEST(Gdn, ForwardInverseAndGradient) {
    GDN<double> g(4), ig(4, true);
    const auto x = randn(2, 4, 3, 3, 10);
    const auto y = g.forward(x);
    // default parameters: beta = 1, gamma = 0.1 I
    EXPECT_NEAR(y(0, 1, 1, 1), x(0, 1, 1, 1) / std::sqrt(1.0 + 0.1 * x(0, 1, 1, 1) * x(0, 1, 1, 1)), 1e-5);
    const auto z = ig.forward(x);
    EXPECT_NEAR(z(1, 2, 0, 1), x(1, 2, 0, 1) * std::sqrt(1.0 + 0.1 * x(1, 2, 0, 1) * x(1, 2, 0, 1)), 1e-5);
    for (double v : y.values()) EXPECT_TRUE(std::isfinite(v));
    check_module(g, x, 11);
    check_module(ig, x, 12);
}

TEST(Gdn, FiniteForLargeAndZeroInputs) {
    GDN<double> g(3);
    auto x = randn(1, 3, 4, 4, 13, 1e4);
    for (int i = 0; i < 8; ++i) x[i] = 0.0;
    for (double v : g.forward(x).values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(PixelShuffle, RearrangesAndInverts) {
    PixelShuffle<double> ps(2);
    auto x = randn(1, 8, 2, 3, 14);
    const auto y = ps.forward(x);
    EXPECT_EQ(y.c(), 2);
    EXPECT_EQ(y.h(), 4);
    EXPECT_EQ(y.w(), 6);
    // channel c*4 + dy*2 + dx lands at (2y+dy, 2x+dx) of output channel c
    EXPECT_EQ(y(0, 1, 3, 4), x(0, 1 * 4 + 1 * 2 + 0, 1, 2));
    check_module(ps, x, 15);
}

TEST(Blocks, Gradients) {
    Rng rng(20);
    ResidualBlockWithStride<double> down(3, 4, rng);
    check_module(down, randn(1, 3, 6, 6, 21, 0.5), 22);
    ResidualBlock<double> rb(4, rng);
    check_module(rb, randn(1, 4, 4, 4, 23, 0.5), 24);
    ResidualBlockUpsample<double> up(4, 3, rng);
    check_module(up, randn(1, 4, 3, 3, 25, 0.5), 26);
    AttentionBlock<double> at(4, 1, rng);
    check_module(at, randn(1, 4, 4, 4, 27, 0.5), 28);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    std::vector<double> v{1.0, -2.0}, g{0.5, -3.0};
    AdamMoments<double> st;
    AdamConfig cfg;
    cfg.lr = 0.01;
    adam_update<double>(v, g, st, cfg, 1);
    EXPECT_NEAR(v[0], 1.0 - 0.01, 1e-9);
    EXPECT_NEAR(v[1], -2.0 + 0.01, 1e-9);
}

TEST(Adam, MinimisesQuadratic) {
    std::vector<double> v{3.0};
    AdamMoments<double> st;
    AdamConfig cfg;
    cfg.lr = 0.05;
    for (long t = 1; t <= 2000; ++t) {
        std::vector<double> g{2.0 * (v[0] - 1.0)};
        adam_update<double>(v, g, st, cfg, t);
    }
    EXPECT_NEAR(v[0], 1.0, 1e-2);
}
