#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "jscc/jscc.hpp"

namespace testing_support {

inline jscc::Tensor<double> random_images(int n, int h, int w, std::uint64_t seed, double lo = 0.0, double hi = 255.0) {
    jscc::Tensor<double> t(n, 3, h, w);
    jscc::Rng rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.values()) v = u(rng);
    return t;
}

/// Image made from a smooth field plus noise, so SSIM terms stay away from zero.
inline jscc::Tensor<double> perturbed(const jscc::Tensor<double>& x, double noise, std::uint64_t seed) {
    jscc::Tensor<double> y = x;
    jscc::Rng rng(seed);
    std::normal_distribution<double> g(0.0, noise);
    for (auto& v : y.values()) v = std::clamp(v + g(rng), 0.0, 255.0);
    return y;
}

/// Direct 2-D MS-SSIM written from the definition: full 2-D Gaussian window,
/// explicit local statistics, no separable filtering or shared code paths.
inline double reference_ms_ssim_plane(std::vector<double> x, std::vector<double> y, int h, int w, int scales,
                                      const std::vector<double>& weights, int win, double sigma, double peak) {
    std::vector<double> kernel(static_cast<std::size_t>(win * win));
    double ks = 0.0;
    const double c = (win - 1) / 2.0;
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double v = std::exp(-((i - c) * (i - c) + (j - c) * (j - c)) / (2 * sigma * sigma));
            kernel[i * win + j] = v;
            ks += v;
        }
    for (auto& v : kernel) v /= ks;
    const double C1 = (0.01 * peak) * (0.01 * peak), C2 = (0.03 * peak) * (0.03 * peak);

    double result = 1.0;
    for (int s = 0; s < scales; ++s) {
        const int oh = h - win + 1, ow = w - win + 1;
        double acc_cs = 0.0, acc_lcs = 0.0;
        for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
                double mx = 0, my = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double k = kernel[i * win + j];
                        mx += k * x[(oy + i) * w + ox + j];
                        my += k * y[(oy + i) * w + ox + j];
                    }
                double vx = 0, vy = 0, cxy = 0;
                for (int i = 0; i < win; ++i)
                    for (int j = 0; j < win; ++j) {
                        const double k = kernel[i * win + j];
                        const double dx = x[(oy + i) * w + ox + j] - mx, dy = y[(oy + i) * w + ox + j] - my;
                        vx += k * dx * dx;
                        vy += k * dy * dy;
                        cxy += k * dx * dy;
                    }
                const double cs = (2 * cxy + C2) / (vx + vy + C2);
                const double l = (2 * mx * my + C1) / (mx * mx + my * my + C1);
                acc_cs += cs;
                acc_lcs += l * cs;
            }
        const double n = static_cast<double>(oh) * ow;
        const double term = (s + 1 < scales) ? acc_cs / n : acc_lcs / n;
        result *= std::pow(std::max(term, 0.0), weights[s]);
        if (s + 1 < scales) {
            const int nh = h / 2, nw = w / 2;
            std::vector<double> x2(static_cast<std::size_t>(nh * nw)), y2(x2.size());
            for (int i = 0; i < nh; ++i)
                for (int j = 0; j < nw; ++j) {
                    x2[i * nw + j] = (x[2 * i * w + 2 * j] + x[2 * i * w + 2 * j + 1] + x[(2 * i + 1) * w + 2 * j] +
                                      x[(2 * i + 1) * w + 2 * j + 1]) / 4;
                    y2[i * nw + j] = (y[2 * i * w + 2 * j] + y[2 * i * w + 2 * j + 1] + y[(2 * i + 1) * w + 2 * j] +
                                      y[(2 * i + 1) * w + 2 * j + 1]) / 4;
                }
            x.swap(x2);
            y.swap(y2);
            h = nh;
            w = nw;
        }
    }
    return result;
}

inline double reference_ms_ssim(const jscc::Tensor<double>& x, const jscc::Tensor<double>& y, int b,
                                const jscc::MsSsimParams& p) {
    double s = 0;
    for (int c = 0; c < x.c(); ++c) {
        std::vector<double> xp(x.plane(b, c), x.plane(b, c) + x.h() * x.w());
        std::vector<double> yp(y.plane(b, c), y.plane(b, c) + y.h() * y.w());
        s += reference_ms_ssim_plane(xp, yp, x.h(), x.w(), p.scales, p.weights, p.window, p.window_sigma, p.peak);
    }
    return s / x.c();
}

/// Distance from z to the nearest decision boundary of its closest symbol.
inline double boundary_margin(jscc::Complex z, const jscc::Constellation& c) {
    const std::size_t a = jscc::nearest_index(z, c);
    double m = 1e300;
    for (std::size_t j = 0; j < c.order(); ++j) {
        if (j == a) continue;
        const double gap = std::norm(z - c[j]) - std::norm(z - c[a]);
        m = std::min(m, gap / (2.0 * std::abs(c[j] - c[a])));
    }
    return m;
}

/// Central difference of f at x along every coordinate.
inline std::vector<double> numeric_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h = 1e-6) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double x0 = x[i];
        x[i] = x0 + h;
        const double fp = f(x);
        x[i] = x0 - h;
        const double fm = f(x);
        x[i] = x0;
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

/// max |a - b| / max(max |b|, floor)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8) {
    double diff = 0.0, scale = floor;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
    }
    return diff / scale;
}

} // namespace testing_support
