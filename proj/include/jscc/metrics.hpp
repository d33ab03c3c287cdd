#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "jscc/error.hpp"
#include "jscc/tensor.hpp"

namespace jscc {

inline constexpr double kPsnrCap = 100.0;

template <class T>
void require_same_images(const Tensor<T>& x, const Tensor<T>& y) {
    require(x.same_shape(y), ErrorCategory::shape,
            "metric inputs differ in shape: " + x.shape_string() + " vs " + y.shape_string());
}

/// Per-image mean squared error over all pixels and channels.
template <class T>
std::vector<double> mse(const Tensor<T>& x, const Tensor<T>& y) {
    require_same_images(x, y);
    const std::size_t per = static_cast<std::size_t>(x.c()) * x.h() * x.w();
    std::vector<double> out(x.n(), 0.0);
    for (int b = 0; b < x.n(); ++b) {
        const T* px = x.sample(b);
        const T* py = y.sample(b);
        double s = 0.0;
        for (std::size_t i = 0; i < per; ++i) {
            const double d = static_cast<double>(px[i]) - static_cast<double>(py[i]);
            s += d * d;
        }
        out[b] = per ? s / static_cast<double>(per) : 0.0;
    }
    return out;
}

inline double psnr_from_mse(double mse_value, double peak, double cap = kPsnrCap) {
    require(peak > 0.0, ErrorCategory::contract, "PSNR peak value must be positive");
    if (mse_value <= 0.0) return cap;
    return std::min(cap, 10.0 * std::log10(peak * peak / mse_value));
}

template <class T>
std::vector<double> psnr(const Tensor<T>& x, const Tensor<T>& y, double peak = 255.0, double cap = kPsnrCap) {
    auto m = mse(x, y);
    for (auto& v : m) v = psnr_from_mse(v, peak, cap);
    return m;
}

struct MsSsimParams {
    int scales = 5;
    std::vector<double> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
    int window = 11;
    double window_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double peak = 255.0;

    double v1() const { return (k1 * peak) * (k1 * peak); }
    double v2() const { return (k2 * peak) * (k2 * peak); }
    double v3() const { return v2() / 2.0; }

    /// First `s` default weights, renormalised to sum to one.
    static MsSsimParams with_scales(int s, double peak = 255.0) {
        MsSsimParams p;
        p.scales = s;
        p.peak = peak;
        p.weights.resize(static_cast<std::size_t>(s));
        double total = 0.0;
        for (double w : p.weights) total += w;
        for (double& w : p.weights) w /= total;
        return p;
    }

    int min_size() const { return window * (1 << (scales - 1)); }
};

inline void validate(const MsSsimParams& p) {
    require(p.scales >= 1 && static_cast<int>(p.weights.size()) == p.scales, ErrorCategory::contract,
            "MS-SSIM needs one weight per scale");
    for (double w : p.weights) require(w >= 0.0, ErrorCategory::contract, "MS-SSIM weights must be >= 0");
    require(p.window >= 1 && p.window_sigma > 0.0 && p.peak > 0.0, ErrorCategory::contract,
            "MS-SSIM window and dynamic range must be positive");
}

/// Mean luminance, contrast and structure terms of every scale for one plane.
struct MsSsimComponents {
    double value = 0.0;
    double luminance = 0.0;                   ///< coarsest scale only
    std::vector<double> contrast;             ///< mean a_j per scale
    std::vector<double> structure;            ///< mean b_j per scale
    std::vector<double> scale_terms;          ///< factor raised to the scale weight
};

namespace detail {

struct Plane {
    int h = 0, w = 0;
    std::vector<double> v;
    Plane() = default;
    Plane(int hh, int ww) : h(hh), w(ww), v(static_cast<std::size_t>(hh) * ww, 0.0) {}
    double& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

inline std::vector<double> gaussian_taps(int size, double sigma) {
    std::vector<double> g(static_cast<std::size_t>(size));
    const double c = 0.5 * (size - 1);
    double s = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - c;
        g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        s += g[i];
    }
    for (auto& v : g) v /= s;
    return g;
}

/// Separable valid-mode Gaussian filter.
inline Plane filter_valid(const Plane& in, const std::vector<double>& g) {
    const int k = static_cast<int>(g.size());
    const int oh = in.h - k + 1, ow = in.w - k + 1;
    Plane tmp(in.h, ow);
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += g[t] * in.at(y, x + t);
            tmp.at(y, x) = s;
        }
    Plane out(oh, ow);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double s = 0.0;
            for (int t = 0; t < k; ++t) s += g[t] * tmp.at(y + t, x);
            out.at(y, x) = s;
        }
    return out;
}

/// Adjoint of filter_valid: scatters an (h-k+1)x(w-k+1) map back to h x w.
inline void filter_valid_adjoint(const Plane& g_out, const std::vector<double>& g, Plane& g_in) {
    const int k = static_cast<int>(g.size());
    Plane tmp(g_in.h, g_out.w);
    for (int y = 0; y < g_out.h; ++y)
        for (int x = 0; x < g_out.w; ++x) {
            const double v = g_out.at(y, x);
            for (int t = 0; t < k; ++t) tmp.at(y + t, x) += g[t] * v;
        }
    for (int y = 0; y < tmp.h; ++y)
        for (int x = 0; x < tmp.w; ++x) {
            const double v = tmp.at(y, x);
            for (int t = 0; t < k; ++t) g_in.at(y, x + t) += g[t] * v;
        }
}

inline Plane avg_pool2(const Plane& in) {
    Plane out(in.h / 2, in.w / 2);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out.at(y, x) = 0.25 * (in.at(2 * y, 2 * x) + in.at(2 * y, 2 * x + 1) + in.at(2 * y + 1, 2 * x) +
                                   in.at(2 * y + 1, 2 * x + 1));
    return out;
}

inline Plane product(const Plane& a, const Plane& b) {
    Plane out(a.h, a.w);
    for (std::size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] * b.v[i];
    return out;
}

struct ScaleStats {
    Plane mx, my, exx, eyy, exy;
};

inline ScaleStats scale_stats(const Plane& x, const Plane& y, const std::vector<double>& g) {
    return {filter_valid(x, g), filter_valid(y, g), filter_valid(product(x, x), g), filter_valid(product(y, y), g),
            filter_valid(product(x, y), g)};
}

/// Full MS-SSIM for one channel plane; optionally accumulates d value / d y.
inline MsSsimComponents ms_ssim_plane(const Plane& x0, const Plane& y0, const MsSsimParams& p,
                                      Plane* grad_y = nullptr) {
    validate(p);
    require(std::min(x0.h, x0.w) >= p.min_size(), ErrorCategory::shape,
            "image too small for " + std::to_string(p.scales) + " MS-SSIM scales with window " +
                std::to_string(p.window) + " (needs >= " + std::to_string(p.min_size()) + " px)");
    const auto g = gaussian_taps(p.window, p.window_sigma);
    const double v1 = p.v1(), v2 = p.v2(), v3 = p.v3();
    const int scales = p.scales;

    std::vector<Plane> xs{x0}, ys{y0};
    for (int s = 1; s < scales; ++s) {
        xs.push_back(avg_pool2(xs.back()));
        ys.push_back(avg_pool2(ys.back()));
    }

    MsSsimComponents comp;
    comp.contrast.resize(scales);
    comp.structure.resize(scales);
    comp.scale_terms.resize(scales);
    std::vector<ScaleStats> stats;
    stats.reserve(scales);
    for (int s = 0; s < scales; ++s) {
        stats.push_back(scale_stats(xs[s], ys[s], g));
        const auto& st = stats.back();
        const std::size_t n = st.mx.v.size();
        double sum_a = 0.0, sum_b = 0.0, sum_cs = 0.0, sum_l = 0.0, sum_lcs = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double mx = st.mx.v[i], my = st.my.v[i];
            const double sxx = st.exx.v[i] - mx * mx;
            const double syy = st.eyy.v[i] - my * my;
            const double sxy = st.exy.v[i] - mx * my;
            const double sx = std::sqrt(std::max(sxx, 0.0));
            const double sy = std::sqrt(std::max(syy, 0.0));
            const double a = (2.0 * sx * sy + v2) / (sxx + syy + v2);
            const double b = (sxy + v3) / (sx * sy + v3);
            const double cs = (2.0 * sxy + v2) / (sxx + syy + v2);
            const double l = (2.0 * mx * my + v1) / (mx * mx + my * my + v1);
            sum_a += a;
            sum_b += b;
            sum_cs += cs;
            sum_l += l;
            sum_lcs += l * cs;
        }
        const double inv = 1.0 / static_cast<double>(n);
        comp.contrast[s] = sum_a * inv;
        comp.structure[s] = sum_b * inv;
        if (s + 1 < scales) {
            comp.scale_terms[s] = sum_cs * inv;
        } else {
            comp.luminance = sum_l * inv;
            comp.scale_terms[s] = sum_lcs * inv;
        }
    }

    double value = 1.0;
    for (int s = 0; s < scales; ++s) value *= std::pow(std::max(comp.scale_terms[s], 0.0), p.weights[s]);
    comp.value = value;
    if (!grad_y) return comp;

    std::vector<Plane> grads(scales);
    for (int s = 0; s < scales; ++s) grads[s] = Plane(ys[s].h, ys[s].w);

    for (int s = 0; s < scales; ++s) {
        const double term = comp.scale_terms[s];
        if (term <= 0.0 || p.weights[s] == 0.0) continue;
        // d value / d term_s, computed without dividing by a possibly tiny term.
        double dterm = p.weights[s] * std::pow(term, p.weights[s] - 1.0);
        for (int t = 0; t < scales; ++t)
            if (t != s) dterm *= std::pow(std::max(comp.scale_terms[t], 0.0), p.weights[t]);
        if (dterm == 0.0) continue;

        const auto& st = stats[s];
        const std::size_t n = st.mx.v.size();
        const double scale = dterm / static_cast<double>(n);
        Plane g_my(st.mx.h, st.mx.w), g_eyy(st.mx.h, st.mx.w), g_exy(st.mx.h, st.mx.w);
        const bool last = (s + 1 == scales);
        for (std::size_t i = 0; i < n; ++i) {
            const double mx = st.mx.v[i], my = st.my.v[i];
            const double sxx = st.exx.v[i] - mx * mx;
            const double syy = st.eyy.v[i] - my * my;
            const double sxy = st.exy.v[i] - mx * my;
            const double num = 2.0 * sxy + v2, den = sxx + syy + v2;
            const double cs = num / den;
            // cs depends on y through syy (= eyy - my^2) and sxy (= exy - mx my).
            const double dcs_dsxy = 2.0 / den;
            const double dcs_dsyy = -num / (den * den);
            double dcs_dmy = dcs_dsxy * (-mx) + dcs_dsyy * (-2.0 * my);
            double dcs_deyy = dcs_dsyy;
            double dcs_dexy = dcs_dsxy;
            if (last) {
                const double ln = 2.0 * mx * my + v1, ld = mx * mx + my * my + v1;
                const double l = ln / ld;
                const double dl_dmy = 2.0 * mx / ld - ln * 2.0 * my / (ld * ld);
                dcs_dmy = l * dcs_dmy + cs * dl_dmy;
                dcs_deyy *= l;
                dcs_dexy *= l;
            }
            g_my.v[i] = scale * dcs_dmy;
            g_eyy.v[i] = scale * dcs_deyy;
            g_exy.v[i] = scale * dcs_dexy;
        }
        Plane a_my(ys[s].h, ys[s].w), a_eyy(ys[s].h, ys[s].w), a_exy(ys[s].h, ys[s].w);
        filter_valid_adjoint(g_my, g, a_my);
        filter_valid_adjoint(g_eyy, g, a_eyy);
        filter_valid_adjoint(g_exy, g, a_exy);
        auto& gy = grads[s];
        for (std::size_t i = 0; i < gy.v.size(); ++i)
            gy.v[i] += a_my.v[i] + 2.0 * ys[s].v[i] * a_eyy.v[i] + xs[s].v[i] * a_exy.v[i];
    }
    // Push coarse-scale gradients back through the 2x2 average pooling.
    for (int s = scales - 1; s >= 1; --s) {
        auto& fine = grads[s - 1];
        const auto& coarse = grads[s];
        for (int y = 0; y < coarse.h; ++y)
            for (int x = 0; x < coarse.w; ++x) {
                const double v = 0.25 * coarse.at(y, x);
                fine.at(2 * y, 2 * x) += v;
                fine.at(2 * y, 2 * x + 1) += v;
                fine.at(2 * y + 1, 2 * x) += v;
                fine.at(2 * y + 1, 2 * x + 1) += v;
            }
    }
    for (std::size_t i = 0; i < grad_y->v.size(); ++i) grad_y->v[i] += grads[0].v[i];
    return comp;
}

template <class T>
Plane to_plane(const Tensor<T>& t, int b, int c) {
    Plane p(t.h(), t.w());
    const T* src = t.plane(b, c);
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = static_cast<double>(src[i]);
    return p;
}

} // namespace detail

/// Per-image MS-SSIM, averaged over colour channels.
template <class T>
std::vector<double> ms_ssim(const Tensor<T>& x, const Tensor<T>& y, const MsSsimParams& p = {}) {
    require_same_images(x, y);
    std::vector<double> out(x.n(), 0.0);
    for (int b = 0; b < x.n(); ++b) {
        double s = 0.0;
        for (int c = 0; c < x.c(); ++c)
            s += detail::ms_ssim_plane(detail::to_plane(x, b, c), detail::to_plane(y, b, c), p).value;
        out[b] = s / x.c();
    }
    return out;
}

/// Per-scale terms of one channel of one image.
template <class T>
MsSsimComponents ms_ssim_components(const Tensor<T>& x, const Tensor<T>& y, int b, int c,
                                    const MsSsimParams& p = {}) {
    require_same_images(x, y);
    return detail::ms_ssim_plane(detail::to_plane(x, b, c), detail::to_plane(y, b, c), p);
}

/// Per-image MS-SSIM plus d(sum_b ms_ssim_b)/d y written into `grad_y`.
template <class T>
std::vector<double> ms_ssim_with_grad(const Tensor<T>& x, const Tensor<T>& y, const MsSsimParams& p,
                                      Tensor<double>& grad_y) {
    require_same_images(x, y);
    grad_y = Tensor<double>(y.n(), y.c(), y.h(), y.w());
    std::vector<double> out(x.n(), 0.0);
    for (int b = 0; b < x.n(); ++b) {
        double s = 0.0;
        for (int c = 0; c < x.c(); ++c) {
            detail::Plane g(y.h(), y.w());
            s += detail::ms_ssim_plane(detail::to_plane(x, b, c), detail::to_plane(y, b, c), p, &g).value;
            double* dst = grad_y.plane(b, c);
            for (std::size_t i = 0; i < g.v.size(); ++i) dst[i] = g.v[i] / x.c();
        }
        out[b] = s / x.c();
    }
    return out;
}

} // namespace jscc
