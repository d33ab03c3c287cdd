#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "jscc/constellation.hpp"
#include "jscc/error.hpp"

namespace jscc {

/// Hardness recurrence sigma(t) = min(cap, sigma(t-1) + increment * floor(t / period)).
struct AnnealSchedule {
    double initial = 5.0;
    double increment = 5.0;
    double cap = 100.0;
    long period = 10000;
};

struct AnnealState {
    long step = 0;
    double sigma_q = 5.0;
};

inline AnnealState anneal_start(const AnnealSchedule& s = {}) { return {0, std::min(s.initial, s.cap)}; }

/// Advances the counter by one parameter update and applies the recurrence.
inline AnnealState anneal_step(AnnealState s, const AnnealSchedule& sched = {}) {
    s.step += 1;
    const double bump = sched.increment * static_cast<double>(s.step / sched.period);
    s.sigma_q = std::min(sched.cap, s.sigma_q + bump);
    return s;
}

/// Value of the recurrence after `t` updates, by repeated application.
inline double anneal_sigma_at(long t, const AnnealSchedule& sched = {}) {
    AnnealState s = anneal_start(sched);
    while (s.step < t) {
        // Once capped the value never moves again.
        if (s.sigma_q >= sched.cap) return sched.cap;
        s = anneal_step(s, sched);
    }
    return s.sigma_q;
}

inline double squared_distance(const Complex& a, const Complex& b) {
    const double dr = a.real() - b.real();
    const double di = a.imag() - b.imag();
    return dr * dr + di * di;
}

/// Index of the nearest point; ties go to the lowest index.
inline std::size_t nearest_index(const Complex& z, const Constellation& c) {
    std::size_t best = 0;
    double best_d = squared_distance(z, c[0]);
    for (std::size_t j = 1; j < c.order(); ++j) {
        const double d = squared_distance(z, c[j]);
        if (d < best_d) {
            best_d = d;
            best = j;
        }
    }
    return best;
}

inline std::vector<Complex> hard_quantize(std::span<const Complex> z, const Constellation& c) {
    std::vector<Complex> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = c[nearest_index(z[i], c)];
    return out;
}

/// Row-stable softmax of -sigma * |z - c_j|^2 written into `row` (length M).
inline void assignment_weights(const Complex& z, const Constellation& c, double sigma_q, double* row) {
    const std::size_t m = c.order();
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < m; ++j) {
        row[j] = -sigma_q * squared_distance(z, c[j]);
        top = std::max(top, row[j]);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        row[j] = std::exp(row[j] - top);
        sum += row[j];
    }
    const double inv = 1.0 / sum;
    for (std::size_t j = 0; j < m; ++j) row[j] *= inv;
}

struct SoftQuantization {
    std::vector<Complex> values;  ///< softmax-weighted symbol per latent entry
    std::vector<double> weights;  ///< len(z) rows of M assignment weights
    std::size_t order = 0;
};

inline SoftQuantization soft_quantize(std::span<const Complex> z, const Constellation& c, double sigma_q) {
    require(sigma_q > 0.0, ErrorCategory::contract, "soft quantization needs sigma_q > 0");
    const std::size_t m = c.order();
    SoftQuantization out;
    out.order = m;
    out.values.resize(z.size());
    out.weights.resize(z.size() * m);
    for (std::size_t i = 0; i < z.size(); ++i) {
        double* row = out.weights.data() + i * m;
        assignment_weights(z[i], c, sigma_q, row);
        Complex acc{0.0, 0.0};
        for (std::size_t j = 0; j < m; ++j) acc += row[j] * c[j];
        out.values[i] = acc;
    }
    return out;
}

/// Gradients use the complex convention dL/dRe + j dL/dIm.
struct QuantizerGradients {
    std::vector<Complex> latent;
    std::vector<Complex> points;  ///< empty unless requested
};

/// Vector-Jacobian product of the soft quantizer.
///
/// `grad_values` is dL/dz~ per latent entry. `grad_weight_column`, when not
/// empty, adds dL/dw_ij = grad_weight_column[j] to every row; this is how a
/// loss on the batch usage estimate (which is a column mean of the weights)
/// enters the backward pass.
inline QuantizerGradients soft_quantize_backward(std::span<const Complex> z, const Constellation& c,
                                                 double sigma_q, std::span<const double> weights,
                                                 std::span<const Complex> grad_values,
                                                 std::span<const double> grad_weight_column = {},
                                                 bool want_point_grad = false) {
    const std::size_t m = c.order();
    require(weights.size() == z.size() * m && grad_values.size() == z.size(), ErrorCategory::shape,
            "soft quantizer backward: buffer sizes do not match");
    require(grad_weight_column.empty() || grad_weight_column.size() == m, ErrorCategory::shape,
            "soft quantizer backward: weight-gradient column has wrong length");
    QuantizerGradients g;
    g.latent.assign(z.size(), Complex{});
    if (want_point_grad) g.points.assign(m, Complex{});

    std::vector<double> gw(m);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double* w = weights.data() + i * m;
        const Complex gi = grad_values[i];
        double dot = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            gw[j] = gi.real() * c[j].real() + gi.imag() * c[j].imag();
            if (!grad_weight_column.empty()) gw[j] += grad_weight_column[j];
            dot += w[j] * gw[j];
        }
        Complex gz{0.0, 0.0};
        for (std::size_t j = 0; j < m; ++j) {
            // d s_ij / d z_i = -2 sigma (z_i - c_j), and the reverse sign for c_j.
            const double gs = w[j] * (gw[j] - dot);
            const Complex diff = z[i] - c[j];
            const Complex term = (-2.0 * sigma_q * gs) * diff;
            gz += term;
            if (want_point_grad) g.points[j] += w[j] * gi - term;
        }
        g.latent[i] = gz;
    }
    return g;
}

/// Fixed or learned constellation plus the current hardness.
struct SoftHardQuantizer {
    Constellation constellation;
    double sigma_q = 5.0;
    bool learnable = false;
};

/// Forward pass of the straight-through quantizer. `symbols` are the hard
/// channel inputs; `soft` keeps what the backward pass needs.
struct StraightThrough {
    std::vector<Complex> symbols;
    std::vector<std::size_t> indices;
    SoftQuantization soft;
};

inline StraightThrough straight_through_quantize(std::span<const Complex> z, const SoftHardQuantizer& q) {
    StraightThrough st;
    st.indices.resize(z.size());
    st.symbols.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        st.indices[i] = nearest_index(z[i], q.constellation);
        st.symbols[i] = q.constellation[st.indices[i]];
    }
    st.soft = soft_quantize(z, q.constellation, q.sigma_q);
    return st;
}

/// The surrogate gradient: identical to the soft quantizer's at the same inputs.
inline QuantizerGradients straight_through_backward(std::span<const Complex> z, const SoftHardQuantizer& q,
                                                    const StraightThrough& st,
                                                    std::span<const Complex> grad_symbols,
                                                    std::span<const double> grad_weight_column = {}) {
    return soft_quantize_backward(z, q.constellation, q.sigma_q, st.soft.weights, grad_symbols,
                                  grad_weight_column, q.learnable);
}

} // namespace jscc
