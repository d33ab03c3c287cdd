#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace jscc::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

/// First and second moment buffers for one flat parameter block.
template <class T>
struct AdamMoments {
    std::vector<T> m, v;
};

/// One bias-corrected Adam update; `t` is the 1-based step count.
template <class T>
void adam_update(std::span<T> value, std::span<const T> grad, AdamMoments<T>& st, const AdamConfig& cfg, long t) {
    if (st.m.size() != value.size()) {
        st.m.assign(value.size(), T(0));
        st.v.assign(value.size(), T(0));
    }
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    const double step = cfg.lr * std::sqrt(bc2) / bc1;
    const T b1 = static_cast<T>(cfg.beta1), b2 = static_cast<T>(cfg.beta2);
    // eps is applied to the bias-corrected second moment.
    const T eps_hat = static_cast<T>(cfg.eps * std::sqrt(bc2));
    for (std::size_t i = 0; i < value.size(); ++i) {
        const T gi = grad[i];
        st.m[i] = b1 * st.m[i] + (T(1) - b1) * gi;
        st.v[i] = b2 * st.v[i] + (T(1) - b2) * gi * gi;
        value[i] -= static_cast<T>(step) * st.m[i] / (std::sqrt(st.v[i]) + eps_hat);
    }
}

} // namespace jscc::nn
