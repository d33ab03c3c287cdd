#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "jscc/constellation.hpp"
#include "jscc/error.hpp"
#include "jscc/format.hpp"
#include "jscc/random.hpp"

namespace jscc {

enum class ChannelKind { static_awgn, slow_fading };

inline const char* channel_name(ChannelKind k) { return k == ChannelKind::static_awgn ? "awgn" : "fading"; }

inline ChannelKind parse_channel(const std::string& s) {
    if (s == "awgn" || s == "static_awgn") return ChannelKind::static_awgn;
    if (s == "fading" || s == "slow_fading") return ChannelKind::slow_fading;
    throw Error(ErrorCategory::config, "unknown channel kind '" + s + "' (expected awgn|fading)");
}

/// Static AWGN assumes transmitter CSI (precoding allowed); slow fading does not.
struct ChannelScenario {
    ChannelKind kind = ChannelKind::static_awgn;
    double snr_db = 10.0;  ///< +inf means noiseless
    double power_budget = 1.0;

    bool csi_at_transmitter() const { return kind == ChannelKind::static_awgn; }
};

/// One gain draw (held for a whole image) and the complex noise power.
struct ChannelRealization {
    Complex h{1.0, 0.0};
    double noise_power = 0.0;
    bool csi_at_transmitter = true;
};

/// sigma^2 = E|h|^2 * P / 10^(snr/10); +inf dB gives zero noise.
inline double snr_to_noise_power(double snr_db, double power_budget, double mean_square_gain = 1.0) {
    require(power_budget > 0.0 && mean_square_gain > 0.0, ErrorCategory::channel,
            "SNR conversion needs positive power and gain");
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return mean_square_gain * power_budget / std::pow(10.0, snr_db / 10.0);
}

inline double noise_power_to_snr(double noise_power, double power_budget, double mean_square_gain = 1.0) {
    return 10.0 * std::log10(mean_square_gain * power_budget / noise_power);
}

inline Complex draw_fading_gain(Rng& rng) {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

inline ChannelRealization draw_realization(const ChannelScenario& s, Rng& rng) {
    ChannelRealization r;
    r.noise_power = snr_to_noise_power(s.snr_db, s.power_budget, 1.0);
    r.csi_at_transmitter = s.csi_at_transmitter();
    r.h = s.kind == ChannelKind::static_awgn ? Complex{1.0, 0.0} : draw_fading_gain(rng);
    return r;
}

inline double average_power(std::span<const Complex> z) {
    double s = 0.0;
    for (const auto& v : z) s += std::norm(v);
    return z.empty() ? 0.0 : s / static_cast<double>(z.size());
}

/// y = h z + n with n ~ CN(0, sigma^2): variance sigma^2/2 per real component.
inline std::vector<Complex> transmit(std::span<const Complex> z, const ChannelRealization& r, double power_budget,
                                     Rng& rng) {
    const double p = average_power(z);
    require(p <= power_budget * (1.0 + 1e-6), ErrorCategory::channel,
            "power constraint violated: measured average power " + format_number(p) + " exceeds budget " +
                format_number(power_budget));
    std::vector<Complex> y(z.size());
    if (r.noise_power > 0.0) {
        std::normal_distribution<double> n(0.0, std::sqrt(r.noise_power / 2.0));
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double nr = n(rng);
            const double ni = n(rng);
            y[i] = r.h * z[i] + Complex{nr, ni};
        }
    } else {
        for (std::size_t i = 0; i < z.size(); ++i) y[i] = r.h * z[i];
    }
    return y;
}

/// Receiver-side h* / |h|^2 scaling.
inline Complex equalizer_coefficient(const ChannelRealization& r) {
    const double g = std::norm(r.h);
    require(g > 0.0, ErrorCategory::channel, "equalization impossible: zero channel gain");
    return std::conj(r.h) / g;
}

inline std::vector<Complex> equalize(std::span<const Complex> y, const ChannelRealization& r) {
    const Complex a = equalizer_coefficient(r);
    std::vector<Complex> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = a * y[i];
    return out;
}

/// Transmitter-side unit phasor h* / |h|.
inline Complex precoder_coefficient(const ChannelRealization& r) {
    require(r.csi_at_transmitter, ErrorCategory::contract, "precoding requires channel state at the transmitter");
    const double mag = std::abs(r.h);
    require(mag > 0.0, ErrorCategory::channel, "precoding impossible: zero channel gain");
    return std::conj(r.h) / mag;
}

inline std::vector<Complex> precode(std::span<const Complex> z, const ChannelRealization& r) {
    const Complex a = precoder_coefficient(r);
    std::vector<Complex> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = a * z[i];
    return out;
}

} // namespace jscc
