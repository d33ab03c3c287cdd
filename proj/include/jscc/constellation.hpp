#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "jscc/error.hpp"
#include "jscc/format.hpp"

namespace jscc {

using Complex = std::complex<double>;

/// Probability mass over the points of a constellation.
struct SymbolDistribution {
    std::vector<double> probs;

    std::size_t size() const { return probs.size(); }

    static SymbolDistribution uniform(std::size_t m) {
        return {std::vector<double>(m, 1.0 / static_cast<double>(m))};
    }
};

inline bool is_valid_distribution(const SymbolDistribution& d, double tol = 1e-9) {
    double sum = 0.0;
    for (double p : d.probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) return false;
        sum += p;
    }
    return !d.probs.empty() && std::abs(sum - 1.0) <= tol;
}

/// Ordered channel-input alphabet with its average power budget.
class Constellation {
public:
    Constellation(std::vector<Complex> points, double power_budget, bool trainable = false)
        : points_(std::move(points)), power_budget_(power_budget), trainable_(trainable) {
        require(points_.size() >= 2, ErrorCategory::constellation,
                "constellation needs at least 2 points, got " + std::to_string(points_.size()));
        require(power_budget_ > 0.0 && std::isfinite(power_budget_), ErrorCategory::constellation,
                "power budget must be positive and finite");
        for (const auto& p : points_)
            require(std::isfinite(p.real()) && std::isfinite(p.imag()), ErrorCategory::constellation,
                    "constellation point is not finite");
    }

    std::size_t order() const { return points_.size(); }
    std::span<const Complex> points() const { return points_; }
    const Complex& operator[](std::size_t i) const { return points_[i]; }
    double power_budget() const { return power_budget_; }
    bool trainable() const { return trainable_; }
    void set_trainable(bool t) { trainable_ = t; }

    /// Replaces the points in place (optimizer updates). Size must not change.
    void assign(std::span<const Complex> pts) {
        require(pts.size() == points_.size(), ErrorCategory::constellation,
                "constellation update changes the order");
        for (const auto& p : pts)
            require(std::isfinite(p.real()) && std::isfinite(p.imag()), ErrorCategory::constellation,
                    "constellation update produced a non-finite point");
        points_.assign(pts.begin(), pts.end());
    }

    double mean_power() const {
        double s = 0.0;
        for (const auto& p : points_) s += std::norm(p);
        return s / static_cast<double>(points_.size());
    }

    double weighted_power(const SymbolDistribution& dist) const {
        require(dist.size() == points_.size(), ErrorCategory::constellation,
                "distribution size does not match constellation order");
        double s = 0.0;
        for (std::size_t j = 0; j < points_.size(); ++j) s += dist.probs[j] * std::norm(points_[j]);
        return s;
    }

    double max_power() const {
        double m = 0.0;
        for (const auto& p : points_) m = std::max(m, std::norm(p));
        return m;
    }

private:
    std::vector<Complex> points_;
    double power_budget_;
    bool trainable_;
};

/// Per-dimension spacing of a square M-QAM lattice with uniform mean power
/// `power_budget`. The lattice has L = sqrt(M) levels per axis and each axis
/// carries half of the power.
inline double qam_spacing(std::size_t order, double power_budget) {
    const auto levels = static_cast<double>(std::llround(std::sqrt(static_cast<double>(order))));
    return std::sqrt(6.0 * power_budget / (levels * levels - 1.0));
}

/// Largest per-axis amplitude of the lattice, (L-1)/2 * d.
inline double qam_max_amplitude(std::size_t order, double power_budget) {
    const auto levels = static_cast<double>(std::llround(std::sqrt(static_cast<double>(order))));
    return 0.5 * (levels - 1.0) * qam_spacing(order, power_budget);
}

/// Square QAM centred on the origin, ordered row-major by (imag, real).
inline Constellation build_qam(std::size_t order, double power_budget) {
    require(order >= 4, ErrorCategory::constellation,
            "QAM order must be at least 4, got " + std::to_string(order));
    const auto levels = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(order))));
    require(levels * levels == order, ErrorCategory::constellation,
            "QAM order must be a perfect square, got " + std::to_string(order));
    require(power_budget > 0.0 && std::isfinite(power_budget), ErrorCategory::constellation,
            "power budget must be positive");

    const double d = qam_spacing(order, power_budget);
    const double half = 0.5 * static_cast<double>(levels - 1);
    std::vector<Complex> pts;
    pts.reserve(order);
    for (std::size_t row = 0; row < levels; ++row) {
        const double im = (static_cast<double>(row) - half) * d;
        for (std::size_t col = 0; col < levels; ++col) {
            const double re = (static_cast<double>(col) - half) * d;
            pts.emplace_back(re, im);
        }
    }
    return Constellation(std::move(pts), power_budget);
}

/// Batch estimate of symbol usage from softmax assignment weights.
/// `weights` holds `rows` consecutive length-M rows (rows = B*k).
inline SymbolDistribution estimate_distribution(std::span<const double> weights, std::size_t order,
                                                double row_tol = 1e-6) {
    require(order >= 2, ErrorCategory::constellation, "distribution order must be >= 2");
    require(!weights.empty(), ErrorCategory::constellation, "empty soft-weight batch");
    require(weights.size() % order == 0, ErrorCategory::shape,
            "soft-weight buffer is not a whole number of rows");
    const std::size_t rows = weights.size() / order;
    SymbolDistribution out{std::vector<double>(order, 0.0)};
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = weights.data() + r * order;
        double s = 0.0;
        for (std::size_t j = 0; j < order; ++j) {
            require(row[j] >= 0.0, ErrorCategory::constellation, "negative soft weight");
            s += row[j];
            out.probs[j] += row[j];
        }
        require(std::abs(s - 1.0) <= row_tol, ErrorCategory::constellation,
                "soft-weight row " + std::to_string(r) + " is not normalised (sum " + format_number(s) + ")");
    }
    for (auto& p : out.probs) p /= static_cast<double>(rows);
    return out;
}

/// Scales every point by one common factor so the weighted power of `c` under
/// `dist` equals the power budget.
inline Constellation renormalize_power(const Constellation& c, const SymbolDistribution& dist) {
    const double wp = c.weighted_power(dist);
    require(wp > 0.0 && std::isfinite(wp), ErrorCategory::constellation,
            "degenerate constellation: weighted power is zero");
    const double scale = std::sqrt(c.power_budget()) / std::sqrt(wp);
    std::vector<Complex> pts(c.points().begin(), c.points().end());
    for (auto& p : pts) p *= scale;
    return Constellation(std::move(pts), c.power_budget(), c.trainable());
}

inline void write_constellation_csv(const std::string& path, const Constellation& c,
                                    const SymbolDistribution& dist) {
    require(dist.size() == c.order(), ErrorCategory::constellation,
            "distribution size does not match constellation order");
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCategory::data, "cannot open " + path + " for writing");
    out << "real,imag,prob\n";
    for (std::size_t j = 0; j < c.order(); ++j)
        out << format_number(c[j].real()) << ',' << format_number(c[j].imag()) << ','
            << format_number(dist.probs[j]) << '\n';
    require(static_cast<bool>(out), ErrorCategory::data, "write failed for " + path);
}

} // namespace jscc
