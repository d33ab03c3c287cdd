#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "support.hpp"

using namespace jscc;

namespace {

double direct_mean_power(const Constellation& c) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.order(); ++i) s += c[i].real() * c[i].real() + c[i].imag() * c[i].imag();
    return s / static_cast<double>(c.order());
}

} // namespace

TEST(Qam, FourPointsAreUnitDiagonal) {
    const auto c = build_qam(4, 1.0);
    const double a = 1.0 / std::sqrt(2.0);
    ASSERT_EQ(c.order(), 4u);
    EXPECT_NEAR(c[0].real(), -a, 1e-15);
    EXPECT_NEAR(c[0].imag(), -a, 1e-15);
    EXPECT_NEAR(c[1].real(), a, 1e-15);
    EXPECT_NEAR(c[1].imag(), -a, 1e-15);
    EXPECT_NEAR(c[3].real(), a, 1e-15);
    EXPECT_NEAR(c[3].imag(), a, 1e-15);
}

TEST(Qam, SixteenLevels) {
    const auto c = build_qam(16, 1.0);
    const double d = std::sqrt(2.0 / 5.0);
    EXPECT_NEAR(qam_spacing(16, 1.0), d, 1e-15);
    std::set<long> levels;
    for (std::size_t i = 0; i < 16; ++i) levels.insert(std::lround(c[i].real() / (d / 2)));
    EXPECT_EQ(levels, (std::set<long>{-3, -1, 1, 3}));
    EXPECT_NEAR(direct_mean_power(c), 1.0, 1e-15);
    EXPECT_NEAR(qam_max_amplitude(16, 1.0), 1.5 * d, 1e-15);
}

TEST(Qam, MeanPowerMatchesBudget) {
    for (std::size_t m : {4u, 16u, 64u, 256u, 1024u, 4096u})
        for (double p : {0.5, 1.0, 3.0}) {
            const auto c = build_qam(m, p);
            EXPECT_NEAR(direct_mean_power(c) / p, 1.0, 1e-12) << m;
            EXPECT_NEAR(c.mean_power(), p, 1e-12 * p);
        }
}

TEST(Qam, RowMajorImagThenReal) {
    const auto c = build_qam(16, 1.0);
    for (std::size_t i = 1; i < 16; ++i) {
        const bool same_row = std::abs(c[i].imag() - c[i - 1].imag()) < 1e-12;
        if (same_row)
            EXPECT_GT(c[i].real(), c[i - 1].real());
        else
            EXPECT_GT(c[i].imag(), c[i - 1].imag());
    }
}

TEST(Qam, SymmetricUnderNegationAndSwap) {
    const auto c = build_qam(64, 1.0);
    auto key = [](Complex z) { return std::pair{std::lround(z.real() * 1e9), std::lround(z.imag() * 1e9)}; };
    std::set<std::pair<long, long>> pts, neg, swp;
    for (std::size_t i = 0; i < c.order(); ++i) {
        pts.insert(key(c[i]));
        neg.insert(key(-c[i]));
        swp.insert(key({c[i].imag(), c[i].real()}));
    }
    EXPECT_EQ(pts, neg);
    EXPECT_EQ(pts, swp);
}

TEST(Qam, RejectsBadArguments) {
    EXPECT_THROW(build_qam(4, 0.0), Error);
    EXPECT_THROW(build_qam(4, -1.0), Error);
    EXPECT_THROW(build_qam(8, 1.0), Error);
    EXPECT_THROW(build_qam(2, 1.0), Error);
    try {
        build_qam(12, 1.0);
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::constellation);
    }
}

TEST(Constellation, RejectsDegenerateSets) {
    EXPECT_THROW(Constellation({Complex{1, 0}}, 1.0), Error);
    EXPECT_THROW(Constellation({Complex{1, 0}, Complex{NAN, 0}}, 1.0), Error);
    EXPECT_THROW(Constellation({Complex{1, 0}, Complex{-1, 0}}, 0.0), Error);
    Constellation c({Complex{1, 0}, Complex{-1, 0}}, 1.0);
    EXPECT_THROW(c.assign(std::vector<Complex>{Complex{1, 0}}), Error);
}

TEST(Distribution, OneHotAndUniform) {
    const std::size_t m = 8;
    std::vector<double> onehot(5 * m, 0.0), uni(5 * m, 1.0 / m);
    for (int r = 0; r < 5; ++r) onehot[r * m] = 1.0;
    const auto a = estimate_distribution(onehot, m);
    EXPECT_DOUBLE_EQ(a.probs[0], 1.0);
    for (std::size_t j = 1; j < m; ++j) EXPECT_DOUBLE_EQ(a.probs[j], 0.0);
    const auto b = estimate_distribution(uni, m);
    for (double p : b.probs) EXPECT_NEAR(p, 1.0 / m, 1e-15);
}

TEST(Distribution, HandAverage) {
    const std::vector<double> w{0.8, 0.2, 0.4, 0.6};
    const auto d = estimate_distribution(w, 2);
    EXPECT_NEAR(d.probs[0], 0.6, 1e-15);
    EXPECT_NEAR(d.probs[1], 0.4, 1e-15);
}

TEST(Distribution, RejectsMalformedRows) {
    EXPECT_THROW(estimate_distribution(std::vector<double>{0.5, 0.4}, 2), Error);
    EXPECT_THROW(estimate_distribution(std::vector<double>{1.2, -0.2}, 2), Error);
    EXPECT_THROW(estimate_distribution(std::vector<double>{1.0, 0.0, 0.5}, 2), Error);
}

TEST(Distribution, SoftmaxRowsGiveValidDistribution) {
    Rng rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    const auto c = build_qam(16, 1.0);
    std::vector<Complex> z(200);
    for (auto& v : z) v = {g(rng), g(rng)};
    const auto s = soft_quantize(z, c, 3.0);
    EXPECT_TRUE(is_valid_distribution(estimate_distribution(s.weights, 16)));
}

TEST(Renormalize, IdentityAtBudget) {
    const auto c = build_qam(16, 1.0);
    const auto r = renormalize_power(c, SymbolDistribution::uniform(16));
    for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(std::abs(r[i] - c[i]), 0.0, 1e-12);
}

TEST(Renormalize, HalvesRealAxisPair) {
    Constellation c({Complex{2, 0}, Complex{-2, 0}}, 1.0);
    const auto r = renormalize_power(c, SymbolDistribution::uniform(2));
    EXPECT_NEAR(r[0].real(), 1.0, 1e-15);
    EXPECT_NEAR(r[1].real(), -1.0, 1e-15);
}

TEST(Renormalize, ZeroPowerFails) {
    Constellation c({Complex{0, 0}, Complex{0, 0}}, 1.0);
    EXPECT_THROW(renormalize_power(c, SymbolDistribution{{0.3, 0.7}}), Error);
}

TEST(Renormalize, RandomPointsHitBudget) {
    Rng rng(11);
    std::normal_distribution<double> g(0.0, 2.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t m = 2 + trial % 30;
        std::vector<Complex> pts(m);
        for (auto& p : pts) p = {g(rng), g(rng)};
        SymbolDistribution d{std::vector<double>(m)};
        double s = 0;
        for (auto& p : d.probs) s += (p = u(rng));
        for (auto& p : d.probs) p /= s;
        const double budget = 0.1 + 3 * u(rng);
        const auto r = renormalize_power(Constellation(pts, budget), d);
        EXPECT_NEAR(r.weighted_power(d), budget, 1e-9);
    }
}

TEST(ConstellationCsv, HeaderAndRows) {
    const auto c = build_qam(4, 1.0);
    const std::string path = ::testing::TempDir() + "/const.csv";
    write_constellation_csv(path, c, SymbolDistribution::uniform(4));
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "real,imag,prob");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_NE(line.find("0.25"), std::string::npos);
    }
    EXPECT_EQ(rows, 4);
}
