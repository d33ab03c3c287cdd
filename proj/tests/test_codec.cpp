#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace jscc;

namespace {

CodecConfig tiny() {
    CodecConfig c;
    c.c_out = 4;
    c.base_width = 4;
    c.downsample_factor = 2;
    c.attention_units = 1;
    return c;
}

} // namespace

TEST(ChannelUses, ReferenceSizes) {
    CodecConfig c;
    EXPECT_EQ(channel_uses(c, 128, 128), 8192);
    EXPECT_NEAR(bandwidth_ratio(c, 128, 128), 1.0 / 6.0, 1e-15);
    c.c_out = 2;
    EXPECT_EQ(channel_uses(c, 32, 32), 64);
    EXPECT_NEAR(bandwidth_ratio(c, 32, 32), 1.0 / 48.0, 1e-15);
    CodecConfig k;
    k.downsample_factor = 16;
    k.c_out = 32;
    EXPECT_EQ(channel_uses(k, 512, 768), 24576);
    EXPECT_NEAR(bandwidth_ratio(k, 512, 768), 1.0 / 48.0, 1e-15);
    CodecConfig one;
    one.downsample_factor = 1;
    one.c_out = 6;
    EXPECT_NEAR(bandwidth_ratio(one, 8, 8), 1.0, 1e-15);
}

TEST(ChannelUses, IndivisibleIsShapeError) {
    try {
        channel_uses(CodecConfig{}, 30, 32);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::shape);
    }
}

TEST(CodecConfig, Validation) {
    CodecConfig c;
    c.c_out = 3;
    EXPECT_THROW(validate(c), Error);
    c = CodecConfig{};
    c.downsample_factor = 6;
    EXPECT_THROW(validate(c), Error);
}

TEST(Latent, PackUnpackRoundTrip) {
    Tensor<double> t = testing_support::random_images(2, 3, 5, 1);
    Tensor<double> four(2, 4, 3, 5);
    for (std::size_t i = 0; i < four.size(); ++i) four[i] = static_cast<double>(i);
    const auto lb = pack_latent(four);
    EXPECT_EQ(lb.k, 2 * 15);
    EXPECT_EQ(lb.z[1], Complex(four(0, 0, 0, 1), four(0, 1, 0, 1)));
    EXPECT_EQ(lb.z[15], Complex(four(0, 2, 0, 0), four(0, 3, 0, 0)));
    const auto back = unpack_latent<double>(lb.z, 2, 4, 3, 5);
    for (std::size_t i = 0; i < four.size(); ++i) EXPECT_EQ(back[i], four[i]);
    EXPECT_THROW(unpack_latent<double>(lb.z, 2, 6, 3, 5), Error);
}

TEST(Codec, ShapesAndDeterminism) {
    Rng rng(1);
    CodecConfig cfg;
    cfg.base_width = 8;
    cfg.attention_units = 1;
    Codec<float> codec(cfg, rng);
    Tensor<float> x(2, 3, 32, 32);
    const auto img = testing_support::random_images(1, 32, 32, 2).cast<float>();
    for (int b = 0; b < 2; ++b)
        for (int i = 0; i < 3 * 32 * 32; ++i) x.sample(b)[i] = img[i];
    const auto lat = codec.encode(x);
    EXPECT_EQ(lat.k, channel_uses(cfg, 32, 32));
    EXPECT_EQ(lat.batch, 2);
    for (int i = 0; i < lat.k; ++i) EXPECT_EQ(lat.row(0)[i], lat.row(1)[i]);
    const auto y = codec.decode(lat);
    EXPECT_EQ(y.shape_string(), x.shape_string());
    for (float v : y.values()) {
        EXPECT_GE(v, 0.0f);
        EXPECT_LE(v, 255.0f);
    }
}

TEST(Codec, DecodeRejectsWrongLength) {
    Rng rng(1);
    Codec<float> codec(tiny(), rng);
    LatentBatch lb;
    lb.batch = 1;
    lb.grid_h = lb.grid_w = 2;
    lb.k = 5;
    lb.z.resize(5);
    try {
        codec.decode(lb);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::shape);
    }
}

TEST(Codec, RejectsIndivisibleImage) {
    Rng rng(1);
    Codec<float> codec(CodecConfig{4, 4, 4, 1}, rng);
    EXPECT_THROW(codec.encode(Tensor<float>(1, 3, 10, 12)), Error);
    EXPECT_THROW(codec.encode(Tensor<float>(1, 1, 8, 8)), Error);
}

TEST(Codec, ParameterNamesAreUnique) {
    Rng rng(1);
    Codec<float> codec(tiny(), rng);
    std::set<std::string> names;
    for (auto* p : codec.parameters()) EXPECT_TRUE(names.insert(p->name).second) << p->name;
    EXPECT_GT(names.size(), 20u);
}

TEST(Normalize, PowerConstraint) {
    const std::vector<Complex> z{Complex{2, 0}, Complex{0, 0}, Complex{0, 0}, Complex{0, 0}};
    const auto n = deepjscc_normalize(z, 1.0);
    EXPECT_NEAR(n[0].real(), 2.0, 1e-15);
    EXPECT_NEAR(average_power(n), 1.0, 1e-15);
    Rng rng(4);
    std::normal_distribution<double> g(0.0, 3.0);
    for (int t = 0; t < 20; ++t) {
        std::vector<Complex> r(37);
        for (auto& v : r) v = {g(rng), g(rng)};
        EXPECT_NEAR(average_power(deepjscc_normalize(r, 1.7)), 1.7, 1e-9);
        const auto id = deepjscc_normalize(deepjscc_normalize(r, 1.0), 1.0);
        const auto once = deepjscc_normalize(r, 1.0);
        for (std::size_t i = 0; i < r.size(); ++i) EXPECT_LT(std::abs(id[i] - once[i]), 1e-12);
    }
    EXPECT_THROW(deepjscc_normalize(std::vector<Complex>(3), 1.0), Error);
}

TEST(Normalize, BackwardMatchesFiniteDifference) {
    Rng rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<Complex> z(6), gout(6);
    for (auto& v : z) v = {g(rng), g(rng)};
    for (auto& v : gout) v = {g(rng), g(rng)};
    auto f = [&](const std::vector<double>& x) {
        std::vector<Complex> zz(6);
        for (int i = 0; i < 6; ++i) zz[i] = {x[2 * i], x[2 * i + 1]};
        const auto n = deepjscc_normalize(zz, 2.0);
        double s = 0;
        for (int i = 0; i < 6; ++i) s += n[i].real() * gout[i].real() + n[i].imag() * gout[i].imag();
        return s;
    };
    std::vector<double> flat;
    for (auto v : z) flat.insert(flat.end(), {v.real(), v.imag()});
    const auto fd = testing_support::numeric_gradient(f, flat);
    const auto an = deepjscc_normalize_backward(z, 2.0, gout);
    std::vector<double> af;
    for (auto v : an) af.insert(af.end(), {v.real(), v.imag()});
    EXPECT_LT(testing_support::relative_error(af, fd), 1e-7);
}
