#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "jscc/image_io.hpp"
#include "jscc/random.hpp"

namespace jscc {

/// Smooth procedural RGB image: a colour gradient plus a few soft blobs.
inline Image synthetic_image(int width, int height, std::uint64_t seed, int blobs = 3) {
    Rng rng = make_rng(seed, {0x53594e54u});
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double base[3], gx[3], gy[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = 40.0 + 170.0 * u(rng);
        gx[c] = (u(rng) - 0.5) * 80.0;
        gy[c] = (u(rng) - 0.5) * 80.0;
    }
    struct Blob {
        double cx, cy, r, amp[3];
    };
    std::vector<Blob> bs(static_cast<std::size_t>(blobs));
    for (auto& b : bs) {
        b.cx = u(rng) * width;
        b.cy = u(rng) * height;
        b.r = (0.15 + 0.25 * u(rng)) * std::min(width, height);
        for (double& a : b.amp) a = (u(rng) - 0.5) * 120.0;
    }
    Image img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double fx = width > 1 ? static_cast<double>(x) / (width - 1) - 0.5 : 0.0;
            const double fy = height > 1 ? static_cast<double>(y) / (height - 1) - 0.5 : 0.0;
            for (int c = 0; c < 3; ++c) {
                double v = base[c] + gx[c] * fx + gy[c] * fy;
                for (const auto& b : bs) {
                    const double d2 = ((x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy)) / (b.r * b.r);
                    v += b.amp[c] * std::exp(-d2);
                }
                img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
            }
        }
    return img;
}

/// Writes `count` synthetic PNGs named img_0000.png, img_0001.png, ...
inline void write_synthetic_dataset(const std::string& dir, int count, int width, int height, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    for (int i = 0; i < count; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "img_%04d.png", i);
        write_png((std::filesystem::path(dir) / name).string(),
                  synthetic_image(width, height, derive_seed(seed, {static_cast<std::uint64_t>(i)})));
    }
}

} // namespace jscc
