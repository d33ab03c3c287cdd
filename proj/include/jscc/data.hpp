#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "jscc/error.hpp"
#include "jscc/image_io.hpp"
#include "jscc/random.hpp"
#include "jscc/tensor.hpp"

namespace jscc {

struct DatasetSpec {
    std::string root;
    int crop_size = 128;
    double split_ratio = 0.9;  ///< training fraction
    std::uint64_t seed = 0;
    bool eval_mode = false;
};

struct NamedImage {
    std::string name;
    Image image;
};

using ImageSet = std::vector<NamedImage>;

inline constexpr std::size_t kMinSplitImages = 10;

/// All PNG/JPEG files directly under `root`, sorted by file name.
inline ImageSet load_images(const std::string& root) {
    namespace fs = std::filesystem;
    std::error_code ec;
    require(fs::is_directory(root, ec), ErrorCategory::data, "not a readable directory: " + root);
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root, ec))
        if (entry.is_regular_file() && is_supported_image(entry.path())) files.push_back(entry.path());
    require(!ec, ErrorCategory::data, "cannot list " + root + ": " + ec.message());
    std::sort(files.begin(), files.end(), [](const fs::path& a, const fs::path& b) {
        return a.filename().string() < b.filename().string();
    });
    ImageSet out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back({f.filename().string(), read_image(f.string())});
    return out;
}

/// Hash-ranked partition: each image's rank depends only on (seed, file name),
/// so the split does not depend on directory order. The validation share is
/// round((1 - ratio) * n), at least one image.
inline std::pair<ImageSet, ImageSet> split_images(ImageSet all, double ratio, std::uint64_t seed) {
    require(ratio > 0.0 && ratio < 1.0, ErrorCategory::config, "split_ratio must lie in (0, 1)");
    require(all.size() >= kMinSplitImages, ErrorCategory::data,
            "dataset needs at least " + std::to_string(kMinSplitImages) + " images, found " + std::to_string(all.size()));
    const std::size_t n = all.size();
    std::size_t n_val = static_cast<std::size_t>(std::llround((1.0 - ratio) * static_cast<double>(n)));
    n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
    std::vector<std::pair<std::uint64_t, std::size_t>> keys(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = {derive_seed(seed, {fnv1a(all[i].name)}), i};
    std::sort(keys.begin(), keys.end());
    std::vector<bool> is_val(n, false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[keys[i].second] = true;
    ImageSet train, val;
    for (std::size_t i = 0; i < n; ++i) (is_val[i] ? val : train).push_back(std::move(all[i]));
    return {std::move(train), std::move(val)};
}

inline std::pair<ImageSet, ImageSet> load_split(const DatasetSpec& spec) {
    return split_images(load_images(spec.root), spec.split_ratio, spec.seed);
}

inline Image crop(const Image& img, int y0, int x0, int h, int w) {
    require(y0 >= 0 && x0 >= 0 && y0 + h <= img.height && x0 + w <= img.width, ErrorCategory::shape,
            "crop window outside the image");
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        std::copy_n(img.rgb.data() + (static_cast<std::size_t>(y0 + y) * img.width + x0) * 3, static_cast<std::size_t>(w) * 3,
                    out.rgb.data() + static_cast<std::size_t>(y) * w * 3);
    return out;
}

inline Image center_crop(const Image& img, int size) {
    require(size <= img.width && size <= img.height, ErrorCategory::data,
            "crop size " + std::to_string(size) + " exceeds image " + std::to_string(img.width) + "x" +
                std::to_string(img.height));
    return crop(img, (img.height - size) / 2, (img.width - size) / 2, size, size);
}

inline int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

/// Padding applied around an image so both sides are multiples of `divisor`.
struct Padding {
    int top = 0, left = 0;
    int height = 0, width = 0;  ///< original size
};

/// Reflect-pads to the next multiple of `divisor`, splitting the pad evenly.
inline std::pair<Image, Padding> reflect_pad(const Image& img, int divisor) {
    const int th = (img.height + divisor - 1) / divisor * divisor;
    const int tw = (img.width + divisor - 1) / divisor * divisor;
    Padding pad{(th - img.height) / 2, (tw - img.width) / 2, img.height, img.width};
    Image out(tw, th);
    for (int y = 0; y < th; ++y)
        for (int x = 0; x < tw; ++x) {
            const int sy = reflect_index(y - pad.top, img.height);
            const int sx = reflect_index(x - pad.left, img.width);
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(sy, sx, c);
        }
    return {std::move(out), pad};
}

/// Stacks equally sized images into an NCHW tensor in [0, 255].
template <class T>
Tensor<T> to_tensor(const std::vector<const Image*>& images) {
    require(!images.empty(), ErrorCategory::data, "empty image batch");
    const int h = images.front()->height, w = images.front()->width;
    Tensor<T> t(static_cast<int>(images.size()), 3, h, w);
    for (std::size_t b = 0; b < images.size(); ++b) {
        const Image& img = *images[b];
        require(img.height == h && img.width == w, ErrorCategory::shape, "images in a batch differ in size");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) t(static_cast<int>(b), c, y, x) = static_cast<T>(img.at(y, x, c));
    }
    return t;
}

template <class T>
Tensor<T> to_tensor(const Image& img) {
    return to_tensor<T>(std::vector<const Image*>{&img});
}

/// Rounds and clamps one batch entry back to 8-bit RGB.
template <class T>
Image to_image(const Tensor<T>& t, int b) {
    Image img(t.w(), t.h());
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < t.h(); ++y)
            for (int x = 0; x < t.w(); ++x) {
                const double v = std::clamp(static_cast<double>(t(b, c, y, x)), 0.0, 255.0);
                img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v));
            }
    return img;
}

/// Seeded epoch iterator over random crops. Batch contents and crop offsets
/// depend only on (seed, epoch, batch index). The last batch of an epoch keeps
/// the remainder.
class BatchStream {
public:
    BatchStream(const ImageSet& set, int batch_size, int crop_size, std::uint64_t seed)
        : set_(&set), batch_(batch_size), crop_(crop_size), seed_(seed) {
        require(!set.empty(), ErrorCategory::data, "cannot batch an empty image set");
        require(batch_size >= 1, ErrorCategory::config, "batch size must be >= 1");
        for (const auto& ni : set)
            require(crop_size <= ni.image.width && crop_size <= ni.image.height, ErrorCategory::data,
                    "crop " + std::to_string(crop_size) + " larger than image " + ni.name);
    }

    int batches_per_epoch() const { return static_cast<int>((set_->size() + batch_ - 1) / batch_); }

    std::vector<std::size_t> epoch_order(int epoch) const {
        std::vector<std::size_t> order(set_->size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng = make_rng(seed_, {0x5348u, static_cast<std::uint64_t>(epoch)});
        std::shuffle(order.begin(), order.end(), rng);
        return order;
    }

    struct Batch {
        std::vector<std::size_t> indices;
        std::vector<std::pair<int, int>> offsets;  ///< (y, x) crop origin per image
        std::vector<Image> crops;
    };

    Batch batch(int epoch, int index) const {
        const auto order = epoch_order(epoch);
        const std::size_t begin = static_cast<std::size_t>(index) * batch_;
        require(begin < order.size(), ErrorCategory::contract, "batch index past the end of the epoch");
        const std::size_t end = std::min(order.size(), begin + batch_);
        Batch out;
        for (std::size_t i = begin; i < end; ++i) {
            const Image& img = (*set_)[order[i]].image;
            Rng rng = make_rng(seed_, {0x43524fu, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(i)});
            std::uniform_int_distribution<int> dy(0, img.height - crop_);
            std::uniform_int_distribution<int> dx(0, img.width - crop_);
            const int y0 = dy(rng);
            const int x0 = dx(rng);
            out.indices.push_back(order[i]);
            out.offsets.emplace_back(y0, x0);
            out.crops.push_back(crop(img, y0, x0, crop_, crop_));
        }
        return out;
    }

    template <class T>
    Tensor<T> batch_tensor(int epoch, int index) const {
        const Batch b = batch(epoch, index);
        std::vector<const Image*> ptrs;
        for (const auto& c : b.crops) ptrs.push_back(&c);
        return to_tensor<T>(ptrs);
    }

private:
    const ImageSet* set_;
    int batch_;
    int crop_;
    std::uint64_t seed_;
};

} // namespace jscc
