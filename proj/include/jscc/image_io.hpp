#pragma once

#include <algorithm>
#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "jscc/error.hpp"

namespace jscc {

/// 8-bit interleaved RGB image.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Image() = default;
    Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t& at(int y, int x, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    std::uint8_t at(int y, int x, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    bool operator==(const Image&) const = default;
};

inline std::string lower_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

inline bool is_supported_image(const std::filesystem::path& p) {
    const auto ext = lower_extension(p);
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

inline Image read_png(const std::string& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str()))
        throw Error(ErrorCategory::data, "cannot read PNG " + path + ": " + img.message);
    img.format = PNG_FORMAT_RGB;
    Image out(static_cast<int>(img.width), static_cast<int>(img.height));
    if (!png_image_finish_read(&img, nullptr, out.rgb.data(), 0, nullptr)) {
        std::string msg = img.message;
        png_image_free(&img);
        throw Error(ErrorCategory::data, "cannot decode PNG " + path + ": " + msg);
    }
    return out;
}

inline void write_png(const std::string& path, const Image& image) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width);
    img.height = static_cast<png_uint_32>(image.height);
    img.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&img, path.c_str(), 0, image.rgb.data(), 0, nullptr))
        throw Error(ErrorCategory::data, "cannot write PNG " + path + ": " + img.message);
}

namespace detail {
struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}
} // namespace detail

inline Image read_jpeg(const std::string& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "rb"), &std::fclose);
    if (!file) throw Error(ErrorCategory::data, "cannot open " + path);
    jpeg_decompress_struct cinfo{};
    detail::JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = detail::jpeg_error_exit;
    Image out;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(ErrorCategory::data, "cannot decode JPEG " + path + ": " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out = Image(static_cast<int>(cinfo.output_width), static_cast<int>(cinfo.output_height));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

inline Image read_image(const std::string& path) {
    const auto ext = lower_extension(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".jpg" || ext == ".jpeg") return read_jpeg(path);
    throw Error(ErrorCategory::data, "unsupported image format: " + path);
}

} // namespace jscc
