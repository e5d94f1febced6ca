#pragma once

#include <cmath>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "nightcc/image.hpp"

namespace nightcc {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace detail

/// Loads a 3-channel 8- or 16-bit PNG and normalizes it to linear [0,1].
///
/// `source_bit_depth` overrides the container depth for images whose samples
/// use fewer significant bits than the container (e.g. a 14-bit raw stored in
/// a 16-bit PNG); 0 means "use the container depth". The white point is
/// 2^bits - 1 of the effective depth.
inline LinearImage load_linear_image(const std::string& path, double black_level,
                                     double saturation_level, int source_bit_depth = 0) {
    if (black_level < 0.0)
        throw config_error("black level must be nonnegative");
    if (!(saturation_level > 0.0 && saturation_level <= 1.0))
        throw config_error("saturation level must be in (0,1]");

    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp)
        throw data_error("cannot open image file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw data_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw data_error("libpng init failed");
    }
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw data_error("failed to decode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE || (color & PNG_COLOR_MASK_ALPHA) ||
        color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw data_error("expected a 3-channel RGB PNG: " + path);
    }
    if (depth < 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw data_error("unsupported PNG bit depth: " + path);
    }
    if (depth == 16)
        png_set_swap(png); // PNG stores 16-bit samples big-endian
    png_read_update_info(png, info);

    int bits = source_bit_depth > 0 ? source_bit_depth : depth;
    double white_point = static_cast<double>((1u << bits) - 1);
    if (black_level >= white_point) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw data_error("black level at or above white point");
    }

    LinearImage img = make_image(static_cast<int>(w), static_cast<int>(h));
    img.bit_depth = bits;
    img.saturation_level = static_cast<float>(saturation_level);

    std::vector<png_byte> raw(static_cast<size_t>(w) * h * 3 * (depth / 8));
    row_ptrs.resize(h);
    size_t stride = static_cast<size_t>(w) * 3 * (depth / 8);
    for (png_uint_32 y = 0; y < h; ++y)
        row_ptrs[y] = raw.data() + y * stride;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (depth == 16) {
        const auto* src = reinterpret_cast<const std::uint16_t*>(raw.data());
        for (size_t i = 0; i < img.data.size(); ++i)
            img.data[i] = static_cast<float>(normalize_raw(src[i], black_level, white_point));
    } else {
        for (size_t i = 0; i < img.data.size(); ++i)
            img.data[i] = static_cast<float>(normalize_raw(raw[i], black_level, white_point));
    }
    return img;
}

/// Writes a linear image as a 16-bit RGB PNG (no gamma chunk).
inline void write_linear_image(const std::string& path, const LinearImage& img) {
    if (img.empty())
        throw data_error("refusing to write empty image");
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp)
        throw data_error("cannot open output file: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw data_error("libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw data_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw data_error("failed to encode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 16, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_set_swap(png);

    std::vector<std::uint16_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = std::clamp(static_cast<double>(img.at(x, y, c)), 0.0, 1.0);
                row[static_cast<size_t>(x) * 3 + c] =
                    static_cast<std::uint16_t>(std::lround(v * 65535.0));
            }
        png_write_row(png, reinterpret_cast<png_bytep>(row.data()));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace nightcc
