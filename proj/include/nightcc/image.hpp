#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "nightcc/common.hpp"

namespace nightcc {

/// Linear RGB raster, interleaved R,G,B, intensities normalized to [0,1].
struct LinearImage {
    static constexpr int channels = 3;

    int width = 0;
    int height = 0;
    std::vector<float> data;       // width*height*3
    int bit_depth = 16;            // bits of the source encoding
    float saturation_level = 0.98f; // any channel at/above this counts as clipped

    float& at(int x, int y, int c) { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return data[(static_cast<size_t>(y) * width + x) * 3 + c]; }

    size_t pixel_count() const { return static_cast<size_t>(width) * height; }
    bool empty() const { return width <= 0 || height <= 0 || data.empty(); }

    void validate() const {
        if (width <= 0 || height <= 0)
            throw data_error("image has empty dimensions");
        if (data.size() != pixel_count() * 3)
            throw data_error("image buffer size does not match dimensions");
        if (saturation_level <= 0.0f)
            throw data_error("saturation_level must be positive");
        for (float v : data)
            if (!(v >= 0.0f && v <= 1.0f))
                throw data_error("image intensity outside [0,1]");
    }
};

inline LinearImage make_image(int w, int h, float fill = 0.0f) {
    LinearImage img;
    img.width = w;
    img.height = h;
    img.data.assign(static_cast<size_t>(w) * h * 3, fill);
    return img;
}

/// Maps a raw sensor level to a normalized intensity.
inline double normalize_raw(double raw, double black_level, double white_point) {
    if (black_level >= white_point)
        throw data_error("black level must be below white point");
    double v = (raw - black_level) / (white_point - black_level);
    return std::clamp(v, 0.0, 1.0);
}

/// Block-mean downsampling. `factor` must be the reciprocal of a positive
/// integer k; each output pixel averages a k x k block, with partial blocks
/// at the right/bottom edges averaged over the pixels that exist.
inline LinearImage downsample(const LinearImage& img, double factor) {
    if (!(factor > 0.0 && factor <= 1.0))
        throw config_error("downsample factor must be in (0,1]");
    double inv = 1.0 / factor;
    int k = static_cast<int>(std::lround(inv));
    if (k < 1 || std::abs(inv - k) > 1e-9)
        throw config_error("downsample factor must be a reciprocal integer");
    if (k == 1) return img;

    int ow = (img.width + k - 1) / k;
    int oh = (img.height + k - 1) / k;
    LinearImage out = make_image(ow, oh);
    out.bit_depth = img.bit_depth;
    out.saturation_level = img.saturation_level;
    for (int oy = 0; oy < oh; ++oy) {
        int y0 = oy * k, y1 = std::min(img.height, y0 + k);
        for (int ox = 0; ox < ow; ++ox) {
            int x0 = ox * k, x1 = std::min(img.width, x0 + k);
            double sum[3] = {0, 0, 0};
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    for (int c = 0; c < 3; ++c)
                        sum[c] += img.at(x, y, c);
            double n = static_cast<double>(y1 - y0) * (x1 - x0);
            for (int c = 0; c < 3; ++c)
                out.at(ox, oy, c) = static_cast<float>(sum[c] / n);
        }
    }
    return out;
}

/// Per-channel gains that divide out an illuminant, rescaled to unit green gain.
inline std::array<double, 3> white_balance_gains(const std::array<double, 3>& illuminant) {
    for (double v : illuminant)
        if (!(v > 0.0))
            throw data_error("illuminant component must be positive");
    return {illuminant[1] / illuminant[0], 1.0, illuminant[1] / illuminant[2]};
}

inline LinearImage apply_white_balance(const LinearImage& img, const std::array<double, 3>& illuminant) {
    auto gains = white_balance_gains(illuminant);
    LinearImage out = img;
    for (size_t i = 0; i < out.data.size(); i += 3)
        for (int c = 0; c < 3; ++c)
            out.data[i + c] = static_cast<float>(
                std::clamp(static_cast<double>(img.data[i + c]) * gains[c], 0.0, 1.0));
    return out;
}

} // namespace nightcc
