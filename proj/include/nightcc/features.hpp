#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

#include "nightcc/image.hpp"

namespace nightcc {

/// Log-chrominance histogram of an image: three m x m planes (weighted by
/// R, G, B intensity respectively), each L1-normalized then square-rooted,
/// flattened plane-major. Length 3*m*m.
struct HistogramFeature {
    std::vector<float> values;
    int m = 60;
    double span = 3.2;
};

/// Bins pixels by (u,v) = (log(G/R), log(G/B)) over [-span, span]^2 with
/// clamping to the edge bins. Pixels with any channel at or below
/// `intensity_floor` are skipped. A fully skipped image yields the zero
/// feature. The feature is exactly invariant to power-of-two exposure
/// scaling as long as no pixel crosses the floor.
inline HistogramFeature rgb_uv_histogram(const LinearImage& img, int m = 60, double span = 3.2,
                                         double intensity_floor = 1e-4) {
    if (m < 2)
        throw config_error("histogram granularity must be >= 2");
    if (!(span > 0.0))
        throw config_error("histogram span must be positive");
    HistogramFeature f;
    f.m = m;
    f.span = span;
    size_t plane = static_cast<size_t>(m) * m;
    std::vector<double> acc(plane * 3, 0.0);

    auto bin = [&](double v) {
        int i = static_cast<int>(std::floor((v + span) / (2.0 * span) * m));
        return std::clamp(i, 0, m - 1);
    };
    for (size_t i = 0; i < img.data.size(); i += 3) {
        double r = img.data[i], g = img.data[i + 1], b = img.data[i + 2];
        if (!(r > intensity_floor && g > intensity_floor && b > intensity_floor)) continue;
        int iu = bin(std::log(g / r));
        int iv = bin(std::log(g / b));
        size_t cell = static_cast<size_t>(iu) * m + iv;
        acc[cell] += r;
        acc[plane + cell] += g;
        acc[2 * plane + cell] += b;
    }

    f.values.assign(plane * 3, 0.0f);
    for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (size_t i = 0; i < plane; ++i) sum += acc[c * plane + i];
        if (!(sum > 0.0)) continue;
        for (size_t i = 0; i < plane; ++i)
            f.values[c * plane + i] = static_cast<float>(std::sqrt(acc[c * plane + i] / sum));
    }
    return f;
}

/// One relative parameter update, in rescaled units.
struct Action {
    double dn = 0.0; // gray-percentage delta, in [-0.6, 0.6]
    double dp = 0.0; // Minkowski-order delta, in [-4, 4]
};

inline constexpr double kActionScaleN = 0.6;
inline constexpr double kActionScaleP = 4.0;
inline constexpr int kHistorySlots = 5;
inline constexpr int kHistoryDim = 2 * kHistorySlots + 1;

using HistoryFeature = std::array<double, kHistoryDim>;

/// Compact trajectory descriptor: the last 5 percentage deltas and the last
/// 5 order deltas, each rescaled to [-1,1] and ordered most recent first
/// (zero-padded), plus a normalized step counter capped at 1.
inline HistoryFeature encode_history(std::span<const Action> actions, int t, int t_max) {
    if (t < 0 || t_max < 1)
        throw config_error("history encoder needs t >= 0 and t_max >= 1");
    HistoryFeature h{};
    size_t n = actions.size();
    for (int i = 0; i < kHistorySlots; ++i) {
        if (static_cast<size_t>(i) >= n) break;
        const Action& a = actions[n - 1 - i];
        h[i] = a.dn / kActionScaleN;
        h[kHistorySlots + i] = a.dp / kActionScaleP;
    }
    h[2 * kHistorySlots] = std::min(static_cast<double>(t) / t_max, 1.0);
    return h;
}

/// What the agent observes. The histogram only depends on the input image,
/// so environments share one immutable copy per image across episodes.
struct EnvState {
    std::shared_ptr<const HistogramFeature> histogram;
    HistoryFeature history{};
};

} // namespace nightcc
