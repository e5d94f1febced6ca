#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "nightcc/image.hpp"

namespace nightcc::sgp {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegPerRad = 180.0 / kPi;
inline constexpr double kContrastNormTol = 1e-10;

struct ParamBounds {
    double n_min = 0.01, n_max = 5.0; // gray-pixel percentage
    double p_min = 1.0, p_max = 20.0; // Minkowski order
};

/// Tunable and fixed knobs of the salient-gray-pixel estimator. The two
/// members the tuning agent controls are `n_percent` and `minkowski_p`;
/// everything else stays fixed for a run.
struct SgpParams {
    double n_percent = 0.5;   // percentage of valid pixels kept as gray candidates
    double minkowski_p = 2.0; // aggregation order
    double var_th = 1e-4;     // lower bound on cross-channel log variance
    double color_th = 0.5;    // scale of the color-deviation threshold
    double log_eps = 1e-4;    // guard added before taking logs
    double sigma = 0.5;       // Gaussian std of the contrast operator
    int window = 3;           // local-reflectance window size (odd)
    bool filters_enabled = true; // off for well-lit daytime datasets
    ParamBounds bounds{};

    void clamp_to_bounds() {
        n_percent = std::clamp(n_percent, bounds.n_min, bounds.n_max);
        minkowski_p = std::clamp(minkowski_p, bounds.p_min, bounds.p_max);
    }

    void validate() const {
        if (!(n_percent > 0.0 && n_percent <= 100.0))
            throw config_error("n_percent must be in (0,100]");
        if (!(minkowski_p >= 1.0))
            throw config_error("minkowski_p must be >= 1");
        if (var_th < 0.0 || color_th < 0.0)
            throw config_error("thresholds must be nonnegative");
        if (!(log_eps > 0.0))
            throw config_error("log_eps must be positive");
        if (window < 3 || window % 2 == 0)
            throw config_error("window must be odd and >= 3");
    }
};

/// Three planar rasters, one per color channel.
struct ChannelField {
    int width = 0, height = 0;
    std::array<std::vector<double>, 3> ch;

    static ChannelField zeros(int w, int h) {
        ChannelField f;
        f.width = w;
        f.height = h;
        for (auto& c : f.ch) c.assign(static_cast<size_t>(w) * h, 0.0);
        return f;
    }
    size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
};

/// Per-pixel angle between the local contrast vector and the gray axis,
/// in degrees. `valid` is false where the contrast vector is numerically
/// zero or the pixel is clipped.
struct GraynessMap {
    int width = 0, height = 0;
    std::vector<double> angle_deg;
    std::vector<std::uint8_t> valid;
};

struct ConfidenceWeights {
    int width = 0, height = 0;
    std::vector<double> w;  // zero outside the SGP mask, otherwise in [0,1)
    double exponent = 4.0;  // adaptive exponent chosen from the skewness rule
    double skewness = 0.0;  // population skewness of the SGP luminances
};

struct IlluminantEstimate {
    std::array<double, 3> rgb{0, 0, 0}; // unit L2 norm, nonnegative
    bool fallback = false;              // true when gray world filled in

    static IlluminantEstimate unit(std::array<double, 3> v, bool fb = false) {
        double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        if (!(n > 0.0))
            throw estimation_error("cannot normalize zero illuminant");
        return IlluminantEstimate{{v[0] / n, v[1] / n, v[2] / n}, fb};
    }
};

namespace detail {

/// Log image with intensities first divided by the global peak. The peak
/// normalization makes the downstream contrast and variance statistics
/// exactly invariant to power-of-two exposure scaling.
inline ChannelField scaled_log_field(const LinearImage& img, double log_eps) {
    float peak = 0.0f;
    for (float v : img.data) peak = std::max(peak, v);
    ChannelField f = ChannelField::zeros(img.width, img.height);
    const double scale = peak > 0.0f ? static_cast<double>(peak) : 1.0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            size_t i = f.idx(x, y);
            for (int c = 0; c < 3; ++c)
                f.ch[c][i] = std::log(static_cast<double>(img.at(x, y, c)) / scale + log_eps);
        }
    return f;
}

/// Log image on the raw intensities; feeds the color-deviation filter,
/// whose threshold is exposure-dependent by design.
inline ChannelField raw_log_field(const LinearImage& img, double log_eps) {
    ChannelField f = ChannelField::zeros(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            size_t i = f.idx(x, y);
            for (int c = 0; c < 3; ++c)
                f.ch[c][i] = std::log(static_cast<double>(img.at(x, y, c)) + log_eps);
        }
    return f;
}

/// Separable Gaussian blur, fixed kernel radius 2, replicated edges.
inline std::vector<double> gaussian_blur(const std::vector<double>& src, int w, int h, double sigma) {
    constexpr int radius = 2;
    double k[2 * radius + 1];
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;

    std::vector<double> tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int xx = std::clamp(x + i, 0, w - 1);
                acc += k[i + radius] * src[static_cast<size_t>(y) * w + xx];
            }
            tmp[static_cast<size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -radius; i <= radius; ++i) {
                int yy = std::clamp(y + i, 0, h - 1);
                acc += k[i + radius] * tmp[static_cast<size_t>(yy) * w + x];
            }
            out[static_cast<size_t>(y) * w + x] = acc;
        }
    return out;
}

/// 4-neighbor Laplacian with replicated edges.
inline std::vector<double> laplacian4(const std::vector<double>& src, int w, int h) {
    std::vector<double> out(src.size());
    auto pix = [&](int x, int y) {
        return src[static_cast<size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out[static_cast<size_t>(y) * w + x] =
                pix(x - 1, y) + pix(x + 1, y) + pix(x, y - 1) + pix(x, y + 1) - 4.0 * pix(x, y);
    return out;
}

inline ChannelField contrast_of(const ChannelField& log_field, double sigma) {
    ChannelField out = ChannelField::zeros(log_field.width, log_field.height);
    for (int c = 0; c < 3; ++c)
        out.ch[c] = laplacian4(gaussian_blur(log_field.ch[c], log_field.width, log_field.height, sigma),
                               log_field.width, log_field.height);
    return out;
}

} // namespace detail

/// Laplacian-of-Gaussian local contrast of the log image, per channel.
inline ChannelField log_contrast(const LinearImage& img, double log_eps, double sigma) {
    if (!(sigma > 0.0))
        throw config_error("contrast sigma must be positive");
    return detail::contrast_of(detail::scaled_log_field(img, log_eps), sigma);
}

/// Angle between the per-pixel contrast vector and the gray axis [1,1,1].
inline GraynessMap grayness_map(const ChannelField& contrast) {
    GraynessMap g;
    g.width = contrast.width;
    g.height = contrast.height;
    size_t n = static_cast<size_t>(g.width) * g.height;
    g.angle_deg.assign(n, 0.0);
    g.valid.assign(n, 0);
    const double inv_sqrt3 = 1.0 / std::sqrt(3.0);
    for (size_t i = 0; i < n; ++i) {
        double dr = contrast.ch[0][i], dg = contrast.ch[1][i], db = contrast.ch[2][i];
        double norm = std::sqrt(dr * dr + dg * dg + db * db);
        if (norm < kContrastNormTol) continue;
        double cosang = std::clamp((dr + dg + db) * inv_sqrt3 / norm, -1.0, 1.0);
        g.angle_deg[i] = std::acos(cosang) * kDegPerRad;
        g.valid[i] = 1;
    }
    return g;
}

/// Drops clipped pixels from grayness candidacy.
inline void mask_saturated(GraynessMap& g, const LinearImage& img) {
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            size_t i = static_cast<size_t>(y) * img.width + x;
            if (img.at(x, y, 0) >= img.saturation_level || img.at(x, y, 1) >= img.saturation_level ||
                img.at(x, y, 2) >= img.saturation_level)
                g.valid[i] = 0;
        }
}

/// Keeps the ceil(n_percent% of valid) pixels with the smallest grayness
/// angle. Ties break toward the lower row-major index, so the selection is
/// reproducible bit for bit.
inline std::vector<std::uint8_t> select_candidates(const GraynessMap& g, double n_percent) {
    size_t n = g.angle_deg.size();
    std::vector<std::uint32_t> order;
    order.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (g.valid[i]) order.push_back(static_cast<std::uint32_t>(i));
    if (order.empty())
        throw estimation_error("no valid pixels for gray candidate selection");

    size_t keep = static_cast<size_t>(std::ceil(n_percent / 100.0 * static_cast<double>(order.size())));
    keep = std::clamp<size_t>(keep, 1, order.size());

    auto cmp = [&](std::uint32_t a, std::uint32_t b) {
        if (g.angle_deg[a] != g.angle_deg[b]) return g.angle_deg[a] < g.angle_deg[b];
        return a < b;
    };
    std::nth_element(order.begin(), order.begin() + (keep - 1), order.end(), cmp);

    std::vector<std::uint8_t> mask(n, 0);
    for (size_t i = 0; i < keep; ++i) mask[order[i]] = 1;
    return mask;
}

/// First refinement stage: discards candidates whose population variance
/// across the three log channels is at or below `var_th`; such pixels carry
/// too little chromatic signal to be trusted in low light.
inline std::vector<std::uint8_t> variance_filter(const ChannelField& log_img,
                                                 const std::vector<std::uint8_t>& candidates,
                                                 double var_th) {
    if (var_th < 0.0)
        throw config_error("var_th must be nonnegative");
    std::vector<std::uint8_t> mask(candidates.size(), 0);
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i]) continue;
        double r = log_img.ch[0][i], g = log_img.ch[1][i], b = log_img.ch[2][i];
        double mean = (r + g + b) / 3.0;
        double var = ((r - mean) * (r - mean) + (g - mean) * (g - mean) + (b - mean) * (b - mean)) / 3.0;
        if (var > var_th) mask[i] = 1;
    }
    return mask;
}

/// Second refinement stage: removes candidates too far from the dominant
/// color cast. The deviation X is measured against the per-channel mean of
/// the log image; the cutoff is color_th * |min channel mean| (the mean log
/// intensities are negative on [0,1] data, so the magnitude is what scales
/// the tolerance).
inline std::vector<std::uint8_t> color_deviation_filter(const ChannelField& log_img,
                                                        const std::vector<std::uint8_t>& candidates,
                                                        double color_th) {
    size_t n = log_img.ch[0].size();
    if (n == 0)
        throw estimation_error("empty image in color deviation filter");
    double mean[3];
    for (int c = 0; c < 3; ++c)
        mean[c] = std::accumulate(log_img.ch[c].begin(), log_img.ch[c].end(), 0.0) / static_cast<double>(n);
    double tc = color_th * std::abs(std::min({mean[0], mean[1], mean[2]}));

    std::vector<std::uint8_t> mask(candidates.size(), 0);
    for (size_t i = 0; i < candidates.size(); ++i) {
        if (!candidates[i]) continue;
        double x = std::max({std::abs(log_img.ch[0][i] - mean[0]), std::abs(log_img.ch[1][i] - mean[1]),
                             std::abs(log_img.ch[2][i] - mean[2])});
        if (x <= tc) mask[i] = 1;
    }
    return mask;
}

/// Exponent selection: strongly right-skewed luminance distributions get a
/// gentle weighting, near-symmetric ones a sharp cutoff.
inline double adaptive_exponent(double skewness) {
    if (skewness > 1.5) return 1.0;
    if (skewness > 0.2) return 2.0;
    return 4.0;
}

/// Luminance-adaptive confidence of each salient gray pixel,
/// w = 1 - exp(-(LM/mean LM)^E), with E picked from the skewness of the
/// SGP luminance distribution.
inline ConfidenceWeights confidence_weights(const LinearImage& img,
                                            const std::vector<std::uint8_t>& sgp_mask) {
    ConfidenceWeights cw;
    cw.width = img.width;
    cw.height = img.height;
    cw.w.assign(sgp_mask.size(), 0.0);

    std::vector<double> lum(sgp_mask.size(), 0.0);
    double sum = 0.0;
    size_t nz = 0;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            size_t i = static_cast<size_t>(y) * img.width + x;
            if (!sgp_mask[i]) continue;
            double lm = (static_cast<double>(img.at(x, y, 0)) + img.at(x, y, 1) + img.at(x, y, 2)) / 3.0;
            lum[i] = lm;
            if (lm > 0.0) {
                sum += lm;
                ++nz;
            }
        }
    if (nz == 0)
        throw estimation_error("all salient gray pixels have zero luminance");
    double mean = sum / static_cast<double>(nz);

    double m2 = 0.0, m3 = 0.0;
    for (size_t i = 0; i < lum.size(); ++i) {
        if (!sgp_mask[i] || lum[i] <= 0.0) continue;
        double d = lum[i] - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(nz);
    m3 /= static_cast<double>(nz);
    cw.skewness = m2 > 1e-300 ? m3 / std::pow(m2, 1.5) : 0.0;
    cw.exponent = adaptive_exponent(cw.skewness);

    for (size_t i = 0; i < lum.size(); ++i)
        if (sgp_mask[i])
            cw.w[i] = 1.0 - std::exp(-std::pow(lum[i] / mean, cw.exponent));
    return cw;
}

struct LocalReflectance {
    ChannelField mean;  // mean of nonzero SGP intensities in each window
    ChannelField ratio; // window mean-of-nonzeros over window max, in [0,1]
};

/// Sliding-window statistic behind the aggregation denominator: for every
/// position, the mean of nonzero SGP intensities in the window divided by
/// the window maximum. Windows are clipped at the borders; positions whose
/// window maximum is zero get ratio 0 and are excluded downstream.
inline LocalReflectance local_reflectance_difference(const ChannelField& sgp_values, int window) {
    if (window < 1 || window % 2 == 0)
        throw config_error("window must be odd");
    int w = sgp_values.width, h = sgp_values.height, r = window / 2;
    LocalReflectance out{ChannelField::zeros(w, h), ChannelField::zeros(w, h)};
    for (int c = 0; c < 3; ++c) {
        const auto& src = sgp_values.ch[c];
        for (int y = 0; y < h; ++y) {
            int y0 = std::max(0, y - r), y1 = std::min(h - 1, y + r);
            for (int x = 0; x < w; ++x) {
                int x0 = std::max(0, x - r), x1 = std::min(w - 1, x + r);
                double maxv = 0.0, sum = 0.0;
                int cnt = 0;
                for (int yy = y0; yy <= y1; ++yy)
                    for (int xx = x0; xx <= x1; ++xx) {
                        double v = src[static_cast<size_t>(yy) * w + xx];
                        maxv = std::max(maxv, v);
                        if (v != 0.0) {
                            sum += v;
                            ++cnt;
                        }
                    }
                size_t i = static_cast<size_t>(y) * w + x;
                if (cnt > 0) out.mean.ch[c][i] = sum / cnt;
                if (maxv > 0.0) out.ratio.ch[c][i] = (sum / cnt) / maxv;
            }
        }
    }
    return out;
}

/// Minkowski aggregation of the weighted window means against the weighted
/// local reflectance ratios, then L2 normalization. Terms are rescaled by
/// their maximum before exponentiation so large p stays well-conditioned.
inline IlluminantEstimate aggregate_illuminant(const LocalReflectance& lr,
                                               const ConfidenceWeights& weights, double p) {
    if (!(p >= 1.0))
        throw config_error("minkowski p must be >= 1");
    std::array<double, 3> e{};
    size_t n = weights.w.size();
    for (int c = 0; c < 3; ++c) {
        double amax = 0.0, bmax = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (lr.ratio.ch[c][i] <= 0.0) continue;
            amax = std::max(amax, lr.mean.ch[c][i] * weights.w[i]);
            bmax = std::max(bmax, lr.ratio.ch[c][i] * weights.w[i]);
        }
        if (!(amax > 0.0) || !(bmax > 0.0))
            throw estimation_error("no weighted evidence for a channel");
        double num = 0.0, den = 0.0;
        for (size_t i = 0; i < n; ++i) {
            if (lr.ratio.ch[c][i] <= 0.0) continue;
            double wv = weights.w[i];
            if (wv <= 0.0) continue;
            num += std::pow(lr.mean.ch[c][i] * wv / amax, p);
            den += std::pow(lr.ratio.ch[c][i] * wv / bmax, p);
        }
        e[c] = (amax / bmax) * std::pow(num / den, 1.0 / p);
    }
    return IlluminantEstimate::unit(e);
}

/// Gray-world fallback: the normalized per-channel mean. Used whenever the
/// pipeline cannot produce evidence, so a tuning episode always gets an
/// estimate to score.
inline IlluminantEstimate gray_world(const LinearImage& img) {
    std::array<double, 3> mean{0, 0, 0};
    for (size_t i = 0; i < img.data.size(); i += 3)
        for (int c = 0; c < 3; ++c) mean[c] += img.data[i + c];
    double total = mean[0] + mean[1] + mean[2];
    if (!(total > 0.0))
        return IlluminantEstimate{{1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0)}, true};
    return IlluminantEstimate::unit(mean, true);
}

/// Full estimation pipeline: contrast grayness ranking, the two refinement
/// filters, confidence weighting, local reflectance statistics, Minkowski
/// aggregation. Deterministic for fixed inputs; falls back to gray world
/// when any stage runs out of evidence.
inline IlluminantEstimate estimate(const LinearImage& img, const SgpParams& params) {
    if (img.empty())
        throw data_error("cannot estimate on an empty image");
    params.validate();
    try {
        ChannelField scaled_log = detail::scaled_log_field(img, params.log_eps);
        GraynessMap gmap = grayness_map(detail::contrast_of(scaled_log, params.sigma));
        mask_saturated(gmap, img);
        std::vector<std::uint8_t> mask = select_candidates(gmap, params.n_percent);
        if (params.filters_enabled) {
            mask = variance_filter(scaled_log, mask, params.var_th);
            mask = color_deviation_filter(detail::raw_log_field(img, params.log_eps), mask,
                                          params.color_th);
        }
        ConfidenceWeights weights = confidence_weights(img, mask);

        ChannelField sgp_values = ChannelField::zeros(img.width, img.height);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                size_t i = sgp_values.idx(x, y);
                if (mask[i])
                    for (int c = 0; c < 3; ++c) sgp_values.ch[c][i] = img.at(x, y, c);
            }
        LocalReflectance lr = local_reflectance_difference(sgp_values, params.window);
        return aggregate_illuminant(lr, weights, params.minkowski_p);
    } catch (const estimation_error&) {
        return gray_world(img);
    }
}

} // namespace nightcc::sgp
