#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "nightcc/dataset.hpp"
#include "nightcc/image.hpp"

namespace nightcc::synth {

/// Parameters of a synthetic nighttime scene. The scene is a grid of
/// reflectance patches, a chosen fraction of them achromatic, lit by one
/// illuminant, with optional additive sensor noise. Everything is a
/// deterministic function of `seed`.
struct SceneSpec {
    int width = 256, height = 256;
    std::array<double, 3> illuminant{0.72, 0.55, 0.42}; // normalized on use
    double gray_fraction = 0.5;  // fraction of achromatic patches
    double texture_scale = 4.0;  // spatial frequency of reflectance variation
    double noise_sigma = 0.0;    // std of additive Gaussian noise
    bool shot_noise = false;     // scale noise by sqrt(intensity) instead
    std::uint64_t seed = 1;
    int patches_x = 16, patches_y = 16;

    void validate() const {
        if (width <= 0 || height <= 0)
            throw config_error("scene size must be positive");
        if (!(gray_fraction >= 0.0 && gray_fraction <= 1.0))
            throw config_error("gray_fraction must be in [0,1]");
        if (noise_sigma < 0.0)
            throw config_error("noise_sigma must be nonnegative");
        if (patches_x < 1 || patches_y < 1)
            throw config_error("patch grid must be nonempty");
    }
};

struct Scene {
    LinearImage image;
    GroundTruthRecord gt;
    LinearImage reflectance;            // the pre-illumination surface
    std::vector<std::uint8_t> patch_is_gray; // patches_x * patches_y flags
};

/// Renders reflectance * illuminant + noise, clipped to [0,1].
///
/// Gray patches modulate all channels with the same texture so their
/// chromaticity stays exactly neutral; chromatic patches get per-channel
/// texture phases so their local contrast never mimics the gray axis.
inline Scene render(const SceneSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);

    double ln = std::sqrt(spec.illuminant[0] * spec.illuminant[0] +
                          spec.illuminant[1] * spec.illuminant[1] +
                          spec.illuminant[2] * spec.illuminant[2]);
    if (!(ln > 0.0))
        throw config_error("illuminant must be nonzero");
    std::array<double, 3> light{spec.illuminant[0] / ln, spec.illuminant[1] / ln,
                                spec.illuminant[2] / ln};
    for (double v : light)
        if (!(v > 0.0))
            throw config_error("illuminant components must be positive");

    int npatch = spec.patches_x * spec.patches_y;
    int ngray = static_cast<int>(std::lround(spec.gray_fraction * npatch));
    std::vector<int> order(npatch);
    for (int i = 0; i < npatch; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::uint8_t> is_gray(npatch, 0);
    for (int i = 0; i < ngray; ++i) is_gray[order[i]] = 1;

    std::uniform_real_distribution<double> ugray(0.15, 0.85);
    std::uniform_real_distribution<double> uvalue(0.15, 0.5);
    std::uniform_real_distribution<double> uhue(0.0, 2.0 * 3.14159265358979323846);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * 3.14159265358979323846);

    struct Patch {
        std::array<double, 3> base;
        std::array<double, 3> phase_x, phase_y;
    };
    std::vector<Patch> patches(npatch);
    for (int i = 0; i < npatch; ++i) {
        Patch& p = patches[i];
        if (is_gray[i]) {
            double v = ugray(rng);
            p.base = {v, v, v};
            double px = uphase(rng), py = uphase(rng);
            p.phase_x = {px, px, px};
            p.phase_y = {py, py, py};
            uhue(rng); // keep the stream aligned between patch kinds
        } else {
            double v = uvalue(rng);
            double px = uphase(rng), py = uphase(rng);
            double hue = uhue(rng);
            constexpr double third = 2.0 * 3.14159265358979323846 / 3.0;
            p.base = {v * (1.0 + 0.5 * std::cos(hue)), v * (1.0 + 0.5 * std::cos(hue - third)),
                      v * (1.0 + 0.5 * std::cos(hue + third))};
            p.phase_x = {px, px + 1.3, px + 2.6};
            p.phase_y = {py, py + 0.9, py + 1.8};
        }
    }

    Scene out;
    out.image = make_image(spec.width, spec.height);
    out.reflectance = make_image(spec.width, spec.height);
    out.patch_is_gray = is_gray;
    out.gt.image_id = "synthetic";
    out.gt.camera_id = "synth";
    out.gt.illuminant = light;

    const double fx = 2.0 * 3.14159265358979323846 * spec.texture_scale / spec.width;
    const double fy = 2.0 * 3.14159265358979323846 * spec.texture_scale / spec.height;
    std::normal_distribution<double> noise(0.0, 1.0);

    for (int y = 0; y < spec.height; ++y) {
        int py = std::min(y * spec.patches_y / spec.height, spec.patches_y - 1);
        for (int x = 0; x < spec.width; ++x) {
            int px = std::min(x * spec.patches_x / spec.width, spec.patches_x - 1);
            const Patch& p = patches[py * spec.patches_x + px];
            for (int c = 0; c < 3; ++c) {
                double tex = 1.0 + 0.35 * std::sin(fx * x + p.phase_x[c]) *
                                       std::sin(fy * y + p.phase_y[c]);
                double refl = std::max(0.0, p.base[c] * tex);
                out.reflectance.at(x, y, c) = static_cast<float>(refl);
                double v = refl * light[c];
                if (spec.noise_sigma > 0.0) {
                    double s = spec.shot_noise ? spec.noise_sigma * std::sqrt(std::max(v, 0.0))
                                               : spec.noise_sigma;
                    v += s * noise(rng);
                }
                out.image.at(x, y, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
            }
        }
    }
    return out;
}

} // namespace nightcc::synth
