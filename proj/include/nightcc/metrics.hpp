#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "nightcc/common.hpp"

namespace nightcc {

namespace detail {
/// atan2 of the cross and dot products: the same angle as the clamped
/// arccos of the normalized dot product, but exact at 0 for proportional
/// inputs and well-conditioned near both ends of [0, 180].
inline double angle_deg(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double na = a[0] * a[0] + a[1] * a[1] + a[2] * a[2];
    double nb = b[0] * b[0] + b[1] * b[1] + b[2] * b[2];
    if (!(na > 0.0) || !(nb > 0.0))
        throw std::invalid_argument("angular error of a zero vector");
    double cx = a[1] * b[2] - a[2] * b[1];
    double cy = a[2] * b[0] - a[0] * b[2];
    double cz = a[0] * b[1] - a[1] * b[0];
    double cross = std::sqrt(cx * cx + cy * cy + cz * cz);
    double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    return std::atan2(cross, dot) * (180.0 / 3.14159265358979323846);
}
} // namespace detail

/// Angle in degrees between estimated and true illuminant directions.
inline double recovery_angular_error(const std::array<double, 3>& est,
                                     const std::array<double, 3>& gt) {
    return detail::angle_deg(est, gt);
}

/// Angle between the gain-corrected white (gt/est, componentwise) and the
/// ideal white direction; measures how neutral a gray surface stays after
/// applying the estimated gains.
inline double reproduction_angular_error(const std::array<double, 3>& est,
                                         const std::array<double, 3>& gt) {
    for (double v : est)
        if (!(v > 0.0))
            throw std::invalid_argument("reproduction error needs positive estimate components");
    std::array<double, 3> ll{gt[0] / est[0], gt[1] / est[1], gt[2] / est[2]};
    return detail::angle_deg(ll, {1.0, 1.0, 1.0});
}

/// Benchmark summary row: all values in degrees.
struct ErrorSummary {
    double median = 0, mean = 0, tri_mean = 0, best25 = 0, worst25 = 0;
    std::size_t count = 0;
};

namespace detail {
/// Linear-interpolated quantile (type 7) on an already sorted vector.
inline double quantile_sorted(const std::vector<double>& s, double q) {
    double h = q * static_cast<double>(s.size() - 1);
    size_t lo = static_cast<size_t>(std::floor(h));
    size_t hi = std::min(lo + 1, s.size() - 1);
    return s[lo] + (h - std::floor(h)) * (s[hi] - s[lo]);
}
} // namespace detail

inline ErrorSummary summarize(std::span<const double> errors) {
    if (errors.empty())
        throw std::invalid_argument("cannot summarize an empty error list");
    std::vector<double> s(errors.begin(), errors.end());
    std::sort(s.begin(), s.end());

    ErrorSummary out;
    out.count = s.size();
    double q1 = detail::quantile_sorted(s, 0.25);
    double q2 = detail::quantile_sorted(s, 0.50);
    double q3 = detail::quantile_sorted(s, 0.75);
    out.median = q2;
    out.tri_mean = (q1 + 2.0 * q2 + q3) / 4.0;

    double total = 0.0;
    for (double v : s) total += v;
    out.mean = total / static_cast<double>(s.size());

    size_t k = (s.size() + 3) / 4; // ceil(n/4)
    double lo = 0.0, hi = 0.0;
    for (size_t i = 0; i < k; ++i) {
        lo += s[i];
        hi += s[s.size() - 1 - i];
    }
    out.best25 = lo / static_cast<double>(k);
    out.worst25 = hi / static_cast<double>(k);
    return out;
}

} // namespace nightcc
