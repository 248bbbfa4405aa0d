#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace surgatt {

/// Quantile q in [0,1] by linear interpolation between order statistics
/// (position q*(N-1)). Shared by robust normalization and the NSS mask so the
/// two agree on what "top p%" means.
inline double quantile(std::span<const double> values, double q)
{
    if (values.empty()) throw std::invalid_argument("quantile of empty range");
    q = std::clamp(q, 0.0, 1.0);
    std::vector<double> v(values.begin(), values.end());
    const double pos = q * double(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - double(lo);
    std::nth_element(v.begin(), v.begin() + std::ptrdiff_t(lo), v.end());
    const double a = v[lo];
    if (frac == 0.0 || lo + 1 >= v.size()) return a;
    const double b = *std::min_element(v.begin() + std::ptrdiff_t(lo) + 1, v.end());
    return a + frac * (b - a);
}

inline double percentile(std::span<const double> values, double p) { return quantile(values, p / 100.0); }

}  // namespace surgatt
