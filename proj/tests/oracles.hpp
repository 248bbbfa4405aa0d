#pragma once
// Independent reference implementations used by the tests. Each is written
// the slow, obvious way and shares no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "surgatt/geometry.hpp"
#include "surgatt/heatmap.hpp"

namespace oracle {

using surgatt::BBox;
using surgatt::Heatmap;

inline std::vector<double> flat(const Heatmap& m)
{
    std::vector<double> v;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) v.push_back(m(x, y));
    return v;
}

inline Heatmap random_map(int w, int h, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Heatmap m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m(x, y) = u(rng);
    return m;
}

/// Sorted copy, then linear interpolation at q*(n-1).
inline double quantile(std::vector<double> v, double q)
{
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const std::size_t lo = std::size_t(pos);
    if (lo + 1 >= v.size()) return v.back();
    return v[lo] + (pos - double(lo)) * (v[lo + 1] - v[lo]);
}

inline double mean(const std::vector<double>& v)
{
    long double s = 0;
    for (double x : v) s += x;
    return double(s / v.size());
}

inline double mae(const Heatmap& p, const Heatmap& g)
{
    const auto a = flat(p), b = flat(g);
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return double(s / a.size());
}

inline double mse(const Heatmap& p, const Heatmap& g)
{
    const auto a = flat(p), b = flat(g);
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (long double)(a[i] - b[i]) * (a[i] - b[i]);
    return double(s / a.size());
}

inline double cc(const Heatmap& p, const Heatmap& g)
{
    const auto a = flat(p), b = flat(g);
    const double ma = mean(a), mb = mean(b);
    long double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        cov += (long double)(a[i] - ma) * (b[i] - mb);
        va += (long double)(a[i] - ma) * (a[i] - ma);
        vb += (long double)(b[i] - mb) * (b[i] - mb);
    }
    return double(cov / (std::sqrt(va) * std::sqrt(vb) + 1e-8L));
}

inline std::vector<double> l1(const std::vector<double>& v)
{
    long double s = 0;
    for (double x : v) s += std::max(x, 0.0);
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = s == 0 ? 1.0 / double(v.size()) : double(std::max(v[i], 0.0) / (s + 1e-8L));
    return out;
}

inline double sim(const Heatmap& p, const Heatmap& g)
{
    const auto a = l1(flat(p)), b = l1(flat(g));
    long double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::min(a[i], b[i]);
    return double(s);
}

inline double nss(const Heatmap& p, const Heatmap& g)
{
    const auto a = flat(p), b = flat(g);
    const double mu = mean(a);
    long double var = 0;
    for (double x : a) var += (long double)(x - mu) * (x - mu);
    const double sd = double(std::sqrt(var / a.size()));
    const double thr = quantile(b, 0.95);
    long double acc = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (b[i] >= thr) {
            acc += (a[i] - mu) / (sd + 1e-8);
            ++n;
        }
    return double(acc / std::max<std::size_t>(n, 1));
}

/// IoU by counting unit cells of integer-corner boxes.
inline double raster_iou(int ax0, int ay0, int ax1, int ay1, int bx0, int by0, int bx1, int by1)
{
    const int x0 = std::min(ax0, bx0), x1 = std::max(ax1, bx1);
    const int y0 = std::min(ay0, by0), y1 = std::max(ay1, by1);
    long inter = 0, uni = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const bool a = x >= ax0 && x < ax1 && y >= ay0 && y < ay1;
            const bool b = x >= bx0 && x < bx1 && y >= by0 && y < by1;
            inter += a && b;
            uni += a || b;
        }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

/// Peak-normalized Gaussian at pixel (x, y), zero outside the +-3 sigma window.
inline double kernel_at(const BBox& b, double scale, int x, int y)
{
    const double sx = std::max(1.0, scale * b.w);
    const double sy = std::max(1.0, scale * b.h);
    if (std::fabs(x - b.cx) > 3 * sx || std::fabs(y - b.cy) > 3 * sy) return 0.0;
    const double u = (x - b.cx) / sx, v = (y - b.cy) / sy;
    return std::exp(-(u * u + v * v) / 2);
}

/// M_T = sum_t (1 - alpha)^(T - t) G_t, evaluated per pixel.
inline Heatmap unrolled_decay(const std::vector<Heatmap>& densities, double alpha)
{
    Heatmap out(densities[0].width(), densities[0].height());
    const std::size_t T = densities.size();
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            double s = 0;
            for (std::size_t t = 0; t < T; ++t) s += std::pow(1 - alpha, double(T - 1 - t)) * densities[t](x, y);
            out(x, y) = s;
        }
    return out;
}

inline double max_abs_diff(const Heatmap& a, const Heatmap& b)
{
    double d = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) d = std::max(d, std::fabs(a(x, y) - b(x, y)));
    return d;
}

}  // namespace oracle
