#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "surgatt/error.hpp"
#include "surgatt/heatmap.hpp"
#include "surgatt/stats.hpp"

namespace surgatt {

inline constexpr double kMetricEpsilon = 1e-8;
inline constexpr double kNssQuantile = 0.95;

struct MetricReport {
    double nss = 0.0;
    double cc = 0.0;
    double sim = 0.0;
    double mse = 0.0;
    double mae = 0.0;
    std::size_t n_frames = 0;
};

namespace detail {

inline void require_same_shape(const Heatmap& p, const Heatmap& g)
{
    if (!p.same_shape(g))
        throw SequenceMismatch("heatmap dimensions differ: " + std::to_string(p.width()) + "x" +
                               std::to_string(p.height()) + " vs " + std::to_string(g.width()) + "x" +
                               std::to_string(g.height()));
    if (p.empty()) throw SequenceMismatch("empty heatmap");
}

inline double mean(std::span<const double> v)
{
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

}  // namespace detail

inline double mae(const Heatmap& p, const Heatmap& g)
{
    detail::require_same_shape(p, g);
    auto a = p.values();
    auto b = g.values();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s / double(a.size());
}

inline double mse(const Heatmap& p, const Heatmap& g)
{
    detail::require_same_shape(p, g);
    auto a = p.values();
    auto b = g.values();
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / double(a.size());
}

/// Pearson correlation, eps added to the product of root sums of squares.
inline double cc(const Heatmap& p, const Heatmap& g)
{
    detail::require_same_shape(p, g);
    auto a = p.values();
    auto b = g.values();
    const double ma = detail::mean(a);
    const double mb = detail::mean(b);
    double num = 0.0, sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        num += da * db;
        sa += da * da;
        sb += db * db;
    }
    return num / (std::sqrt(sa) * std::sqrt(sb) + kMetricEpsilon);
}

namespace detail {

// l1-normalized non-negative map; an all-zero map becomes uniform.
inline std::vector<double> l1_normalize(std::span<const double> v)
{
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (double x : v) sum += std::max(x, 0.0);
    if (sum == 0.0) {
        std::fill(out.begin(), out.end(), 1.0 / double(v.size()));
        return out;
    }
    const double denom = sum + kMetricEpsilon;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i], 0.0) / denom;
    return out;
}

}  // namespace detail

/// Histogram intersection of the l1-normalized maps.
inline double sim(const Heatmap& p, const Heatmap& g)
{
    detail::require_same_shape(p, g);
    const auto a = detail::l1_normalize(p.values());
    const auto b = detail::l1_normalize(g.values());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::min(a[i], b[i]);
    return s;
}

/// Mean z-scored prediction over pixels where g >= Q_0.95(g).
inline double nss(const Heatmap& p, const Heatmap& g)
{
    detail::require_same_shape(p, g);
    auto a = p.values();
    auto b = g.values();
    const double mu = detail::mean(a);
    double var = 0.0;
    for (double x : a) var += (x - mu) * (x - mu);
    const double sigma = std::sqrt(var / double(a.size()));
    const double thr = quantile(b, kNssQuantile);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (b[i] >= thr) {
            acc += (a[i] - mu) / (sigma + kMetricEpsilon);
            ++count;
        }
    }
    return acc / double(std::max<std::size_t>(count, 1));
}

inline MetricReport evaluate_frame(const Heatmap& p, const Heatmap& g)
{
    return {nss(p, g), cc(p, g), sim(p, g), mse(p, g), mae(p, g), 1};
}

/// Per-frame metrics averaged arithmetically over frames. Frames are
/// evaluated on up to `threads` workers; the reduction runs in frame order.
inline MetricReport evaluate_sequence(std::span<const Heatmap> preds, std::span<const Heatmap> gts,
                                      unsigned threads = 1)
{
    if (preds.size() != gts.size())
        throw SequenceMismatch("sequence lengths differ: " + std::to_string(preds.size()) + " vs " +
                               std::to_string(gts.size()));
    for (std::size_t i = 0; i < preds.size(); ++i) detail::require_same_shape(preds[i], gts[i]);

    std::vector<MetricReport> per_frame(preds.size());
    threads = std::max(1u, std::min<unsigned>(threads, unsigned(std::max<std::size_t>(preds.size(), 1))));
    if (threads == 1) {
        for (std::size_t i = 0; i < preds.size(); ++i) per_frame[i] = evaluate_frame(preds[i], gts[i]);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < preds.size(); i += threads)
                    per_frame[i] = evaluate_frame(preds[i], gts[i]);
            });
    }

    MetricReport r;
    for (const auto& f : per_frame) {
        r.nss += f.nss;
        r.cc += f.cc;
        r.sim += f.sim;
        r.mse += f.mse;
        r.mae += f.mae;
    }
    r.n_frames = per_frame.size();
    if (r.n_frames > 0) {
        const double n = double(r.n_frames);
        r.nss /= n;
        r.cc /= n;
        r.sim /= n;
        r.mse /= n;
        r.mae /= n;
    }
    return r;
}

inline std::string metric_csv_header() { return "sequence_id,nss,cc,sim,mse,mae,n_frames"; }

inline std::string to_csv_row(const std::string& sequence_id, const MetricReport& r)
{
    char buf[256];
    std::snprintf(buf, sizeof(buf), ",%.6f,%.6f,%.6f,%.6f,%.6f,%zu", r.nss, r.cc, r.sim, r.mse, r.mae,
                  r.n_frames);
    return sequence_id + buf;
}

}  // namespace surgatt
