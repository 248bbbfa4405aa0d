#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "surgatt/error.hpp"
#include "surgatt/geometry.hpp"
#include "surgatt/grid.hpp"
#include "surgatt/stats.hpp"

namespace surgatt {

using Heatmap = Grid<double>;

inline FrameDims dims_of(const Heatmap& m) { return {m.width(), m.height()}; }

enum class AreaCompensation { kNone, kSqrt };

struct HeatmapConfig {
    double alpha = 0.22;      // decay, (0,1)
    double scale = 0.45;      // sigma = max(1, scale * extent)
    int smooth_k = 9;         // odd
    double percentile = 99.5; // (0,100]
    int out_w = 960;
    int out_h = 540;
    AreaCompensation area_comp = AreaCompensation::kSqrt;
    double inflation = 0.0;   // multiplicative on w,h: extent * (1 + inflation)

    FrameDims dims() const { return {out_w, out_h}; }

    void validate() const
    {
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("heatmap.alpha must be in (0,1)");
        if (!(scale > 0.0)) throw ConfigError("heatmap.scale must be > 0");
        if (smooth_k < 1 || smooth_k % 2 == 0) throw ConfigError("heatmap.smooth_k must be odd and positive");
        if (!(percentile > 0.0 && percentile <= 100.0)) throw ConfigError("heatmap.percentile must be in (0,100]");
        if (out_w <= 0 || out_h <= 0) throw ConfigError("heatmap output resolution must be positive");
        if (!(inflation >= 0.0)) throw ConfigError("heatmap.inflation must be >= 0");
    }
};

inline constexpr double kNormEpsilon = 1e-8;

inline BBox inflate(const BBox& b, double inflation)
{
    return {b.cx, b.cy, b.w * (1.0 + inflation), b.h * (1.0 + inflation)};
}

namespace detail {

// Peak-normalized anisotropic Gaussian added into `out` with weight `gain`,
// evaluated on pixel centers at integer coordinates within +-3 sigma.
inline void add_kernel(Heatmap& out, const BBox& b, double scale, double gain)
{
    const double sx = std::max(1.0, scale * b.w);
    const double sy = std::max(1.0, scale * b.h);
    const int x0 = std::max(0, int(std::ceil(b.cx - 3.0 * sx)));
    const int x1 = std::min(out.width() - 1, int(std::floor(b.cx + 3.0 * sx)));
    const int y0 = std::max(0, int(std::ceil(b.cy - 3.0 * sy)));
    const int y1 = std::min(out.height() - 1, int(std::floor(b.cy + 3.0 * sy)));
    if (x0 > x1 || y0 > y1) return;

    std::vector<double> gx(std::size_t(x1 - x0 + 1));
    for (int x = x0; x <= x1; ++x) {
        const double u = (x - b.cx) / sx;
        gx[std::size_t(x - x0)] = std::exp(-0.5 * u * u);
    }
    for (int y = y0; y <= y1; ++y) {
        const double v = (y - b.cy) / sy;
        const double gy = gain * std::exp(-0.5 * v * v);
        for (int x = x0; x <= x1; ++x) out(x, y) += gy * gx[std::size_t(x - x0)];
    }
}

}  // namespace detail

/// Unnormalized single-box kernel on a cfg.out_w x cfg.out_h grid.
inline Heatmap box_kernel(const BBox& b, const HeatmapConfig& cfg)
{
    Heatmap out(cfg.out_w, cfg.out_h, 0.0);
    detail::add_kernel(out, inflate(b, cfg.inflation), cfg.scale, 1.0);
    return out;
}

inline double area_weight(const BBox& b, AreaCompensation mode)
{
    if (mode == AreaCompensation::kNone) return 1.0;
    return 1.0 / std::sqrt(std::max(b.w * b.h, 1.0));
}

inline Heatmap frame_density(std::span<const BBox> boxes, const HeatmapConfig& cfg)
{
    Heatmap out(cfg.out_w, cfg.out_h, 0.0);
    for (const BBox& raw : boxes) {
        const BBox b = inflate(raw, cfg.inflation);
        detail::add_kernel(out, b, cfg.scale, area_weight(b, cfg.area_comp));
    }
    return out;
}

/// M_t = (1 - alpha) * M_{t-1} + G_t
inline Heatmap accumulate(const Heatmap& prev, const Heatmap& current_density, double alpha)
{
    if (!prev.same_shape(current_density)) throw ResolutionMismatch("accumulate: shape mismatch");
    Heatmap out = current_density;
    auto dst = out.values();
    auto src = prev.values();
    const double keep = 1.0 - alpha;
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = keep * src[i] + dst[i];
    return out;
}

inline double smoothing_sigma(int k) { return 0.3 * ((k - 1) * 0.5 - 1.0) + 0.8; }

inline std::vector<double> gaussian_taps(int k)
{
    std::vector<double> taps(std::size_t(k), 0.0);
    const double sigma = smoothing_sigma(k);
    const int r = k / 2;
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
        taps[std::size_t(i + r)] = v;
        sum += v;
    }
    for (double& v : taps) v /= sum;
    return taps;
}

/// Separable Gaussian blur with replicated borders. k = 1 is the identity.
inline Heatmap smooth(const Heatmap& m, int k)
{
    if (k < 1 || k % 2 == 0) throw ConfigError("smooth: kernel size must be odd and positive");
    if (k == 1 || m.empty()) return m;
    const auto taps = gaussian_taps(k);
    const int r = k / 2;

    Heatmap tmp(m.width(), m.height(), 0.0);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += taps[std::size_t(i + r)] * m.clamped(x + i, y);
            tmp(x, y) = acc;
        }
    Heatmap out(m.width(), m.height(), 0.0);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += taps[std::size_t(i + r)] * tmp.clamped(x, y + i);
            out(x, y) = acc;
        }
    return out;
}

/// H = clip(S / max(Q_p(S), eps), 0, 1)
inline Heatmap robust_normalize(const Heatmap& m, double p)
{
    if (m.empty()) return m;
    const double q = percentile(m.values(), p);
    const double denom = std::max(q, kNormEpsilon);
    Heatmap out = m;
    for (double& v : out.values()) v = std::clamp(v / denom, 0.0, 1.0);
    return out;
}

/// Online heatmap generator. The decay state carries the raw accumulation;
/// smoothing and normalization run on a copy and never feed back.
class HeatmapRenderer {
public:
    explicit HeatmapRenderer(HeatmapConfig cfg) : cfg_(cfg), state_(cfg.out_w, cfg.out_h, 0.0)
    {
        cfg_.validate();
    }

    Heatmap push(std::span<const BBox> boxes)
    {
        state_ = accumulate(state_, frame_density(boxes, cfg_), cfg_.alpha);
        return robust_normalize(smooth(state_, cfg_.smooth_k), cfg_.percentile);
    }

    const Heatmap& state() const { return state_; }
    void reset() { state_.fill(0.0); }
    const HeatmapConfig& config() const { return cfg_; }

private:
    HeatmapConfig cfg_;
    Heatmap state_;
};

/// Per-frame pixel boxes at a declared resolution.
struct BoxSequence {
    FrameDims dims;
    std::vector<std::vector<BBox>> frames;
};

inline std::vector<Heatmap> generate_sequence(const BoxSequence& labels, const HeatmapConfig& cfg)
{
    if (!(labels.dims == cfg.dims()))
        throw ResolutionMismatch("label resolution " + std::to_string(labels.dims.width) + "x" +
                                 std::to_string(labels.dims.height) + " does not match output " +
                                 std::to_string(cfg.out_w) + "x" + std::to_string(cfg.out_h));
    HeatmapRenderer renderer(cfg);
    std::vector<Heatmap> out;
    out.reserve(labels.frames.size());
    for (const auto& boxes : labels.frames) out.push_back(renderer.push(boxes));
    return out;
}

/// Functional form of one online rendering step with the refined box as the
/// sole annotation. Returns (H_t, updated decay state).
inline std::pair<Heatmap, Heatmap> render_inference(const BBox& b_refined, const Heatmap& state,
                                                    const HeatmapConfig& cfg)
{
    const BBox one[] = {b_refined};
    Heatmap next = accumulate(state, frame_density(one, cfg), cfg.alpha);
    Heatmap h = robust_normalize(smooth(next, cfg.smooth_k), cfg.percentile);
    return {std::move(h), std::move(next)};
}

}  // namespace surgatt
