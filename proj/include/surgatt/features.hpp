#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "surgatt/error.hpp"
#include "surgatt/geometry.hpp"
#include "surgatt/linalg.hpp"

namespace surgatt {

/// Image frame with values in [0,1], interleaved channels (C = 1 or 3).
struct Frame {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::size_t index = 0;
    std::vector<double> data;

    Frame() = default;
    Frame(int w, int h, int c = 1, double fill = 0.0)
        : width(w), height(h), channels(c), data(std::size_t(w) * std::size_t(h) * std::size_t(c), fill)
    {
    }

    FrameDims dims() const { return {width, height}; }
    double& at(int x, int y, int c = 0) { return data[(std::size_t(y) * width + x) * channels + c]; }
    double at(int x, int y, int c = 0) const { return data[(std::size_t(y) * width + x) * channels + c]; }

    double gray(int x, int y) const
    {
        if (channels == 1) return at(x, y);
        double s = 0.0;
        for (int c = 0; c < channels; ++c) s += at(x, y, c);
        return s / channels;
    }
};

/// Channel-major feature grid.
struct FeatureMap {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int w, int h, int c, double fill = 0.0)
        : width(w), height(h), channels(c), data(std::size_t(w) * std::size_t(h) * std::size_t(c), fill)
    {
    }

    double& at(int c, int x, int y) { return data[(std::size_t(c) * height + y) * width + x]; }
    double at(int c, int x, int y) const { return data[(std::size_t(c) * height + y) * width + x]; }
};

inline constexpr std::size_t kPyramidLevels = 3;
inline constexpr std::array<int, kPyramidLevels> kLevelStrides = {8, 16, 32};
inline constexpr int kFeatureChannels = 4;

struct FeaturePyramid {
    std::array<FeatureMap, kPyramidLevels> levels;
};

inline int ceil_div(int a, int b) { return (a + b - 1) / b; }

namespace detail {

// Per-channel gains bring the handcrafted channels to comparable ranges.
inline constexpr std::array<double, kFeatureChannels> kChannelGain = {1.0, 4.0, 4.0, 16.0};

inline FeatureMap average_pool(const FeatureMap& full, int stride)
{
    const int lw = ceil_div(full.width, stride);
    const int lh = ceil_div(full.height, stride);
    FeatureMap out(lw, lh, full.channels, 0.0);
    for (int c = 0; c < full.channels; ++c)
        for (int j = 0; j < lh; ++j)
            for (int i = 0; i < lw; ++i) {
                const int xe = std::min(full.width, (i + 1) * stride);
                const int ye = std::min(full.height, (j + 1) * stride);
                double s = 0.0;
                for (int y = j * stride; y < ye; ++y)
                    for (int x = i * stride; x < xe; ++x) s += full.at(c, x, y);
                out.at(c, i, j) = s / double((xe - i * stride) * (ye - j * stride));
            }
    return out;
}

}  // namespace detail

/// Deterministic stand-in for a detector neck: 3x3 box-filtered intensity,
/// |d/dx|, |d/dy| (central differences) and 3x3 local variance, average
/// pooled to strides 8/16/32. Borders replicate.
inline FeaturePyramid build_pyramid(const Frame& frame)
{
    const int W = frame.width;
    const int H = frame.height;
    if (W <= 0 || H <= 0) throw Error("build_pyramid: empty frame");
    auto g = [&](int x, int y) { return frame.gray(std::clamp(x, 0, W - 1), std::clamp(y, 0, H - 1)); };

    FeatureMap full(W, H, kFeatureChannels, 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double s = 0.0, s2 = 0.0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const double v = g(x + dx, y + dy);
                    s += v;
                    s2 += v * v;
                }
            const double mean = s / 9.0;
            full.at(0, x, y) = detail::kChannelGain[0] * mean;
            full.at(1, x, y) = detail::kChannelGain[1] * 0.5 * std::abs(g(x + 1, y) - g(x - 1, y));
            full.at(2, x, y) = detail::kChannelGain[2] * 0.5 * std::abs(g(x, y + 1) - g(x, y - 1));
            full.at(3, x, y) = detail::kChannelGain[3] * std::max(0.0, s2 / 9.0 - mean * mean);
        }

    FeaturePyramid p;
    for (std::size_t l = 0; l < kPyramidLevels; ++l) p.levels[l] = detail::average_pool(full, kLevelStrides[l]);
    return p;
}

/// Bilinear sample with cell centers at (i + 0.5, j + 0.5); out-of-range
/// positions clamp to the border.
inline double bilinear(const FeatureMap& m, int c, double x, double y)
{
    const double u = std::clamp(x - 0.5, 0.0, double(m.width - 1));
    const double v = std::clamp(y - 0.5, 0.0, double(m.height - 1));
    const int i0 = int(std::floor(u));
    const int j0 = int(std::floor(v));
    const int i1 = std::min(i0 + 1, m.width - 1);
    const int j1 = std::min(j0 + 1, m.height - 1);
    const double fu = u - i0;
    const double fv = v - j0;
    return (1 - fu) * (1 - fv) * m.at(c, i0, j0) + fu * (1 - fv) * m.at(c, i1, j0) +
           (1 - fu) * fv * m.at(c, i0, j1) + fu * fv * m.at(c, i1, j1);
}

/// P x P samples at bin centers of `box` (level coordinates). Output layout
/// is [channel][row][col].
inline Vec roi_align(const FeatureMap& level, const BBox& box, int pool)
{
    if (!(box.w > 0.0 && box.h > 0.0)) throw Error("roi_align: box must have positive extent");
    Vec out(std::size_t(level.channels) * pool * pool);
    const double bw = box.w / pool;
    const double bh = box.h / pool;
    std::size_t idx = 0;
    for (int c = 0; c < level.channels; ++c)
        for (int py = 0; py < pool; ++py)
            for (int px = 0; px < pool; ++px)
                out[idx++] = bilinear(level, c, box.x0() + (px + 0.5) * bw, box.y0() + (py + 0.5) * bh);
    return out;
}

struct FeatureConfig {
    int pool = 7;
    std::size_t d_emb = 64;
    double posenc_scale = 0.1;
};

/// Per-scale linear maps phi_s (d_emb x C*P*P, no bias) and the positional
/// table added to every pooled ROI grid before projection.
struct ProjectionParams {
    int pool = 7;
    std::size_t d_emb = 64;
    std::array<Matrix, kPyramidLevels> phi;
    Vec posenc;

    std::size_t input_size() const { return std::size_t(kFeatureChannels) * pool * pool; }

    static ProjectionParams zeros(const FeatureConfig& cfg)
    {
        ProjectionParams p;
        p.pool = cfg.pool;
        p.d_emb = cfg.d_emb;
        for (auto& m : p.phi) m = Matrix(cfg.d_emb, p.input_size(), 0.0);
        p.posenc.assign(p.input_size(), 0.0);
        return p;
    }

    /// Sinusoidal 2-D table: channel 0/1 encode the bin column, 2/3 the row.
    static Vec sinusoidal_table(int pool, double scale)
    {
        Vec t(std::size_t(kFeatureChannels) * pool * pool);
        std::size_t idx = 0;
        for (int c = 0; c < kFeatureChannels; ++c)
            for (int py = 0; py < pool; ++py)
                for (int px = 0; px < pool; ++px) {
                    const double pos = (c < 2 ? px : py) + 0.5;
                    const double a = std::numbers::pi * pos / pool;
                    t[idx++] = scale * ((c % 2 == 0) ? std::sin(a) : std::cos(a));
                }
        return t;
    }

    static ProjectionParams init(const FeatureConfig& cfg, std::mt19937_64& rng)
    {
        ProjectionParams p = zeros(cfg);
        for (auto& m : p.phi) init_uniform_fan_in(m, rng);
        p.posenc = sinusoidal_table(cfg.pool, cfg.posenc_scale);
        return p;
    }

    template <typename F>
    void visit(F&& f)
    {
        f(std::string("proj.phi3"), std::span<double>(phi[0].data));
        f(std::string("proj.phi4"), std::span<double>(phi[1].data));
        f(std::string("proj.phi5"), std::span<double>(phi[2].data));
    }
};

/// Pooled per-level inputs (with positional table) kept for the backward pass.
struct MsrTrace {
    std::array<Vec, kPyramidLevels> inputs;
};

/// f(B) = sum_s phi_s(Align(F_s, B / stride_s) + posenc)
inline Vec msr_fuse(const FeaturePyramid& pyramid, const BBox& b, const ProjectionParams& params,
                    MsrTrace* trace = nullptr)
{
    Vec f(params.d_emb, 0.0);
    for (std::size_t l = 0; l < kPyramidLevels; ++l) {
        Vec x = roi_align(pyramid.levels[l], map_to_level(b, kLevelStrides[l]), params.pool);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] += params.posenc[i];
        const Vec y = matvec(params.phi[l], x);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] += y[i];
        if (trace) trace->inputs[l] = std::move(x);
    }
    return f;
}

/// Accumulates dL/dphi_s given dL/df for one fused embedding.
inline void msr_backward(const MsrTrace& trace, std::span<const double> grad_f, ProjectionParams& grads)
{
    for (std::size_t l = 0; l < kPyramidLevels; ++l) outer_acc(grads.phi[l], grad_f, trace.inputs[l]);
}

}  // namespace surgatt
