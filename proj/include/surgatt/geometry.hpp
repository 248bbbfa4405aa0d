#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "surgatt/error.hpp"

namespace surgatt {

struct FrameDims {
    int width = 960;
    int height = 540;

    double diagonal() const { return std::hypot(double(width), double(height)); }
    friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

/// Axis-aligned box in center-size form, pixel units. Corner form only
/// appears at I/O boundaries.
struct BBox {
    double cx = 0.0;
    double cy = 0.0;
    double w = 1.0;
    double h = 1.0;

    double x0() const { return cx - 0.5 * w; }
    double y0() const { return cy - 0.5 * h; }
    double x1() const { return cx + 0.5 * w; }
    double y1() const { return cy + 0.5 * h; }
    double area() const { return w * h; }

    bool valid() const
    {
        return std::isfinite(cx) && std::isfinite(cy) && std::isfinite(w) && std::isfinite(h) &&
               w > 0.0 && h > 0.0;
    }

    static BBox from_corners(double x0, double y0, double x1, double y1)
    {
        return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

struct PolarCorrection {
    double theta = 0.0;  // radians
    double d = 0.0;      // pixels, >= 0
    double s_w = 1.0;
    double s_h = 1.0;
};

struct Proposal {
    BBox box;
    double confidence = 0.0;
};

/// Top-K detector output for one frame, sorted by descending confidence.
struct ProposalSet {
    std::size_t frame = 0;
    std::vector<Proposal> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
};

inline constexpr std::size_t kGeoDescriptorSize = 12;

/// Layout: current box normalized (cx/W, cy/H, w/W, h/H), reference box
/// normalized, center displacement current-reference over (W, H), then
/// log(w/w_r), log(h/h_r).
using GeoDescriptor = std::array<double, kGeoDescriptorSize>;

enum class SelectionRule { kConf, kMinErr, kMaxIoU };

struct Selection {
    BBox box;
    std::size_t index = 0;
};

inline double iou(const BBox& a, const BBox& b)
{
    const double ix = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
    const double iy = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
    if (ix <= 0.0 || iy <= 0.0) return 0.0;
    const double inter = ix * iy;
    const double uni = a.area() + b.area() - inter;
    if (uni <= 0.0) return 0.0;
    return std::clamp(inter / uni, 0.0, 1.0);
}

inline double center_error(const BBox& a, const BBox& b)
{
    return std::hypot(a.cx - b.cx, a.cy - b.cy);
}

/// Center step of length d along (cos theta, sin theta), multiplicative
/// size update. Extents are clamped to at least one pixel.
inline BBox polar_update(const BBox& base, const PolarCorrection& corr)
{
    BBox out;
    out.cx = base.cx + corr.d * std::cos(corr.theta);
    out.cy = base.cy + corr.d * std::sin(corr.theta);
    out.w = std::max(1.0, base.w * corr.s_w);
    out.h = std::max(1.0, base.h * corr.s_h);
    return out;
}

/// Same as polar_update, additionally keeping the center inside the frame.
inline BBox polar_update(const BBox& base, const PolarCorrection& corr, const FrameDims& dims)
{
    BBox out = polar_update(base, corr);
    out.cx = std::clamp(out.cx, 0.0, double(dims.width));
    out.cy = std::clamp(out.cy, 0.0, double(dims.height));
    return out;
}

inline GeoDescriptor geo_descriptor(const BBox& current, const BBox& reference, const FrameDims& dims)
{
    const double W = dims.width;
    const double H = dims.height;
    return {current.cx / W,
            current.cy / H,
            current.w / W,
            current.h / H,
            reference.cx / W,
            reference.cy / H,
            reference.w / W,
            reference.h / H,
            (current.cx - reference.cx) / W,
            (current.cy - reference.cy) / H,
            std::log(current.w / reference.w),
            std::log(current.h / reference.h)};
}

/// Oracle and confidence selection rules. Ties go to the lowest index.
inline Selection select_reference_box(std::span<const Proposal> proposals, const BBox& gt,
                                      SelectionRule rule)
{
    if (proposals.empty()) throw NoProposals();
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < proposals.size(); ++k) {
        double score = 0.0;
        switch (rule) {
        case SelectionRule::kConf: score = proposals[k].confidence; break;
        case SelectionRule::kMinErr: score = -center_error(proposals[k].box, gt); break;
        case SelectionRule::kMaxIoU: score = iou(proposals[k].box, gt); break;
        }
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    return {proposals[best].box, best};
}

inline Selection select_reference_box(const ProposalSet& proposals, const BBox& gt, SelectionRule rule)
{
    return select_reference_box(std::span<const Proposal>(proposals.entries), gt, rule);
}

inline BBox map_to_level(const BBox& b, int level_stride)
{
    const double s = level_stride;
    return {b.cx / s, b.cy / s, b.w / s, b.h / s};
}

}  // namespace surgatt
