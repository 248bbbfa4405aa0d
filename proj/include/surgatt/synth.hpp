#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "surgatt/error.hpp"
#include "surgatt/features.hpp"
#include "surgatt/geometry.hpp"

namespace surgatt {

enum class MotionModel { kLinear, kRandomWalk, kTeleport };

struct SceneConfig {
    std::uint64_t seed = 7;
    std::size_t n_frames = 200;
    FrameDims dims{320, 180};
    MotionModel motion = MotionModel::kRandomWalk;
    double speed = 3.0;            // px / frame
    double teleport_prob = 0.02;   // per frame, kTeleport only
    double min_size = 28.0;        // target extent range, px
    double max_size = 44.0;
    std::size_t n_distractors = 3;
    std::size_t n_near_misses = 2;
    double center_jitter = 4.0;    // sigma_c, px
    double size_jitter = 0.1;      // sigma_s, log scale
    double corruption = 0.5;       // rho
    double recall_floor = 0.95;    // r_min
    double occlusion_prob = 0.02;  // chance per frame an occlusion of 1-3 frames starts
    double render_noise = 0.02;
    std::size_t K = 10;

    void validate() const
    {
        if (!(corruption >= 0.0 && corruption <= 1.0)) throw ConfigError("scene.corruption must be in [0,1]");
        if (!(recall_floor > 0.0 && recall_floor <= 1.0)) throw ConfigError("scene.recall_floor must be in (0,1]");
        if (K < 2) throw ConfigError("scene.K must be >= 2");
        if (dims.width <= 0 || dims.height <= 0) throw ConfigError("scene dims must be positive");
        if (!(min_size > 0.0 && max_size >= min_size)) throw ConfigError("scene size range invalid");
        if (!(center_jitter >= 0.0 && size_jitter >= 0.0)) throw ConfigError("scene jitter must be >= 0");
    }
};

/// How each proposal was manufactured; kept for diagnostics only.
enum class ProposalKind : std::uint8_t { kTarget, kNearMiss, kDistractor, kRandom };

struct SyntheticSequence {
    FrameDims dims;
    std::vector<Frame> frames;
    std::vector<BBox> gt_boxes;
    std::vector<ProposalSet> proposals;
    std::vector<std::vector<ProposalKind>> kinds;

    std::size_t size() const { return gt_boxes.size(); }
};

namespace detail {

struct Mover {
    BBox box;
    double vx = 0.0;
    double vy = 0.0;
};

inline void bounce(Mover& m, const FrameDims& dims)
{
    const double mx = 0.5 * m.box.w + 2.0;
    const double my = 0.5 * m.box.h + 2.0;
    if (m.box.cx < mx) { m.box.cx = mx; m.vx = std::abs(m.vx); }
    if (m.box.cx > dims.width - mx) { m.box.cx = dims.width - mx; m.vx = -std::abs(m.vx); }
    if (m.box.cy < my) { m.box.cy = my; m.vy = std::abs(m.vy); }
    if (m.box.cy > dims.height - my) { m.box.cy = dims.height - my; m.vy = -std::abs(m.vy); }
}

inline BBox jittered(const BBox& b, double sigma_c, double sigma_s, std::mt19937_64& rng)
{
    std::normal_distribution<double> n01(0.0, 1.0);
    BBox out = b;
    out.cx += sigma_c * n01(rng);
    out.cy += sigma_c * n01(rng);
    out.w *= std::exp(sigma_s * n01(rng));
    out.h *= std::exp(sigma_s * n01(rng));
    return out;
}

// Target: Gaussian blob; distractors: flat rectangles (edges carry gradient).
inline Frame render(const FrameDims& dims, std::size_t index, const BBox& target, std::span<const Mover> distractors,
                    double noise, std::mt19937_64& rng)
{
    Frame f(dims.width, dims.height, 1, 0.0);
    f.index = index;
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int y = 0; y < dims.height; ++y)
        for (int x = 0; x < dims.width; ++x) f.at(x, y) = 0.15 + 0.1 * double(x) / dims.width;
    for (const auto& d : distractors) {
        const int x0 = std::max(0, int(std::round(d.box.x0())));
        const int x1 = std::min(dims.width - 1, int(std::round(d.box.x1())));
        const int y0 = std::max(0, int(std::round(d.box.y0())));
        const int y1 = std::min(dims.height - 1, int(std::round(d.box.y1())));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) f.at(x, y) += 0.35;
    }
    const double sx = target.w / 4.0;
    const double sy = target.h / 4.0;
    for (int y = 0; y < dims.height; ++y)
        for (int x = 0; x < dims.width; ++x) {
            const double u = (x - target.cx) / sx;
            const double v = (y - target.cy) / sy;
            const double r2 = u * u + v * v;
            if (r2 < 25.0) f.at(x, y) += 0.6 * std::exp(-0.5 * r2);
        }
    for (double& v : f.data) v = std::clamp(v + noise * n01(rng), 0.0, 1.0);
    return f;
}

}  // namespace detail

/// Deterministic synthetic scene + Top-K proposal stream. The gt-aligned
/// proposal is present with probability recall_floor (outside occlusions);
/// with probability `corruption` its confidence is demoted below the best
/// distractor's.
inline SyntheticSequence generate(const SceneConfig& cfg)
{
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u01(rng); };
    const FrameDims dims = cfg.dims;

    auto spawn = [&]() {
        detail::Mover m;
        m.box.w = uni(cfg.min_size, cfg.max_size);
        m.box.h = uni(cfg.min_size, cfg.max_size);
        m.box.cx = uni(0.5 * m.box.w + 2.0, dims.width - 0.5 * m.box.w - 2.0);
        m.box.cy = uni(0.5 * m.box.h + 2.0, dims.height - 0.5 * m.box.h - 2.0);
        const double a = uni(0.0, 2.0 * std::numbers::pi);
        m.vx = cfg.speed * std::cos(a);
        m.vy = cfg.speed * std::sin(a);
        return m;
    };

    detail::Mover target = spawn();
    std::vector<detail::Mover> distractors;
    for (std::size_t i = 0; i < cfg.n_distractors; ++i) {
        detail::Mover d = spawn();
        d.vx *= 0.5;
        d.vy *= 0.5;
        distractors.push_back(d);
    }

    SyntheticSequence seq;
    seq.dims = dims;
    int occluded_for = 0;
    for (std::size_t t = 0; t < cfg.n_frames; ++t) {
        if (t > 0) {
            if (cfg.motion != MotionModel::kLinear) {
                target.vx += 0.5 * n01(rng);
                target.vy += 0.5 * n01(rng);
                const double sp = std::hypot(target.vx, target.vy);
                if (sp > 2.0 * cfg.speed && sp > 0.0) {
                    target.vx *= 2.0 * cfg.speed / sp;
                    target.vy *= 2.0 * cfg.speed / sp;
                }
            }
            target.box.cx += target.vx;
            target.box.cy += target.vy;
            target.box.w = std::clamp(target.box.w * std::exp(0.01 * n01(rng)), cfg.min_size, cfg.max_size);
            target.box.h = std::clamp(target.box.h * std::exp(0.01 * n01(rng)), cfg.min_size, cfg.max_size);
            if (cfg.motion == MotionModel::kTeleport && u01(rng) < cfg.teleport_prob) {
                target.box.cx = uni(0.5 * target.box.w + 2.0, dims.width - 0.5 * target.box.w - 2.0);
                target.box.cy = uni(0.5 * target.box.h + 2.0, dims.height - 0.5 * target.box.h - 2.0);
            }
            detail::bounce(target, dims);
            for (auto& d : distractors) {
                d.vx += 0.3 * n01(rng);
                d.vy += 0.3 * n01(rng);
                const double sp = std::hypot(d.vx, d.vy);
                if (sp > cfg.speed && sp > 0.0) {
                    d.vx *= cfg.speed / sp;
                    d.vy *= cfg.speed / sp;
                }
                d.box.cx += d.vx;
                d.box.cy += d.vy;
                detail::bounce(d, dims);
            }
        }

        seq.frames.push_back(detail::render(dims, t, target.box, distractors, cfg.render_noise, rng));
        seq.gt_boxes.push_back(target.box);

        bool occluded = false;
        if (occluded_for > 0) {
            occluded = true;
            --occluded_for;
        } else if (u01(rng) < cfg.occlusion_prob) {
            occluded = true;
            occluded_for = std::min(2, int(u01(rng) * 3.0));  // 1-3 frames in total
        }

        std::vector<Proposal> props;
        std::vector<ProposalKind> kinds;
        double max_distractor = -1.0;
        for (const auto& d : distractors) {
            Proposal p{detail::jittered(d.box, cfg.center_jitter, cfg.size_jitter, rng), uni(0.5, 0.9)};
            max_distractor = std::max(max_distractor, p.confidence);
            props.push_back(p);
            kinds.push_back(ProposalKind::kDistractor);
        }
        if (!occluded) {
            for (std::size_t i = 0; i < cfg.n_near_misses; ++i) {
                const double a = uni(0.0, 2.0 * std::numbers::pi);
                const double r = uni(0.2, 0.5) * std::min(target.box.w, target.box.h);
                BBox b = detail::jittered(target.box, 0.0, cfg.size_jitter, rng);
                b.cx += r * std::cos(a);
                b.cy += r * std::sin(a);
                props.push_back({b, uni(0.2, 0.5)});
                kinds.push_back(ProposalKind::kNearMiss);
            }
        }
        // Random boxes fill the remaining capacity after the target slot.
        const bool target_present = !occluded && u01(rng) < cfg.recall_floor;
        const std::size_t reserved = props.size() + (target_present ? 1 : 0);
        for (std::size_t i = reserved; i < cfg.K; ++i) {
            const double w = uni(16.0, 64.0);
            const double h = uni(16.0, 64.0);
            props.push_back({BBox{uni(0.0, dims.width), uni(0.0, dims.height), w, h}, uni(0.05, 0.3)});
            kinds.push_back(ProposalKind::kRandom);
        }
        if (target_present) {
            const bool corrupt = max_distractor > 0.0 && u01(rng) < cfg.corruption;
            double conf = 0.0;
            if (corrupt) {
                conf = max_distractor * uni(0.5, 0.95);
            } else {
                double mx = 0.0;
                for (const auto& p : props) mx = std::max(mx, p.confidence);
                conf = std::min(1.0, mx + uni(0.02, 0.1));
            }
            props.push_back({detail::jittered(target.box, cfg.center_jitter, cfg.size_jitter, rng), conf});
            kinds.push_back(ProposalKind::kTarget);
        }

        std::vector<std::size_t> order(props.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return props[a].confidence > props[b].confidence; });
        if (order.size() > cfg.K) order.resize(cfg.K);
        ProposalSet set;
        set.frame = t;
        std::vector<ProposalKind> sorted_kinds;
        for (auto i : order) {
            set.entries.push_back(props[i]);
            sorted_kinds.push_back(kinds[i]);
        }
        seq.proposals.push_back(std::move(set));
        seq.kinds.push_back(std::move(sorted_kinds));
    }
    return seq;
}

enum class MatchKind { kCenterError, kIoU };

/// Best proposal by MinErr (center-error match) or MaxIoU (IoU match); it
/// qualifies when err <= threshold or iou >= threshold respectively.
struct MatchRule {
    MatchKind kind = MatchKind::kCenterError;
    double threshold = std::numeric_limits<double>::infinity();
};

/// Index of the oracle-best proposal if it qualifies under `rule`.
inline std::optional<std::size_t> oracle_best(const ProposalSet& set, const BBox& gt, const MatchRule& rule)
{
    if (set.empty()) return std::nullopt;
    if (rule.kind == MatchKind::kCenterError) {
        const auto s = select_reference_box(set, gt, SelectionRule::kMinErr);
        if (center_error(s.box, gt) <= rule.threshold) return s.index;
    } else {
        const auto s = select_reference_box(set, gt, SelectionRule::kMaxIoU);
        if (iou(s.box, gt) >= rule.threshold) return s.index;
    }
    return std::nullopt;
}

/// Fraction of frames whose oracle-best proposal qualifies and sits in the
/// first k entries of the ordering. `rankings` gives a per-frame order over
/// proposal indices; when null the emitted confidence order is used.
inline double recall_at_k(std::span<const ProposalSet> proposals, std::span<const BBox> gt, std::size_t k,
                          const MatchRule& rule, const std::vector<std::vector<std::size_t>>* rankings = nullptr)
{
    if (proposals.size() != gt.size()) throw SequenceMismatch("recall_at_k: proposals and gt differ in length");
    if (proposals.empty()) return 0.0;
    std::size_t hits = 0;
    for (std::size_t t = 0; t < proposals.size(); ++t) {
        const auto best = oracle_best(proposals[t], gt[t], rule);
        if (!best) continue;
        std::size_t rank = *best;
        if (rankings) {
            const auto& order = (*rankings)[t];
            const auto it = std::find(order.begin(), order.end(), *best);
            if (it == order.end()) continue;
            rank = std::size_t(it - order.begin());
        }
        if (rank < k) ++hits;
    }
    return double(hits) / double(proposals.size());
}

inline double recall_at_k(const SyntheticSequence& seq, std::size_t k, const MatchRule& rule,
                          const std::vector<std::vector<std::size_t>>* rankings = nullptr)
{
    return recall_at_k(seq.proposals, seq.gt_boxes, k, rule, rankings);
}

}  // namespace surgatt
