#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "surgatt/error.hpp"
#include "surgatt/geometry.hpp"
#include "surgatt/linalg.hpp"
#include "surgatt/model.hpp"

namespace surgatt {

struct LossConfig {
    double tau = 0.15;
    double sigma_rank = 15.0;  // pixels
    std::size_t top_m = 5;
    double lambda_geo = 0.1;
    double lambda_rank = 0.5;
    double lambda_dist = 0.1;
    double huber_delta = 1.0;

    void validate() const
    {
        if (!(tau > 0.0)) throw ConfigError("loss.tau must be > 0");
        if (!(sigma_rank > 0.0)) throw ConfigError("loss.sigma_rank must be > 0");
        if (top_m < 1) throw ConfigError("loss.top_m must be >= 1");
        if (!(huber_delta > 0.0)) throw ConfigError("loss.huber_delta must be > 0");
    }
};

inline double huber(double x, double delta)
{
    const double a = std::abs(x);
    return a <= delta ? 0.5 * x * x : delta * (a - 0.5 * delta);
}

inline double huber_grad(double x, double delta)
{
    if (std::abs(x) <= delta) return x;
    return x > 0 ? delta : -delta;
}

/// Sum of per-coordinate Huber terms.
inline double huber(std::span<const double> x, double delta)
{
    double s = 0.0;
    for (double v : x) s += huber(v, delta);
    return s;
}

/// A ranking loss value with its gradient over all K logits (zero on
/// masked entries).
struct LossTerm {
    double value = 0.0;
    Vec grad;
};

namespace detail {

inline bool is_valid(const RerankLogits& l, std::size_t k) { return l.mask.empty() || l.mask[k]; }

// Softmax of logits/temperature restricted to `index`.
inline Vec softmax_over(const RerankLogits& l, std::span<const std::size_t> index, double temperature)
{
    double mx = -std::numeric_limits<double>::infinity();
    for (auto k : index) mx = std::max(mx, l.values[k] / temperature);
    Vec p(index.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < index.size(); ++i) sum += (p[i] = std::exp(l.values[index[i]] / temperature - mx));
    for (double& v : p) v /= sum;
    return p;
}

inline std::vector<std::size_t> valid_indices(const RerankLogits& l)
{
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < l.size(); ++k)
        if (is_valid(l, k)) idx.push_back(k);
    return idx;
}

}  // namespace detail

/// -log softmax(logits)[k_star] over valid entries.
inline LossTerm loss_ce(const RerankLogits& logits, std::size_t k_star)
{
    if (k_star >= logits.size() || !detail::is_valid(logits, k_star))
        throw Error("loss_ce: target index is not a valid proposal");
    const auto idx = detail::valid_indices(logits);
    const Vec p = detail::softmax_over(logits, idx, 1.0);
    LossTerm out;
    out.grad.assign(logits.size(), 0.0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        out.grad[idx[i]] = p[i];
        if (idx[i] == k_star) out.value = -std::log(p[i]);
    }
    out.grad[k_star] -= 1.0;
    // log p can underflow to -inf for extreme logits; recompute stably.
    if (!std::isfinite(out.value)) {
        double mx = -std::numeric_limits<double>::infinity();
        for (auto k : idx) mx = std::max(mx, logits.values[k]);
        double s = 0.0;
        for (auto k : idx) s += std::exp(logits.values[k] - mx);
        out.value = mx + std::log(s) - logits.values[k_star];
    }
    return out;
}

/// Soft-aggregated box under softmax(logits / tau) over valid entries.
inline BBox soft_aggregate(const RerankLogits& logits, std::span<const Proposal> proposals, double tau)
{
    const auto idx = detail::valid_indices(logits);
    const Vec pi = detail::softmax_over(logits, idx, tau);
    BBox b{0, 0, 0, 0};
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const BBox& p = proposals[idx[i]].box;
        b.cx += pi[i] * p.cx;
        b.cy += pi[i] * p.cy;
        b.w += pi[i] * p.w;
        b.h += pi[i] * p.h;
    }
    return b;
}

/// huber(|c(B_bar) - c(gt)| / diagonal)
inline LossTerm loss_geo(const RerankLogits& logits, std::span<const Proposal> proposals, const BBox& gt,
                         const FrameDims& dims, const LossConfig& cfg)
{
    if (proposals.size() != logits.size()) throw Error("loss_geo: proposal/logit count mismatch");
    const auto idx = detail::valid_indices(logits);
    if (idx.empty()) throw NoProposals("loss_geo: no valid proposals");
    const Vec pi = detail::softmax_over(logits, idx, cfg.tau);
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        cx += pi[i] * proposals[idx[i]].box.cx;
        cy += pi[i] * proposals[idx[i]].box.cy;
    }
    const double diag = dims.diagonal();
    const double dx = cx - gt.cx;
    const double dy = cy - gt.cy;
    const double dist = std::hypot(dx, dy);
    const double e = dist / diag;

    LossTerm out;
    out.value = huber(e, cfg.huber_delta);
    out.grad.assign(logits.size(), 0.0);
    if (dist == 0.0) return out;
    const double scale = huber_grad(e, cfg.huber_delta) / (dist * diag);
    const double gcx = scale * dx;
    const double gcy = scale * dy;
    Vec dpi(idx.size());
    double weighted = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        dpi[i] = gcx * proposals[idx[i]].box.cx + gcy * proposals[idx[i]].box.cy;
        weighted += pi[i] * dpi[i];
    }
    for (std::size_t i = 0; i < idx.size(); ++i) out.grad[idx[i]] = pi[i] * (dpi[i] - weighted) / cfg.tau;
    return out;
}

/// Valid proposals ordered by center error to gt (ties by index), truncated
/// to min(M, valid count).
inline std::vector<std::size_t> rank_pool(const RerankLogits& logits, std::span<const Proposal> proposals,
                                          const BBox& gt, std::size_t top_m)
{
    auto idx = detail::valid_indices(logits);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return center_error(proposals[a].box, gt) < center_error(proposals[b].box, gt);
    });
    idx.resize(std::min(idx.size(), top_m));
    return idx;
}

/// Teacher q over the pool: softmax(-err / sigma).
inline Vec geometric_teacher(std::span<const std::size_t> pool, std::span<const Proposal> proposals,
                             const BBox& gt, double sigma)
{
    Vec q(pool.size());
    double mn = std::numeric_limits<double>::infinity();
    for (auto k : pool) mn = std::min(mn, center_error(proposals[k].box, gt));
    double sum = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i)
        sum += (q[i] = std::exp(-(center_error(proposals[pool[i]].box, gt) - mn) / sigma));
    for (double& v : q) v /= sum;
    return q;
}

/// -sum_k q_k log p_k over the Top-M pool, p renormalized over the pool.
inline LossTerm loss_rank(const RerankLogits& logits, std::span<const Proposal> proposals, const BBox& gt,
                          const LossConfig& cfg)
{
    if (proposals.size() != logits.size()) throw Error("loss_rank: proposal/logit count mismatch");
    const auto pool = rank_pool(logits, proposals, gt, cfg.top_m);
    if (pool.empty()) throw NoProposals("loss_rank: no valid proposals");
    const Vec q = geometric_teacher(pool, proposals, gt, cfg.sigma_rank);

    double mx = -std::numeric_limits<double>::infinity();
    for (auto k : pool) mx = std::max(mx, logits.values[k]);
    double sum = 0.0;
    for (auto k : pool) sum += std::exp(logits.values[k] - mx);
    const double lse = mx + std::log(sum);

    LossTerm out;
    out.grad.assign(logits.size(), 0.0);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const double logp = logits.values[pool[i]] - lse;
        out.value -= q[i] * logp;
        out.grad[pool[i]] = std::exp(logp) - q[i];
    }
    return out;
}

struct RefineLoss {
    double dist = 0.0;
    double scale = 0.0;
    double total = 0.0;  // lambda_dist * dist + scale
    std::array<double, 4> grad_dist{};
    std::array<double, 4> grad_scale{};
    std::array<double, 4> grad{};  // d total / d (cx, cy, w, h)
};

inline RefineLoss loss_refine(const BBox& refined, const BBox& gt, const FrameDims& dims, const LossConfig& cfg)
{
    RefineLoss out;
    const double diag = dims.diagonal();
    const double dx = refined.cx - gt.cx;
    const double dy = refined.cy - gt.cy;
    const double dist = std::hypot(dx, dy);
    const double e = dist / diag;
    out.dist = huber(e, cfg.huber_delta);
    if (dist > 0.0) {
        const double s = huber_grad(e, cfg.huber_delta) / (dist * diag);
        out.grad_dist[0] = s * dx;
        out.grad_dist[1] = s * dy;
    }
    const double lw = std::log(refined.w) - std::log(gt.w);
    const double lh = std::log(refined.h) - std::log(gt.h);
    out.scale = huber(lw, cfg.huber_delta) + huber(lh, cfg.huber_delta);
    out.grad_scale[2] = huber_grad(lw, cfg.huber_delta) / refined.w;
    out.grad_scale[3] = huber_grad(lh, cfg.huber_delta) / refined.h;

    out.total = cfg.lambda_dist * out.dist + out.scale;
    for (std::size_t i = 0; i < 4; ++i) out.grad[i] = cfg.lambda_dist * out.grad_dist[i] + out.grad_scale[i];
    return out;
}

struct LossBundle {
    double ce = 0.0;
    double geo = 0.0;
    double rank = 0.0;
    double dist = 0.0;
    double scale = 0.0;
    double rerank_total = 0.0;
    double refine_total = 0.0;
    double total = 0.0;
    Vec grad_logits;
    std::array<double, 4> grad_box{};
};

/// rerank = ce + lambda_geo geo + lambda_rank rank; refine = lambda_dist dist
/// + scale; total = rerank + refine. Gradients accumulate with the same weights.
inline LossBundle loss_total(const LossTerm& ce, const LossTerm& geo, const LossTerm& rank, const RefineLoss& refine,
                             const LossConfig& cfg)
{
    LossBundle b;
    b.ce = ce.value;
    b.geo = geo.value;
    b.rank = rank.value;
    b.dist = refine.dist;
    b.scale = refine.scale;
    b.rerank_total = b.ce + cfg.lambda_geo * b.geo + cfg.lambda_rank * b.rank;
    b.refine_total = cfg.lambda_dist * b.dist + b.scale;
    b.total = b.rerank_total + b.refine_total;
    const std::size_t K = std::max({ce.grad.size(), geo.grad.size(), rank.grad.size()});
    b.grad_logits.assign(K, 0.0);
    for (std::size_t k = 0; k < ce.grad.size(); ++k) b.grad_logits[k] += ce.grad[k];
    for (std::size_t k = 0; k < geo.grad.size(); ++k) b.grad_logits[k] += cfg.lambda_geo * geo.grad[k];
    for (std::size_t k = 0; k < rank.grad.size(); ++k) b.grad_logits[k] += cfg.lambda_rank * rank.grad[k];
    for (std::size_t i = 0; i < 4; ++i)
        b.grad_box[i] = cfg.lambda_dist * refine.grad_dist[i] + refine.grad_scale[i];
    return b;
}

/// Value-only combination of the five components.
inline LossBundle loss_total(double ce, double geo, double rank, double dist, double scale, const LossConfig& cfg)
{
    RefineLoss r;
    r.dist = dist;
    r.scale = scale;
    return loss_total(LossTerm{ce, {}}, LossTerm{geo, {}}, LossTerm{rank, {}}, r, cfg);
}

}  // namespace surgatt
