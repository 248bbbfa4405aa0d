#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "surgatt/error.hpp"
#include "surgatt/features.hpp"
#include "surgatt/geometry.hpp"
#include "surgatt/linalg.hpp"

namespace surgatt {

struct ModelConfig {
    std::size_t n_heads = 4;
    std::size_t d_k = 16;
    std::size_t hidden = 128;
    double d_max_fraction = 0.1;  // of the frame diagonal
    FeatureConfig features;
};

// ---------------------------------------------------------------------------
// Rerank head
// ---------------------------------------------------------------------------

struct RerankParams {
    std::vector<Matrix> wq, wk, wv;  // per head, d_k x d_emb
    Matrix wo;                       // d_emb x (n_heads * d_k)
    Vec ws;                          // d_emb
    Vec bias = Vec(1, 0.0);

    std::size_t n_heads() const { return wq.size(); }
    std::size_t d_k() const { return wq.empty() ? 0 : wq[0].rows; }
    std::size_t d_emb() const { return ws.size(); }

    static RerankParams zeros(std::size_t d_emb, std::size_t n_heads, std::size_t d_k)
    {
        RerankParams p;
        p.wq.assign(n_heads, Matrix(d_k, d_emb));
        p.wk.assign(n_heads, Matrix(d_k, d_emb));
        p.wv.assign(n_heads, Matrix(d_k, d_emb));
        p.wo = Matrix(d_emb, n_heads * d_k);
        p.ws.assign(d_emb, 0.0);
        p.bias.assign(1, 0.0);
        return p;
    }

    static RerankParams init(std::size_t d_emb, std::size_t n_heads, std::size_t d_k, std::mt19937_64& rng)
    {
        RerankParams p = zeros(d_emb, n_heads, d_k);
        for (auto& m : p.wq) init_uniform_fan_in(m, rng);
        for (auto& m : p.wk) init_uniform_fan_in(m, rng);
        for (auto& m : p.wv) init_uniform_fan_in(m, rng);
        init_uniform_fan_in(p.wo, rng);
        init_uniform_fan_in(p.ws, d_emb, rng);
        return p;
    }

    template <typename F>
    void visit(F&& f)
    {
        for (std::size_t h = 0; h < wq.size(); ++h) f("rerank.wq" + std::to_string(h), std::span<double>(wq[h].data));
        for (std::size_t h = 0; h < wk.size(); ++h) f("rerank.wk" + std::to_string(h), std::span<double>(wk[h].data));
        for (std::size_t h = 0; h < wv.size(); ++h) f("rerank.wv" + std::to_string(h), std::span<double>(wv[h].data));
        f(std::string("rerank.wo"), std::span<double>(wo.data));
        f(std::string("rerank.ws"), std::span<double>(ws));
        f(std::string("rerank.bias"), std::span<double>(bias));
    }
};

/// One logit per proposal; masked-out entries are excluded from every
/// softmax and from argmax.
struct RerankLogits {
    Vec values;
    std::vector<bool> mask;

    std::size_t size() const { return values.size(); }
    std::size_t valid_count() const { return std::size_t(std::count(mask.begin(), mask.end(), true)); }
};

struct RerankTrace {
    std::vector<Vec> q;                   // [head] d_k
    std::vector<std::vector<Vec>> keys;   // [head][k] d_k
    std::vector<std::vector<Vec>> vals;   // [head][k] d_k
    std::vector<Vec> attn;                // [head][k]
    std::vector<Vec> z;                   // [k] n_heads * d_k
    std::vector<Vec> act;                 // [k] tanh output, d_emb
};

inline std::vector<bool> all_valid(std::size_t n) { return std::vector<bool>(n, true); }

/// Per head: alpha_k = softmax_k(q . k_k / sqrt(d_k)) over valid candidates,
/// z_k = concat_h(alpha_k^h v_k^h), logit_k = w_s . tanh(W_o z_k) + b.
inline RerankLogits rerank_forward(std::span<const double> f_r, std::span<const Vec> candidates,
                                   const RerankParams& params, std::vector<bool> mask = {},
                                   RerankTrace* trace = nullptr)
{
    if (candidates.empty()) throw NoProposals();
    const std::size_t K = candidates.size();
    if (mask.empty()) mask = all_valid(K);
    if (mask.size() != K) throw Error("rerank_forward: mask size mismatch");
    if (std::none_of(mask.begin(), mask.end(), [](bool b) { return b; })) throw NoProposals("no valid proposals");

    const std::size_t H = params.n_heads();
    const std::size_t dk = params.d_k();
    const double inv_sqrt = 1.0 / std::sqrt(double(dk));

    RerankTrace local;
    RerankTrace& tr = trace ? *trace : local;
    tr.q.assign(H, {});
    tr.keys.assign(H, std::vector<Vec>(K));
    tr.vals.assign(H, std::vector<Vec>(K));
    tr.attn.assign(H, Vec(K, 0.0));
    tr.z.assign(K, Vec(H * dk, 0.0));
    tr.act.assign(K, {});

    for (std::size_t h = 0; h < H; ++h) {
        tr.q[h] = matvec(params.wq[h], f_r);
        double mx = -std::numeric_limits<double>::infinity();
        Vec e(K, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            if (!mask[k]) continue;
            tr.keys[h][k] = matvec(params.wk[h], candidates[k]);
            tr.vals[h][k] = matvec(params.wv[h], candidates[k]);
            e[k] = dot(tr.q[h], tr.keys[h][k]) * inv_sqrt;
            mx = std::max(mx, e[k]);
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            if (mask[k]) sum += (tr.attn[h][k] = std::exp(e[k] - mx));
        for (std::size_t k = 0; k < K; ++k)
            if (mask[k]) {
                tr.attn[h][k] /= sum;
                for (std::size_t i = 0; i < dk; ++i) tr.z[k][h * dk + i] = tr.attn[h][k] * tr.vals[h][k][i];
            }
    }

    RerankLogits out;
    out.values.assign(K, 0.0);
    out.mask = mask;
    for (std::size_t k = 0; k < K; ++k) {
        if (!mask[k]) continue;
        Vec u = matvec(params.wo, tr.z[k]);
        for (double& x : u) x = std::tanh(x);
        out.values[k] = dot(params.ws, u) + params.bias[0];
        tr.act[k] = std::move(u);
    }
    return out;
}

/// arg max over valid entries, lowest index on ties.
inline std::size_t rerank_argmax(const RerankLogits& logits)
{
    std::size_t best = logits.size();
    for (std::size_t k = 0; k < logits.size(); ++k) {
        if (!logits.mask.empty() && !logits.mask[k]) continue;
        if (best == logits.size() || logits.values[k] > logits.values[best]) best = k;
    }
    if (best == logits.size()) throw NoProposals("no valid logits");
    return best;
}

/// Candidate indices ordered by descending logit (ties by index), valid only.
inline std::vector<std::size_t> rerank_order(const RerankLogits& logits)
{
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < logits.size(); ++k)
        if (logits.mask.empty() || logits.mask[k]) idx.push_back(k);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return logits.values[a] > logits.values[b]; });
    return idx;
}

struct RerankGrads {
    RerankParams params;
    Vec f_r;
    std::vector<Vec> candidates;
};

/// Exact gradients of sum_k grad_logits[k] * logit_k (valid k only).
inline RerankGrads rerank_backward(const RerankTrace& tr, std::span<const double> f_r,
                                   std::span<const Vec> candidates, const RerankParams& params,
                                   const std::vector<bool>& mask, std::span<const double> grad_logits)
{
    const std::size_t K = candidates.size();
    const std::size_t H = params.n_heads();
    const std::size_t dk = params.d_k();
    const std::size_t D = params.d_emb();
    const double inv_sqrt = 1.0 / std::sqrt(double(dk));

    RerankGrads g;
    g.params = RerankParams::zeros(D, H, dk);
    g.f_r.assign(f_r.size(), 0.0);
    g.candidates.assign(K, Vec(D, 0.0));

    std::vector<Vec> dz(K, Vec(H * dk, 0.0));
    for (std::size_t k = 0; k < K; ++k) {
        if (!mask[k] || grad_logits[k] == 0.0) continue;
        const double gk = grad_logits[k];
        g.params.bias[0] += gk;
        axpy(gk, tr.act[k], g.params.ws);
        Vec du(D);
        for (std::size_t i = 0; i < D; ++i) du[i] = gk * params.ws[i] * (1.0 - tr.act[k][i] * tr.act[k][i]);
        outer_acc(g.params.wo, du, tr.z[k]);
        matvec_t_acc(params.wo, du, dz[k]);
    }

    for (std::size_t h = 0; h < H; ++h) {
        Vec dalpha(K, 0.0);
        double weighted = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            if (!mask[k]) continue;
            std::span<const double> dzh(dz[k].data() + h * dk, dk);
            dalpha[k] = dot(dzh, tr.vals[h][k]);
            weighted += tr.attn[h][k] * dalpha[k];
            Vec dv(dk);
            for (std::size_t i = 0; i < dk; ++i) dv[i] = tr.attn[h][k] * dzh[i];
            outer_acc(g.params.wv[h], dv, candidates[k]);
            matvec_t_acc(params.wv[h], dv, g.candidates[k]);
        }
        Vec dq(dk, 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            if (!mask[k]) continue;
            const double de = tr.attn[h][k] * (dalpha[k] - weighted);
            if (de == 0.0) continue;
            axpy(de * inv_sqrt, tr.keys[h][k], dq);
            Vec dkey(dk);
            for (std::size_t i = 0; i < dk; ++i) dkey[i] = de * inv_sqrt * tr.q[h][i];
            outer_acc(g.params.wk[h], dkey, candidates[k]);
            matvec_t_acc(params.wk[h], dkey, g.candidates[k]);
        }
        outer_acc(g.params.wq[h], dq, f_r);
        matvec_t_acc(params.wq[h], dq, g.f_r);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Refine head
// ---------------------------------------------------------------------------

struct RefineParams {
    Matrix w1;  // hidden x (d_emb + 12)
    Vec b1;
    Matrix w2;  // 4 x hidden: theta, d, s_w, s_h
    Vec b2;

    static RefineParams zeros(std::size_t d_emb, std::size_t hidden)
    {
        RefineParams p;
        p.w1 = Matrix(hidden, d_emb + kGeoDescriptorSize);
        p.b1.assign(hidden, 0.0);
        p.w2 = Matrix(4, hidden);
        p.b2.assign(4, 0.0);
        return p;
    }

    static RefineParams init(std::size_t d_emb, std::size_t hidden, std::mt19937_64& rng)
    {
        RefineParams p = zeros(d_emb, hidden);
        init_uniform_fan_in(p.w1, rng);
        init_uniform_fan_in(p.b1, p.w1.cols, rng);
        init_uniform_fan_in(p.w2, rng);
        init_uniform_fan_in(p.b2, p.w2.cols, rng);
        return p;
    }

    template <typename F>
    void visit(F&& f)
    {
        f(std::string("refine.w1"), std::span<double>(w1.data));
        f(std::string("refine.b1"), std::span<double>(b1));
        f(std::string("refine.w2"), std::span<double>(w2.data));
        f(std::string("refine.b2"), std::span<double>(b2));
    }
};

inline double sigmoid(double x)
{
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double max_step(const FrameDims& dims, double fraction) { return fraction * dims.diagonal(); }

struct RefineTrace {
    Vec input;   // concat(f_hat, g)
    Vec pre;     // hidden pre-activation
    Vec hidden;  // relu(pre)
    std::array<double, 4> raw{};
    BBox base;
    PolarCorrection corr;
    double d_max = 0.0;
    FrameDims dims;
};

struct RefineOutput {
    PolarCorrection corr;
    BBox box;
};

/// theta = raw, d = d_max * sigmoid(raw), s = exp(clamp(raw, +-ln 2)); the
/// refined box is polar_update with frame clamping.
inline RefineOutput refine_forward(std::span<const double> f_hat, const GeoDescriptor& g, const BBox& base,
                                   const RefineParams& params, const FrameDims& dims,
                                   double d_max_fraction = 0.1, RefineTrace* trace = nullptr)
{
    Vec x(f_hat.begin(), f_hat.end());
    x.insert(x.end(), g.begin(), g.end());
    Vec pre = matvec(params.w1, x);
    for (std::size_t i = 0; i < pre.size(); ++i) pre[i] += params.b1[i];
    Vec hid(pre.size());
    for (std::size_t i = 0; i < pre.size(); ++i) hid[i] = std::max(0.0, pre[i]);
    Vec o = matvec(params.w2, hid);
    std::array<double, 4> raw{};
    for (std::size_t i = 0; i < 4; ++i) raw[i] = o[i] + params.b2[i];

    const double ln2 = std::numbers::ln2;
    const double d_max = max_step(dims, d_max_fraction);
    PolarCorrection corr;
    corr.theta = raw[0];
    corr.d = d_max * sigmoid(raw[1]);
    corr.s_w = std::exp(std::clamp(raw[2], -ln2, ln2));
    corr.s_h = std::exp(std::clamp(raw[3], -ln2, ln2));

    RefineOutput out{corr, polar_update(base, corr, dims)};
    if (trace) {
        trace->input = std::move(x);
        trace->pre = std::move(pre);
        trace->hidden = std::move(hid);
        trace->raw = raw;
        trace->base = base;
        trace->corr = corr;
        trace->d_max = d_max;
        trace->dims = dims;
    }
    return out;
}

struct RefineGrads {
    RefineParams params;
    Vec f_hat;
    std::array<double, kGeoDescriptorSize> geo{};
};

/// Gradients given dL/d(cx, cy, w, h) of the refined box. Active clamps pass
/// no gradient.
inline RefineGrads refine_backward(const RefineTrace& tr, const RefineParams& params,
                                   const std::array<double, 4>& grad_box)
{
    const std::size_t hidden = params.b1.size();
    const std::size_t d_in = params.w1.cols;
    RefineGrads g;
    g.params = RefineParams::zeros(d_in - kGeoDescriptorSize, hidden);
    g.f_hat.assign(d_in - kGeoDescriptorSize, 0.0);

    const double ln2 = std::numbers::ln2;
    const PolarCorrection& c = tr.corr;
    const BBox& b = tr.base;
    const double cx = b.cx + c.d * std::cos(c.theta);
    const double cy = b.cy + c.d * std::sin(c.theta);
    const double gcx = (cx >= 0.0 && cx <= tr.dims.width) ? grad_box[0] : 0.0;
    const double gcy = (cy >= 0.0 && cy <= tr.dims.height) ? grad_box[1] : 0.0;
    const double gw = (b.w * c.s_w >= 1.0) ? grad_box[2] : 0.0;
    const double gh = (b.h * c.s_h >= 1.0) ? grad_box[3] : 0.0;

    std::array<double, 4> draw{};
    draw[0] = gcx * (-c.d * std::sin(c.theta)) + gcy * (c.d * std::cos(c.theta));
    const double dd = gcx * std::cos(c.theta) + gcy * std::sin(c.theta);
    const double sg = c.d / tr.d_max;
    draw[1] = dd * tr.d_max * sg * (1.0 - sg);
    draw[2] = (std::abs(tr.raw[2]) < ln2) ? gw * b.w * c.s_w : 0.0;
    draw[3] = (std::abs(tr.raw[3]) < ln2) ? gh * b.h * c.s_h : 0.0;

    for (std::size_t i = 0; i < 4; ++i) g.params.b2[i] = draw[i];
    outer_acc(g.params.w2, draw, tr.hidden);
    Vec dh(hidden, 0.0);
    matvec_t_acc(params.w2, draw, dh);
    for (std::size_t i = 0; i < hidden; ++i)
        if (tr.pre[i] <= 0.0) dh[i] = 0.0;
    g.params.b1 = dh;
    outer_acc(g.params.w1, dh, tr.input);
    Vec dx(d_in, 0.0);
    matvec_t_acc(params.w1, dh, dx);
    std::copy(dx.begin(), dx.begin() + std::ptrdiff_t(g.f_hat.size()), g.f_hat.begin());
    std::copy(dx.begin() + std::ptrdiff_t(g.f_hat.size()), dx.end(), g.geo.begin());
    return g;
}

// ---------------------------------------------------------------------------
// Full parameter set
// ---------------------------------------------------------------------------

struct TrackerParams {
    ProjectionParams proj;
    RerankParams rerank;
    RefineParams refine;
    std::uint64_t seed = 0;

    static TrackerParams init(const ModelConfig& cfg, std::uint64_t seed)
    {
        std::mt19937_64 rng(seed);
        TrackerParams p;
        p.seed = seed;
        p.proj = ProjectionParams::init(cfg.features, rng);
        p.rerank = RerankParams::init(cfg.features.d_emb, cfg.n_heads, cfg.d_k, rng);
        p.refine = RefineParams::init(cfg.features.d_emb, cfg.hidden, rng);
        return p;
    }

    /// Same shapes, all trainable tensors zero; posenc copied so the result
    /// can serve as a gradient accumulator.
    TrackerParams zeros_like() const
    {
        TrackerParams z;
        z.seed = seed;
        z.proj = ProjectionParams::zeros({proj.pool, proj.d_emb, 0.0});
        z.proj.posenc = proj.posenc;
        z.rerank = RerankParams::zeros(rerank.d_emb(), rerank.n_heads(), rerank.d_k());
        z.refine = RefineParams::zeros(proj.d_emb, refine.b1.size());
        return z;
    }

    /// Visits every trainable tensor in a fixed order.
    template <typename F>
    void visit(F&& f)
    {
        proj.visit([&](const auto& name, std::span<double> v) { f(std::string(name), v); });
        rerank.visit(f);
        refine.visit(f);
    }

    std::size_t parameter_count()
    {
        std::size_t n = 0;
        visit([&](const std::string&, std::span<double> v) { n += v.size(); });
        return n;
    }
};

}  // namespace surgatt
