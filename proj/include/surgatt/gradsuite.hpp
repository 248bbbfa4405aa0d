#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "surgatt/features.hpp"
#include "surgatt/gradcheck.hpp"
#include "surgatt/losses.hpp"
#include "surgatt/model.hpp"

namespace surgatt {

struct GradSuiteRow {
    std::string name;
    std::size_t instances = 0;
    double max_rel_error = 0.0;
    std::uint64_t worst_seed = 0;
};

namespace detail {

struct LossInstance {
    RerankLogits logits;
    std::vector<Proposal> proposals;
    BBox gt;
    BBox refined;
    FrameDims dims{640, 360};
    std::size_t k_star = 0;
};

inline LossInstance loss_instance(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    LossInstance in;
    const std::size_t K = 3 + std::size_t(u(rng) * 8);
    in.gt = {200 + 200 * u(rng), 100 + 150 * u(rng), 30 + 60 * u(rng), 30 + 60 * u(rng)};
    in.logits.values.resize(K);
    in.logits.mask.assign(K, true);
    for (std::size_t k = 0; k < K; ++k) {
        in.logits.values[k] = 4.0 * u(rng) - 2.0;
        in.logits.mask[k] = u(rng) > 0.25;
        in.proposals.push_back({{in.gt.cx + 120 * (u(rng) - 0.5), in.gt.cy + 120 * (u(rng) - 0.5),
                                 in.gt.w * (0.6 + 0.8 * u(rng)), in.gt.h * (0.6 + 0.8 * u(rng))},
                                u(rng)});
    }
    in.k_star = std::size_t(u(rng) * K);
    in.logits.mask[in.k_star] = true;
    in.refined = {in.gt.cx + 60 * (u(rng) - 0.5), in.gt.cy + 60 * (u(rng) - 0.5), in.gt.w * (0.6 + 0.8 * u(rng)),
                  in.gt.h * (0.6 + 0.8 * u(rng))};
    return in;
}

inline RerankLogits with_values(const RerankLogits& l, std::span<const double> v)
{
    RerankLogits out = l;
    out.values.assign(v.begin(), v.end());
    return out;
}

inline BBox box_of(std::span<const double> v) { return {v[0], v[1], v[2], v[3]}; }

inline Vec box_vec(const BBox& b) { return {b.cx, b.cy, b.w, b.h}; }

/// Flattened views over a set of vectors, for perturbing mixed inputs.
struct Flat {
    std::vector<std::span<double>> parts;

    std::size_t size() const
    {
        std::size_t n = 0;
        for (const auto& p : parts) n += p.size();
        return n;
    }
    Vec get() const
    {
        Vec out;
        for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
        return out;
    }
    void set(std::span<const double> x)
    {
        std::size_t o = 0;
        for (auto& p : parts)
            for (double& v : p) v = x[o++];
    }
};

struct RerankInstance {
    RerankParams params;
    Vec f_r;
    std::vector<Vec> cands;
    std::vector<bool> mask;
    Vec weights;
};

inline RerankInstance rerank_instance(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RerankInstance in;
    const std::size_t D = 8, H = 2, dk = 4, K = 4;
    in.params = RerankParams::init(D, H, dk, rng);
    in.f_r.resize(D);
    for (double& x : in.f_r) x = u(rng);
    in.cands.assign(K, Vec(D));
    for (auto& c : in.cands)
        for (double& x : c) x = u(rng);
    in.mask.assign(K, true);
    in.mask[std::size_t((u(rng) + 1.0) * 0.5 * K) % K] = u(rng) > 0.0;
    in.weights.resize(K);
    for (double& x : in.weights) x = u(rng);
    return in;
}

struct RefineInstance {
    RefineParams params;
    Vec f_hat;
    GeoDescriptor geo{};
    BBox base;
    FrameDims dims{640, 360};
    std::array<double, 4> weights{};
};

inline RefineInstance refine_instance(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    RefineInstance in;
    const std::size_t D = 8, hidden = 6;
    in.params = RefineParams::init(D, hidden, rng);
    in.f_hat.resize(D);
    for (double& x : in.f_hat) x = u(rng);
    for (double& x : in.geo) x = 0.5 * u(rng);
    in.base = {320 + 100 * u(rng), 180 + 60 * u(rng), 60 + 20 * u(rng), 50 + 20 * u(rng)};
    for (double& x : in.weights) x = u(rng);
    return in;
}

struct MsrInstance {
    FeaturePyramid pyramid;
    ProjectionParams params;
    BBox box;
    Vec weights;
};

inline MsrInstance msr_instance(std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    MsrInstance in;
    Frame f(96, 64);
    for (double& v : f.data) v = u(rng);
    in.pyramid = build_pyramid(f);
    in.params = ProjectionParams::init({3, 6, 0.1}, rng);
    in.box = {20 + 56 * u(rng), 16 + 32 * u(rng), 12 + 30 * u(rng), 10 + 20 * u(rng)};
    in.weights.resize(6);
    for (double& x : in.weights) x = 2.0 * u(rng) - 1.0;
    return in;
}

}  // namespace detail

/// Checks one named target on `instances` seeded cases. `check(seed)`
/// returns the grad_check result for that case.
inline GradSuiteRow grad_suite_row(const std::string& name, std::size_t instances, std::uint64_t base_seed,
                                   const std::function<GradCheckResult(std::uint64_t)>& check)
{
    GradSuiteRow row{name, instances, 0.0, base_seed};
    for (std::size_t i = 0; i < instances; ++i) {
        const std::uint64_t seed = base_seed + i;
        const GradCheckResult r = check(seed);
        if (r.max_rel_error > row.max_rel_error) {
            row.max_rel_error = r.max_rel_error;
            row.worst_seed = seed;
        }
    }
    return row;
}

inline GradCheckResult check_ce(std::uint64_t seed)
{
    const auto in = detail::loss_instance(seed);
    const auto f = [&](std::span<const double> x) { return loss_ce(detail::with_values(in.logits, x), in.k_star).value; };
    return grad_check(f, in.logits.values, loss_ce(in.logits, in.k_star).grad);
}

inline GradCheckResult check_geo(std::uint64_t seed)
{
    const auto in = detail::loss_instance(seed);
    const LossConfig cfg;
    const auto f = [&](std::span<const double> x) {
        return loss_geo(detail::with_values(in.logits, x), in.proposals, in.gt, in.dims, cfg).value;
    };
    return grad_check(f, in.logits.values, loss_geo(in.logits, in.proposals, in.gt, in.dims, cfg).grad);
}

inline GradCheckResult check_rank(std::uint64_t seed)
{
    const auto in = detail::loss_instance(seed);
    const LossConfig cfg;
    const auto f = [&](std::span<const double> x) {
        return loss_rank(detail::with_values(in.logits, x), in.proposals, in.gt, cfg).value;
    };
    return grad_check(f, in.logits.values, loss_rank(in.logits, in.proposals, in.gt, cfg).grad);
}

inline GradCheckResult check_dist(std::uint64_t seed)
{
    const auto in = detail::loss_instance(seed);
    const LossConfig cfg;
    const auto f = [&](std::span<const double> x) { return loss_refine(detail::box_of(x), in.gt, in.dims, cfg).dist; };
    const auto g = loss_refine(in.refined, in.gt, in.dims, cfg).grad_dist;
    return grad_check(f, detail::box_vec(in.refined), g);
}

inline GradCheckResult check_scale(std::uint64_t seed)
{
    const auto in = detail::loss_instance(seed);
    const LossConfig cfg;
    const auto f = [&](std::span<const double> x) { return loss_refine(detail::box_of(x), in.gt, in.dims, cfg).scale; };
    const auto g = loss_refine(in.refined, in.gt, in.dims, cfg).grad_scale;
    return grad_check(f, detail::box_vec(in.refined), g);
}

/// Total loss as a function of (logits, refined box).
inline GradCheckResult check_total(std::uint64_t seed)
{
    const auto in = detail::loss_instance(seed);
    const LossConfig cfg;
    const std::size_t K = in.logits.size();
    const auto eval = [&](std::span<const double> x) {
        const RerankLogits l = detail::with_values(in.logits, x.first(K));
        const BBox b = detail::box_of(x.subspan(K));
        return loss_total(loss_ce(l, in.k_star), loss_geo(l, in.proposals, in.gt, in.dims, cfg),
                          loss_rank(l, in.proposals, in.gt, cfg), loss_refine(b, in.gt, in.dims, cfg), cfg);
    };
    Vec x = in.logits.values;
    const Vec b = detail::box_vec(in.refined);
    x.insert(x.end(), b.begin(), b.end());
    const LossBundle bundle = eval(x);
    Vec analytic = bundle.grad_logits;
    analytic.insert(analytic.end(), bundle.grad_box.begin(), bundle.grad_box.end());
    return grad_check([&](std::span<const double> v) { return eval(v).total; }, x, analytic);
}

/// L = sum_k w_k logit_k over every rerank parameter, f_r and the candidates.
inline GradCheckResult check_rerank_backward(std::uint64_t seed)
{
    auto in = detail::rerank_instance(seed);
    detail::Flat flat;
    in.params.visit([&](const std::string&, std::span<double> v) { flat.parts.push_back(v); });
    flat.parts.push_back(in.f_r);
    for (auto& c : in.cands) flat.parts.push_back(c);

    const auto value = [&] {
        const RerankLogits l = rerank_forward(in.f_r, in.cands, in.params, in.mask);
        double s = 0.0;
        for (std::size_t k = 0; k < l.size(); ++k)
            if (in.mask[k]) s += in.weights[k] * l.values[k];
        return s;
    };
    RerankTrace tr;
    rerank_forward(in.f_r, in.cands, in.params, in.mask, &tr);
    Vec gl = in.weights;
    for (std::size_t k = 0; k < gl.size(); ++k)
        if (!in.mask[k]) gl[k] = 0.0;
    RerankGrads g = rerank_backward(tr, in.f_r, in.cands, in.params, in.mask, gl);
    Vec analytic;
    g.params.visit([&](const std::string&, std::span<double> v) { analytic.insert(analytic.end(), v.begin(), v.end()); });
    analytic.insert(analytic.end(), g.f_r.begin(), g.f_r.end());
    for (const auto& c : g.candidates) analytic.insert(analytic.end(), c.begin(), c.end());

    const Vec x0 = flat.get();
    const auto f = [&](std::span<const double> x) {
        flat.set(x);
        const double v = value();
        flat.set(x0);
        return v;
    };
    return grad_check(f, x0, analytic);
}

/// L = w . (cx, cy, w, h) of the refined box over every refine parameter,
/// f_hat and the Geo descriptor.
inline GradCheckResult check_refine_backward(std::uint64_t seed)
{
    auto in = detail::refine_instance(seed);
    detail::Flat flat;
    in.params.visit([&](const std::string&, std::span<double> v) { flat.parts.push_back(v); });
    flat.parts.push_back(in.f_hat);
    flat.parts.push_back(in.geo);

    const auto value = [&] {
        const BBox b = refine_forward(in.f_hat, in.geo, in.base, in.params, in.dims).box;
        return in.weights[0] * b.cx + in.weights[1] * b.cy + in.weights[2] * b.w + in.weights[3] * b.h;
    };
    RefineTrace tr;
    refine_forward(in.f_hat, in.geo, in.base, in.params, in.dims, 0.1, &tr);
    RefineGrads g = refine_backward(tr, in.params, in.weights);
    Vec analytic;
    g.params.visit([&](const std::string&, std::span<double> v) { analytic.insert(analytic.end(), v.begin(), v.end()); });
    analytic.insert(analytic.end(), g.f_hat.begin(), g.f_hat.end());
    analytic.insert(analytic.end(), g.geo.begin(), g.geo.end());

    const Vec x0 = flat.get();
    const auto f = [&](std::span<const double> x) {
        flat.set(x);
        const double v = value();
        flat.set(x0);
        return v;
    };
    return grad_check(f, x0, analytic);
}

/// L = w . f over the phi_s projections.
inline GradCheckResult check_msr_backward(std::uint64_t seed)
{
    auto in = detail::msr_instance(seed);
    detail::Flat flat;
    in.params.visit([&](const std::string&, std::span<double> v) { flat.parts.push_back(v); });

    MsrTrace tr;
    msr_fuse(in.pyramid, in.box, in.params, &tr);
    ProjectionParams grads = ProjectionParams::zeros({in.params.pool, in.params.d_emb, 0.0});
    msr_backward(tr, in.weights, grads);
    Vec analytic;
    grads.visit([&](const std::string&, std::span<double> v) { analytic.insert(analytic.end(), v.begin(), v.end()); });

    const Vec x0 = flat.get();
    const auto f = [&](std::span<const double> x) {
        flat.set(x);
        const double v = dot(msr_fuse(in.pyramid, in.box, in.params), in.weights);
        flat.set(x0);
        return v;
    };
    return grad_check(f, x0, analytic);
}

inline std::vector<GradSuiteRow> run_grad_suite(std::size_t instances = 50, std::uint64_t base_seed = 1)
{
    const std::pair<const char*, GradCheckResult (*)(std::uint64_t)> targets[] = {
        {"ce", check_ce},
        {"geo", check_geo},
        {"rank", check_rank},
        {"dist", check_dist},
        {"scale", check_scale},
        {"total", check_total},
        {"rerank_backward", check_rerank_backward},
        {"refine_backward", check_refine_backward},
        {"msr_backward", check_msr_backward},
    };
    std::vector<GradSuiteRow> rows;
    for (const auto& [name, fn] : targets) rows.push_back(grad_suite_row(name, instances, base_seed, fn));
    return rows;
}

/// The rank-loss check with one analytic component scaled by 1.1; the
/// checker has to flag it.
inline GradCheckResult negative_control(std::uint64_t seed)
{
    const auto in = detail::loss_instance(seed);
    const LossConfig cfg;
    Vec g = loss_rank(in.logits, in.proposals, in.gt, cfg).grad;
    std::size_t big = 0;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (std::abs(g[k]) > std::abs(g[big])) big = k;
    g[big] *= 1.1;
    const auto f = [&](std::span<const double> x) {
        return loss_rank(detail::with_values(in.logits, x), in.proposals, in.gt, cfg).value;
    };
    return grad_check(f, in.logits.values, g);
}

}  // namespace surgatt
