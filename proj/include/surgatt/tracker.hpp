#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "surgatt/error.hpp"
#include "surgatt/features.hpp"
#include "surgatt/geometry.hpp"
#include "surgatt/heatmap.hpp"
#include "surgatt/losses.hpp"
#include "surgatt/model.hpp"
#include "surgatt/synth.hpp"

namespace surgatt {

// ---------------------------------------------------------------------------
// Temporal gap sampling
// ---------------------------------------------------------------------------

struct GapDistribution {
    std::vector<std::size_t> gaps = {1, 2, 4, 8, 16, 32};
    std::vector<double> probs = {0.4, 0.2, 0.1, 0.1, 0.1, 0.1};

    void validate() const
    {
        if (gaps.empty() || gaps.size() != probs.size()) throw ConfigError("gap: gaps and probs must have equal, non-zero length");
        double s = 0.0;
        for (double p : probs) {
            if (!(p >= 0.0)) throw ConfigError("gap: probabilities must be non-negative");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-12) throw ConfigError("gap: probabilities must sum to 1");
        for (auto g : gaps)
            if (g < 1) throw ConfigError("gap: gaps must be >= 1");
    }
};

inline std::size_t sample_gap(const GapDistribution& dist, std::mt19937_64& rng)
{
    std::discrete_distribution<std::size_t> pick(dist.probs.begin(), dist.probs.end());
    return dist.gaps[pick(rng)];
}

/// r = t - n clipped to the first frame (0-based indices).
inline std::size_t reference_frame(std::size_t t, std::size_t n) { return t >= n ? t - n : 0; }

// ---------------------------------------------------------------------------
// Per-sequence inputs shared by training and inference
// ---------------------------------------------------------------------------

/// What the frozen detector provides per frame, plus gt for training/eval.
struct TrackData {
    FrameDims dims;
    std::vector<FeaturePyramid> pyramids;
    std::vector<ProposalSet> proposals;
    std::vector<BBox> gt;  // may be empty at inference

    std::size_t size() const { return proposals.size(); }
};

inline TrackData prepare(const SyntheticSequence& seq)
{
    TrackData d;
    d.dims = seq.dims;
    d.pyramids.reserve(seq.frames.size());
    for (const auto& f : seq.frames) d.pyramids.push_back(build_pyramid(f));
    d.proposals = seq.proposals;
    d.gt = seq.gt_boxes;
    return d;
}

inline std::vector<Vec> embed_all(const FeaturePyramid& pyr, const ProposalSet& set, const ProjectionParams& proj,
                                  std::vector<MsrTrace>* traces = nullptr)
{
    std::vector<Vec> out;
    out.reserve(set.size());
    if (traces) traces->assign(set.size(), {});
    for (std::size_t k = 0; k < set.size(); ++k)
        out.push_back(msr_fuse(pyr, set.entries[k].box, proj, traces ? &(*traces)[k] : nullptr));
    return out;
}

inline std::vector<bool> overlap_mask(const ProposalSet& set, const BBox& gt)
{
    std::vector<bool> m(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) m[k] = iou(set.entries[k].box, gt) > 0.0;
    return m;
}

/// MinErr oracle over proposals overlapping gt, falling back to all
/// proposals and then to gt itself.
inline BBox training_reference(const ProposalSet& set, const BBox& gt)
{
    if (set.empty()) return gt;
    std::vector<Proposal> valid;
    for (const auto& p : set.entries)
        if (iou(p.box, gt) > 0.0) valid.push_back(p);
    if (!valid.empty()) return select_reference_box(valid, gt, SelectionRule::kMinErr).box;
    return select_reference_box(set, gt, SelectionRule::kMinErr).box;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct StepResult {
    LossBundle loss;
    bool skipped = false;
    std::size_t selected = 0;
    std::size_t target = 0;
};

inline bool all_finite(std::span<const double> v)
{
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// One Alg.-1 training sample: reference from the MinErr oracle on frame r,
/// rerank + refine on frame t, losses on frame t only. Attention runs over all
/// proposals (as at inference); losses see only proposals overlapping gt.
/// Gradients are added into `grads` when given.
inline StepResult train_step(const TrackData& data, std::size_t t, std::size_t r, const TrackerParams& params,
                             const ModelConfig& mcfg, const LossConfig& lcfg, TrackerParams* grads = nullptr)
{
    StepResult res;
    const ProposalSet& props = data.proposals[t];
    const BBox& gt = data.gt[t];
    if (props.empty()) {
        res.skipped = true;
        return res;
    }
    const std::vector<bool> valid = overlap_mask(props, gt);
    if (std::none_of(valid.begin(), valid.end(), [](bool b) { return b; })) {
        res.skipped = true;
        return res;
    }

    const BBox ref = training_reference(data.proposals[r], data.gt[r]);
    MsrTrace ref_trace;
    const Vec f_r = msr_fuse(data.pyramids[r], ref, params.proj, &ref_trace);
    std::vector<MsrTrace> cand_traces;
    const std::vector<Vec> cands = embed_all(data.pyramids[t], props, params.proj, &cand_traces);

    RerankTrace rtrace;
    const RerankLogits logits = rerank_forward(f_r, cands, params.rerank, {}, &rtrace);
    RerankLogits masked = logits;
    masked.mask = valid;

    std::vector<Proposal> valid_props;
    std::size_t k_star = 0;
    {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < props.size(); ++k) {
            if (!valid[k]) continue;
            const double e = center_error(props.entries[k].box, gt);
            if (e < best) {
                best = e;
                k_star = k;
            }
        }
    }
    const std::span<const Proposal> all(props.entries);
    const LossTerm ce = loss_ce(masked, k_star);
    const LossTerm geo = loss_geo(masked, all, gt, data.dims, lcfg);
    const LossTerm rank = loss_rank(masked, all, gt, lcfg);

    const std::size_t k_hat = rerank_argmax(logits);
    const BBox& base = props.entries[k_hat].box;
    RefineTrace ftrace;
    const RefineOutput refined =
        refine_forward(cands[k_hat], geo_descriptor(base, ref, data.dims), base, params.refine, data.dims,
                       mcfg.d_max_fraction, &ftrace);
    // The refine loss follows the same validity rule as the ranking losses:
    // a selected proposal with no overlap contributes nothing.
    const RefineLoss rl = valid[k_hat] ? loss_refine(refined.box, gt, data.dims, lcfg) : RefineLoss{};

    res.loss = loss_total(ce, geo, rank, rl, lcfg);
    res.selected = k_hat;
    res.target = k_star;
    if (!std::isfinite(res.loss.total) || !all_finite(res.loss.grad_logits))
        throw NumericalError("non-finite loss in train_step at frame " + std::to_string(t));

    if (grads) {
        const RerankGrads rg = rerank_backward(rtrace, f_r, cands, params.rerank, logits.mask, res.loss.grad_logits);
        const RefineGrads fg = refine_backward(ftrace, params.refine, res.loss.grad_box);

        auto add = [](auto& dst, auto& src) {
            std::vector<std::span<double>> d, s;
            dst.visit([&](const auto&, std::span<double> v) { d.push_back(v); });
            src.visit([&](const auto&, std::span<double> v) { s.push_back(v); });
            for (std::size_t i = 0; i < d.size(); ++i) axpy(1.0, s[i], d[i]);
        };
        RerankParams rgp = rg.params;
        RefineParams fgp = fg.params;
        add(grads->rerank, rgp);
        add(grads->refine, fgp);

        msr_backward(ref_trace, rg.f_r, grads->proj);
        for (std::size_t k = 0; k < cands.size(); ++k) {
            Vec g = rg.candidates[k];
            if (k == k_hat) axpy(1.0, fg.f_hat, g);
            msr_backward(cand_traces[k], g, grads->proj);
        }
    }
    return res;
}

enum class OptimizerKind { kSgdMomentum, kAdamW };

struct TrainConfig {
    std::size_t epochs = 5;
    double lr = 1e-4;
    double momentum = 0.9;
    OptimizerKind optimizer = OptimizerKind::kSgdMomentum;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double weight_decay = 0.0;
    std::size_t batch_size = 8;
    double grad_clip = 0.0;  // global L2 norm, 0 disables
    double proj_lr_scale = 1.0;  // learning-rate multiplier for the phi_s projections
    std::uint64_t seed = 1;
};

/// Momentum SGD (v = mu v + g; p -= lr v) or AdamW over the flattened
/// trainable tensors.
class Optimizer {
public:
    explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}

    void step(TrackerParams& params, TrackerParams& grads)
    {
        std::vector<std::span<double>> p, g;
        std::vector<double> lr;
        params.visit([&](const std::string& name, std::span<double> v) {
            p.push_back(v);
            lr.push_back(name.starts_with("proj.") ? cfg_.lr * cfg_.proj_lr_scale : cfg_.lr);
        });
        grads.visit([&](const std::string&, std::span<double> v) { g.push_back(v); });
        if (m_.empty()) {
            for (auto& v : p) {
                m_.emplace_back(v.size(), 0.0);
                v_.emplace_back(v.size(), 0.0);
            }
        }
        if (cfg_.grad_clip > 0.0) {
            double sq = 0.0;
            for (auto& v : g)
                for (double x : v) sq += x * x;
            const double norm = std::sqrt(sq);
            if (norm > cfg_.grad_clip)
                for (auto& v : g)
                    for (double& x : v) x *= cfg_.grad_clip / norm;
        }
        ++t_;
        for (std::size_t i = 0; i < p.size(); ++i) {
            auto& m = m_[i];
            auto& s = v_[i];
            for (std::size_t j = 0; j < p[i].size(); ++j) {
                const double gj = g[i][j];
                if (cfg_.optimizer == OptimizerKind::kSgdMomentum) {
                    m[j] = cfg_.momentum * m[j] + gj;
                    p[i][j] -= lr[i] * m[j];
                } else {
                    m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
                    s[j] = cfg_.beta2 * s[j] + (1.0 - cfg_.beta2) * gj * gj;
                    const double mh = m[j] / (1.0 - std::pow(cfg_.beta1, double(t_)));
                    const double vh = s[j] / (1.0 - std::pow(cfg_.beta2, double(t_)));
                    p[i][j] -= lr[i] * (mh / (std::sqrt(vh) + cfg_.adam_eps) + cfg_.weight_decay * p[i][j]);
                }
            }
        }
    }

private:
    TrainConfig cfg_;
    std::vector<Vec> m_, v_;
    std::uint64_t t_ = 0;
};

struct EpochStats {
    std::size_t epoch = 0;
    LossBundle mean;  // component means over non-skipped steps
    std::size_t steps = 0;
    std::size_t skipped = 0;
    double selection_accuracy = 0.0;  // argmax == MinErr target
};

struct TrainResult {
    TrackerParams params;
    std::vector<EpochStats> curve;
};

/// Deterministic given cfg.seed: per epoch every (sequence, t >= 1) sample
/// is visited once in shuffled order, with a fresh gap draw each visit.
inline TrainResult train(std::span<const TrackData> dataset, TrackerParams params, const TrainConfig& tcfg,
                         const ModelConfig& mcfg, const LossConfig& lcfg, const GapDistribution& gaps,
                         const std::function<void(const EpochStats&)>& on_epoch = {})
{
    lcfg.validate();
    gaps.validate();
    std::mt19937_64 rng(tcfg.seed);
    std::vector<std::pair<std::size_t, std::size_t>> samples;
    for (std::size_t s = 0; s < dataset.size(); ++s) {
        if (dataset[s].gt.size() != dataset[s].size()) throw SequenceMismatch("training data needs gt for every frame");
        for (std::size_t t = 1; t < dataset[s].size(); ++t) samples.emplace_back(s, t);
    }

    Optimizer opt(tcfg);
    TrainResult result;
    const std::size_t batch = std::max<std::size_t>(1, tcfg.batch_size);
    for (std::size_t epoch = 0; epoch < tcfg.epochs; ++epoch) {
        std::shuffle(samples.begin(), samples.end(), rng);
        EpochStats st;
        st.epoch = epoch + 1;
        std::size_t correct = 0;
        for (std::size_t b0 = 0; b0 < samples.size(); b0 += batch) {
            TrackerParams grads = params.zeros_like();
            std::size_t used = 0;
            for (std::size_t i = b0; i < std::min(samples.size(), b0 + batch); ++i) {
                const auto [s, t] = samples[i];
                const std::size_t r = reference_frame(t, sample_gap(gaps, rng));
                const StepResult sr = train_step(dataset[s], t, r, params, mcfg, lcfg, &grads);
                if (sr.skipped) {
                    ++st.skipped;
                    continue;
                }
                ++used;
                ++st.steps;
                if (sr.selected == sr.target) ++correct;
                st.mean.ce += sr.loss.ce;
                st.mean.geo += sr.loss.geo;
                st.mean.rank += sr.loss.rank;
                st.mean.dist += sr.loss.dist;
                st.mean.scale += sr.loss.scale;
                st.mean.rerank_total += sr.loss.rerank_total;
                st.mean.refine_total += sr.loss.refine_total;
                st.mean.total += sr.loss.total;
            }
            if (used == 0) continue;
            grads.visit([&](const std::string&, std::span<double> v) {
                for (double& x : v) x /= double(used);
            });
            opt.step(params, grads);
        }
        if (st.steps > 0) {
            const double n = double(st.steps);
            st.mean.ce /= n;
            st.mean.geo /= n;
            st.mean.rank /= n;
            st.mean.dist /= n;
            st.mean.scale /= n;
            st.mean.rerank_total /= n;
            st.mean.refine_total /= n;
            st.mean.total /= n;
            st.selection_accuracy = double(correct) / n;
        }
        bool finite = true;
        params.visit([&](const std::string&, std::span<double> v) { finite = finite && all_finite(v); });
        if (!finite) throw NumericalError("non-finite parameters after epoch " + std::to_string(epoch + 1));
        if (on_epoch) on_epoch(st);
        result.curve.push_back(st);
    }
    result.params = std::move(params);
    return result;
}

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

enum class InitMode { kConfTop1, kGroundTruth };

struct TrackRecord {
    std::size_t t = 0;
    BBox selected;              // B_hat_t (rerank output)
    BBox refined;               // B_t^r
    int selected_k = -1;        // -1 on the initial frame and on held frames
    double logit = 0.0;
    bool held = false;
    std::vector<std::size_t> ranking;  // proposal indices by descending logit
};

/// Default box when nothing else is available on frame 0.
inline BBox frame_center_box(const FrameDims& dims)
{
    return {0.5 * dims.width, 0.5 * dims.height, 0.1 * dims.width, 0.1 * dims.height};
}

/// Online inference: reference is the previous selection B_hat_{t-1} on
/// frame t-1. Empty proposal sets hold the previous boxes. When `on_heatmap`
/// is set, H_t is rendered from the refined box and handed over per frame.
inline std::vector<TrackRecord> track(const TrackData& data, const TrackerParams& params, const ModelConfig& mcfg,
                                      InitMode init = InitMode::kConfTop1,
                                      const HeatmapConfig* hcfg = nullptr,
                                      const std::function<void(std::size_t, const Heatmap&)>& on_heatmap = {})
{
    std::vector<TrackRecord> out;
    if (data.size() == 0) return out;
    std::optional<HeatmapRenderer> renderer;
    if (hcfg && on_heatmap) renderer.emplace(*hcfg);

    TrackRecord first;
    first.t = 0;
    if (init == InitMode::kGroundTruth) {
        if (data.gt.empty()) throw Error("gt initialization requested without gt boxes");
        first.selected = data.gt[0];
    } else if (!data.proposals[0].empty()) {
        first.selected = data.proposals[0].entries[0].box;
        first.selected_k = 0;
        first.logit = data.proposals[0].entries[0].confidence;
    } else {
        first.selected = frame_center_box(data.dims);
        first.held = true;
    }
    for (std::size_t k = 0; k < data.proposals[0].size(); ++k) first.ranking.push_back(k);
    first.refined = first.selected;
    out.push_back(first);
    if (renderer) {
        const BBox b[] = {first.refined};
        on_heatmap(0, renderer->push(b));
    }

    for (std::size_t t = 1; t < data.size(); ++t) {
        const TrackRecord& prev = out.back();
        TrackRecord rec;
        rec.t = t;
        const ProposalSet& props = data.proposals[t];
        if (props.empty()) {
            rec.selected = prev.selected;
            rec.refined = prev.refined;
            rec.held = true;
        } else {
            const Vec f_r = msr_fuse(data.pyramids[t - 1], prev.selected, params.proj);
            const std::vector<Vec> cands = embed_all(data.pyramids[t], props, params.proj);
            const RerankLogits logits = rerank_forward(f_r, cands, params.rerank);
            const std::size_t k_hat = rerank_argmax(logits);
            rec.selected = props.entries[k_hat].box;
            rec.selected_k = int(k_hat);
            rec.logit = logits.values[k_hat];
            rec.ranking = rerank_order(logits);
            const RefineOutput r = refine_forward(cands[k_hat], geo_descriptor(rec.selected, prev.selected, data.dims),
                                                  rec.selected, params.refine, data.dims, mcfg.d_max_fraction);
            rec.refined = r.box;
            if (!rec.refined.valid() || !std::isfinite(rec.logit))
                throw NumericalError("non-finite tracker output at frame " + std::to_string(t));
        }
        out.push_back(std::move(rec));
        if (renderer) {
            const BBox b[] = {out.back().refined};
            on_heatmap(t, renderer->push(b));
        }
    }
    return out;
}

}  // namespace surgatt
