#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "surgatt/geometry.hpp"
#include "surgatt/heatmap.hpp"
#include "surgatt/metrics.hpp"
#include "surgatt/synth.hpp"
#include "surgatt/tracker.hpp"

namespace surgatt {

/// One row of the oracle / ablation table.
struct VariantScore {
    std::string name;
    double err = 0.0;  // mean center error, px
    double iou = 0.0;  // mean IoU with gt
    MetricReport heat;
};

struct OracleTable {
    std::vector<VariantScore> rows;

    const VariantScore& row(const std::string& name) const
    {
        for (const auto& r : rows)
            if (r.name == name) return r;
        throw Error("no variant named " + name);
    }
};

/// Per-frame boxes under a selection rule; empty frames hold the previous box.
inline std::vector<BBox> rule_boxes(const TrackData& data, SelectionRule rule)
{
    std::vector<BBox> out;
    out.reserve(data.size());
    for (std::size_t t = 0; t < data.size(); ++t) {
        if (data.proposals[t].empty()) {
            out.push_back(out.empty() ? frame_center_box(data.dims) : out.back());
            continue;
        }
        out.push_back(select_reference_box(data.proposals[t], data.gt[t], rule).box);
    }
    return out;
}

/// Scores each named box stream against gt: center error, IoU, and heatmap
/// metrics of the rendered stream against the rendered gt.
inline OracleTable score_variants(const TrackData& data, const std::vector<std::pair<std::string, std::vector<BBox>>>& variants,
                                  const HeatmapConfig& hcfg)
{
    if (!(hcfg.dims() == data.dims)) throw ResolutionMismatch("heatmap resolution must match the sequence frames");
    const std::size_t T = data.size();
    HeatmapRenderer gt_render(hcfg);
    std::vector<HeatmapRenderer> renders(variants.size(), HeatmapRenderer(hcfg));
    OracleTable table;
    for (const auto& [name, boxes] : variants) {
        if (boxes.size() != T) throw SequenceMismatch("variant " + name + " has wrong length");
        table.rows.push_back({name, 0.0, 0.0, {}});
    }
    for (std::size_t t = 0; t < T; ++t) {
        const BBox g[] = {data.gt[t]};
        const Heatmap gh = gt_render.push(g);
        for (std::size_t v = 0; v < variants.size(); ++v) {
            const BBox& b = variants[v].second[t];
            const BBox one[] = {b};
            const Heatmap ph = renders[v].push(one);
            const MetricReport m = evaluate_frame(ph, gh);
            auto& row = table.rows[v];
            row.err += center_error(b, data.gt[t]);
            row.iou += iou(b, data.gt[t]);
            row.heat.nss += m.nss;
            row.heat.cc += m.cc;
            row.heat.sim += m.sim;
            row.heat.mse += m.mse;
            row.heat.mae += m.mae;
        }
    }
    for (auto& row : table.rows) {
        const double n = double(std::max<std::size_t>(T, 1));
        row.err /= n;
        row.iou /= n;
        row.heat.nss /= n;
        row.heat.cc /= n;
        row.heat.sim /= n;
        row.heat.mse /= n;
        row.heat.mae /= n;
        row.heat.n_frames = T;
    }
    return table;
}

/// Conf / MinErr / MaxIoU detector-only rows plus rerank-only and full
/// tracker rows.
inline OracleTable oracle_table(const TrackData& data, const std::vector<TrackRecord>& tracked, const HeatmapConfig& hcfg)
{
    std::vector<BBox> rerank, full;
    for (const auto& r : tracked) {
        rerank.push_back(r.selected);
        full.push_back(r.refined);
    }
    return score_variants(data,
                          {{"conf", rule_boxes(data, SelectionRule::kConf)},
                           {"minerr", rule_boxes(data, SelectionRule::kMinErr)},
                           {"maxiou", rule_boxes(data, SelectionRule::kMaxIoU)},
                           {"rerank_only", std::move(rerank)},
                           {"full", std::move(full)}},
                          hcfg);
}

struct RecallPoint {
    std::string order;  // "confidence" or "rerank"
    std::string rule;   // "minerr" or "maxiou"
    std::size_t k = 0;
    double recall = 0.0;
};

/// recall_at_k for k = 1..K under both orderings and both oracle rules.
inline std::vector<RecallPoint> topk_curves(const TrackData& data, const std::vector<TrackRecord>& tracked, std::size_t K,
                                            double err_threshold, double iou_threshold)
{
    std::vector<std::vector<std::size_t>> rerank_rank;
    for (const auto& r : tracked) rerank_rank.push_back(r.ranking);
    std::vector<RecallPoint> out;
    const std::pair<std::string, MatchRule> rules[] = {{"minerr", {MatchKind::kCenterError, err_threshold}},
                                                       {"maxiou", {MatchKind::kIoU, iou_threshold}}};
    for (const auto& [rname, rule] : rules)
        for (std::size_t k = 1; k <= K; ++k) {
            out.push_back({"confidence", rname, k, recall_at_k(data.proposals, data.gt, k, rule)});
            out.push_back({"rerank", rname, k, recall_at_k(data.proposals, data.gt, k, rule, &rerank_rank)});
        }
    return out;
}

/// Synthetic benchmark: train on `train_sequences` scenes drawn with seeds
/// derived from the benchmark seed, then track the held-out benchmark scene.
/// The defaults are the benchmark protocol: 500 evaluated frames at
/// corruption 0.5 and K = 10, ten AdamW epochs with the phi_s projections
/// held at their initialization and the center term up-weighted.
struct BenchmarkConfig {
    SceneConfig scene = benchmark_scene();  // the evaluated sequence
    std::size_t train_sequences = 4;
    std::size_t train_frames = 250;
    TrainConfig train = benchmark_training();
    ModelConfig model;
    LossConfig loss = benchmark_loss();
    GapDistribution gaps;
    HeatmapConfig heatmap;
    std::uint64_t model_seed = 11;

    static SceneConfig benchmark_scene()
    {
        SceneConfig s;
        s.seed = 2024;
        s.n_frames = 500;
        s.corruption = 0.5;
        s.K = 10;
        return s;
    }
    static TrainConfig benchmark_training()
    {
        TrainConfig t;
        t.optimizer = OptimizerKind::kAdamW;
        t.lr = 1e-3;
        t.epochs = 10;
        t.batch_size = 8;
        t.proj_lr_scale = 0.0;
        return t;
    }
    static LossConfig benchmark_loss()
    {
        LossConfig l;
        l.lambda_dist = 100.0;
        return l;
    }
};

struct BenchmarkResult {
    TrainResult trained;
    TrackData eval_data;
    std::vector<TrackRecord> tracked;
    OracleTable table;
};

inline SceneConfig training_scene(const SceneConfig& base, std::size_t i, std::size_t frames)
{
    SceneConfig s = base;
    s.seed = base.seed * 1000003ULL + 17ULL * (i + 1);
    s.n_frames = frames;
    return s;
}

inline std::vector<TrackData> benchmark_training_set(const BenchmarkConfig& cfg)
{
    std::vector<TrackData> out;
    for (std::size_t i = 0; i < cfg.train_sequences; ++i)
        out.push_back(prepare(generate(training_scene(cfg.scene, i, cfg.train_frames))));
    return out;
}

/// Tracks the benchmark scene with `params` and fills the oracle table.
inline BenchmarkResult evaluate_benchmark(const BenchmarkConfig& cfg, const TrackerParams& params)
{
    BenchmarkResult res;
    res.trained.params = params;
    res.eval_data = prepare(generate(cfg.scene));
    res.tracked = track(res.eval_data, params, cfg.model);
    HeatmapConfig h = cfg.heatmap;
    h.out_w = cfg.scene.dims.width;
    h.out_h = cfg.scene.dims.height;
    res.table = oracle_table(res.eval_data, res.tracked, h);
    return res;
}

inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {})
{
    const auto train_data = benchmark_training_set(cfg);
    TrainResult trained = train(train_data, TrackerParams::init(cfg.model, cfg.model_seed), cfg.train, cfg.model,
                                cfg.loss, cfg.gaps, on_epoch);
    BenchmarkResult res = evaluate_benchmark(cfg, trained.params);
    res.trained = std::move(trained);
    return res;
}

}  // namespace surgatt
