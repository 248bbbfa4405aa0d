#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgatt/benchmark.hpp"
#include "surgatt/config.hpp"
#include "surgatt/error.hpp"
#include "surgatt/gradsuite.hpp"
#include "surgatt/heatmap.hpp"
#include "surgatt/io.hpp"
#include "surgatt/metrics.hpp"
#include "surgatt/synth.hpp"
#include "surgatt/tracker.hpp"

namespace surgatt {

enum class HeatmapFormat { kPng, kRaw, kBoth };

namespace detail {

inline std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    return out;
}

inline void write_heatmap_files(const fs::path& dir, const std::string& stem, const Heatmap& h, HeatmapFormat fmt,
                                nlohmann::json& outputs)
{
    if (fmt != HeatmapFormat::kRaw) {
        write_heatmap_png(dir / (stem + ".png"), h);
        outputs.push_back(stem + ".png");
    }
    if (fmt != HeatmapFormat::kPng) {
        write_heatmap_raw(dir / (stem + ".f32"), h);
        outputs.push_back(stem + ".f32");
    }
}

inline std::string fixed(double v, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace detail

inline BenchmarkConfig benchmark_config(const RunConfig& cfg)
{
    BenchmarkConfig b;
    b.scene = cfg.scene;
    b.train_sequences = cfg.train_sequences;
    b.train_frames = cfg.train_frames;
    b.train = cfg.train;
    b.model = cfg.model;
    b.loss = cfg.loss;
    b.gaps = cfg.gaps;
    b.heatmap = cfg.heatmap;
    b.model_seed = cfg.model_seed;
    return b;
}

// ---------------------------------------------------------------------------
// gen-heatmaps
// ---------------------------------------------------------------------------

/// One heatmap per label file plus manifest.json (outputs, config hash).
inline std::vector<std::string> cmd_gen_heatmaps(const fs::path& labels_dir, const RunConfig& cfg, const fs::path& out,
                                                 HeatmapFormat fmt = HeatmapFormat::kPng)
{
    cfg.heatmap.validate();
    const auto labels = parse_labels(labels_dir);
    const auto maps = generate_sequence(to_box_sequence(labels, cfg.heatmap.dims()), cfg.heatmap);
    fs::create_directories(out);
    nlohmann::json outputs = nlohmann::json::array();
    for (std::size_t t = 0; t < maps.size(); ++t) detail::write_heatmap_files(out, labels[t].stem, maps[t], fmt, outputs);
    const nlohmann::json manifest = {{"config_hash", hex64(config_hash(cfg))},
                                     {"width", cfg.heatmap.out_w},
                                     {"height", cfg.heatmap.out_h},
                                     {"outputs", outputs}};
    detail::open_out(out / "manifest.json") << manifest.dump(2) << "\n";
    return outputs.get<std::vector<std::string>>();
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

inline std::vector<Heatmap> load_heatmaps(const fs::path& dir)
{
    auto files = list_files(dir, {".png"});
    if (files.empty()) files = list_files(dir, {".f32"});
    std::vector<Heatmap> out;
    for (const auto& f : files) {
        out.push_back(read_heatmap(f));
        for (double v : out.back().values())
            if (!std::isfinite(v)) throw NumericalError("non-finite heatmap value in " + f.string());
    }
    return out;
}

struct EvalRow {
    std::string sequence_id;
    MetricReport report;
};

/// A directory of heatmaps is one sequence; a directory of directories is
/// one sequence per subdirectory (matched by name against gt_dir). The last
/// row, "all", averages over every frame.
inline std::vector<EvalRow> cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir, const RunConfig& cfg,
                                     const fs::path& out_csv)
{
    std::vector<std::string> seqs;
    for (const auto& e : fs::directory_iterator(pred_dir))
        if (e.is_directory()) seqs.push_back(e.path().filename().string());
    std::sort(seqs.begin(), seqs.end());

    std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> jobs;
    if (seqs.empty()) {
        jobs.push_back({pred_dir.filename().string(), {pred_dir, gt_dir}});
    } else {
        for (const auto& s : seqs) {
            if (!fs::is_directory(gt_dir / s)) throw SequenceMismatch("no ground-truth sequence named " + s);
            jobs.push_back({s, {pred_dir / s, gt_dir / s}});
        }
    }

    std::vector<EvalRow> rows;
    MetricReport all;
    for (const auto& [id, dirs] : jobs) {
        const auto preds = load_heatmaps(dirs.first);
        const auto gts = load_heatmaps(dirs.second);
        const MetricReport r = evaluate_sequence(preds, gts, unsigned(cfg.threads));
        for (double v : {r.nss, r.cc, r.sim, r.mse, r.mae})
            if (!std::isfinite(v)) throw NumericalError("non-finite metric for sequence " + id);
        rows.push_back({id, r});
        const double n = double(r.n_frames);
        all.nss += n * r.nss;
        all.cc += n * r.cc;
        all.sim += n * r.sim;
        all.mse += n * r.mse;
        all.mae += n * r.mae;
        all.n_frames += r.n_frames;
    }
    if (all.n_frames > 0) {
        const double n = double(all.n_frames);
        all.nss /= n;
        all.cc /= n;
        all.sim /= n;
        all.mse /= n;
        all.mae /= n;
    }
    rows.push_back({"all", all});

    auto out = detail::open_out(out_csv);
    out << metric_csv_header() << "\n";
    for (const auto& r : rows) out << to_csv_row(r.sequence_id, r.report) << "\n";
    return rows;
}

// ---------------------------------------------------------------------------
// simulate / train / track
// ---------------------------------------------------------------------------

inline void cmd_simulate(const RunConfig& cfg, const fs::path& out)
{
    cfg.scene.validate();
    save_sequence(out, generate(cfg.scene), hex64(config_hash(cfg)));
}

inline void write_loss_curve(const fs::path& path, const std::vector<EpochStats>& curve)
{
    auto out = detail::open_out(path);
    out << "epoch,ce,geo,rank,dist,scale,rerank_total,refine_total,total,steps,skipped,selection_accuracy\n";
    for (const auto& s : curve) {
        const LossBundle& m = s.mean;
        out << s.epoch;
        for (double v : {m.ce, m.geo, m.rank, m.dist, m.scale, m.rerank_total, m.refine_total, m.total})
            out << "," << detail::fixed(v, 9);
        out << "," << s.steps << "," << s.skipped << "," << detail::fixed(s.selection_accuracy) << "\n";
    }
}

/// Trains on the given sequence directories, or on `train.sequences`
/// synthetic scenes when none are given. Writes params.bin, params.json and
/// loss_curve.csv.
inline TrainResult cmd_train(const std::vector<fs::path>& seq_dirs, const RunConfig& cfg, const fs::path& out,
                             std::ostream* log = nullptr)
{
    cfg.validate();
    std::vector<TrackData> data;
    if (seq_dirs.empty()) {
        data = benchmark_training_set(benchmark_config(cfg));
    } else {
        for (const auto& d : seq_dirs) {
            LoadedSequence s = load_sequence(d);
            if (s.data.gt.size() != s.data.size()) throw Error("training sequence " + d.string() + " lacks labels");
            data.push_back(std::move(s.data));
        }
    }
    TrainResult res = train(data, TrackerParams::init(cfg.model, cfg.model_seed), cfg.train, cfg.model, cfg.loss, cfg.gaps,
                            [&](const EpochStats& s) {
                                if (log)
                                    *log << "epoch " << s.epoch << " total " << detail::fixed(s.mean.total) << " rerank "
                                         << detail::fixed(s.mean.rerank_total) << " refine "
                                         << detail::fixed(s.mean.refine_total) << " acc "
                                         << detail::fixed(s.selection_accuracy, 3) << "\n";
                            });
    save_params(out, res.params, cfg.model);
    write_loss_curve(out / "loss_curve.csv", res.curve);
    return res;
}

/// Box in frame pixels to heatmap pixels.
inline BBox rescale(const BBox& b, const FrameDims& from, const FrameDims& to)
{
    const double sx = double(to.width) / from.width;
    const double sy = double(to.height) / from.height;
    return {b.cx * sx, b.cy * sy, b.w * sx, b.h * sy};
}

/// tracking.csv (t,cx,cy,w,h,selected_k,logit) with the refined box per
/// frame, and heatmaps/<frame>.png rendered from it when `heatmaps` is set.
inline std::vector<TrackRecord> cmd_track(const fs::path& seq_dir, const fs::path& params_dir, const RunConfig& cfg,
                                          const fs::path& out, bool heatmaps = true)
{
    cfg.heatmap.validate();
    const LoadedSequence seq = load_sequence(seq_dir);
    const LoadedParams lp = load_params(params_dir);
    const auto records = track(seq.data, lp.params, lp.model, cfg.init);

    auto csv = detail::open_out(out / "tracking.csv");
    csv << "t,cx,cy,w,h,selected_k,logit\n";
    for (const auto& r : records)
        csv << r.t << "," << detail::fixed(r.refined.cx, 4) << "," << detail::fixed(r.refined.cy, 4) << ","
            << detail::fixed(r.refined.w, 4) << "," << detail::fixed(r.refined.h, 4) << "," << r.selected_k << ","
            << detail::fixed(r.logit) << "\n";

    if (heatmaps) {
        const fs::path hdir = out / "heatmaps";
        fs::create_directories(hdir);
        Heatmap state(cfg.heatmap.out_w, cfg.heatmap.out_h);
        for (std::size_t t = 0; t < records.size(); ++t) {
            auto [h, next] = render_inference(rescale(records[t].refined, seq.data.dims, cfg.heatmap.dims()), state,
                                              cfg.heatmap);
            write_heatmap_png(hdir / (seq.stems[t] + ".png"), h);
            state = std::move(next);
        }
    }
    return records;
}

// ---------------------------------------------------------------------------
// oracle-table / topk
// ---------------------------------------------------------------------------

/// Trains per the config (or loads `params_dir`) and evaluates the
/// benchmark scene.
inline BenchmarkResult benchmark_from_config(const RunConfig& cfg, const std::optional<fs::path>& params_dir,
                                             std::ostream* log = nullptr)
{
    cfg.validate();
    const BenchmarkConfig b = benchmark_config(cfg);
    if (params_dir) return evaluate_benchmark(b, load_params(*params_dir).params);
    return run_benchmark(b, [&](const EpochStats& s) {
        if (log) *log << "epoch " << s.epoch << " total " << detail::fixed(s.mean.total) << "\n";
    });
}

inline void write_oracle_table(const fs::path& path, const OracleTable& table)
{
    auto out = detail::open_out(path);
    out << "variant,err,iou,nss,cc,sim,mse,mae\n";
    for (const auto& r : table.rows)
        out << r.name << "," << detail::fixed(r.err) << "," << detail::fixed(r.iou) << "," << detail::fixed(r.heat.nss)
            << "," << detail::fixed(r.heat.cc) << "," << detail::fixed(r.heat.sim) << "," << detail::fixed(r.heat.mse)
            << "," << detail::fixed(r.heat.mae) << "\n";
}

inline void print_oracle_table(std::ostream& os, const OracleTable& table)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %9s %7s %7s %7s %8s\n", "variant", "err(px)", "IoU", "NSS", "CC", "MAE");
    os << buf;
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof buf, "%-12s %9.3f %7.4f %7.3f %7.3f %8.5f\n", r.name.c_str(), r.err, r.iou, r.heat.nss,
                      r.heat.cc, r.heat.mae);
        os << buf;
    }
}

inline OracleTable cmd_oracle_table(const RunConfig& cfg, const std::optional<fs::path>& params_dir, const fs::path& out,
                                    std::ostream* log = nullptr)
{
    const BenchmarkResult res = benchmark_from_config(cfg, params_dir, log);
    write_oracle_table(out / "oracle_table.csv", res.table);
    if (log) print_oracle_table(*log, res.table);
    return res.table;
}

inline std::vector<RecallPoint> cmd_topk(const RunConfig& cfg, const std::optional<fs::path>& params_dir,
                                         const fs::path& out, std::ostream* log = nullptr)
{
    const BenchmarkResult res = benchmark_from_config(cfg, params_dir, log);
    const auto curves = topk_curves(res.eval_data, res.tracked, cfg.scene.K, cfg.err_threshold, cfg.iou_threshold);
    auto csv = detail::open_out(out / "topk.csv");
    csv << "order,rule,k,recall\n";
    for (const auto& p : curves) csv << p.order << "," << p.rule << "," << p.k << "," << detail::fixed(p.recall) << "\n";
    return curves;
}

// ---------------------------------------------------------------------------
// grad-check
// ---------------------------------------------------------------------------

inline constexpr double kGradTolerance = 1e-4;

/// Returns true when every row is under kGradTolerance.
inline bool cmd_grad_check(std::size_t instances, std::uint64_t seed, const fs::path& out, std::ostream* log = nullptr)
{
    const auto rows = run_grad_suite(instances, seed);
    auto csv = detail::open_out(out / "grad_check.csv");
    csv << "target,instances,max_rel_error,worst_seed\n";
    bool ok = true;
    for (const auto& r : rows) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.3e", r.max_rel_error);
        csv << r.name << "," << r.instances << "," << buf << "," << r.worst_seed << "\n";
        if (log) *log << r.name << " " << buf << (r.max_rel_error < kGradTolerance ? " ok" : " FAIL") << "\n";
        ok = ok && r.max_rel_error < kGradTolerance;
    }
    return ok;
}

}  // namespace surgatt
