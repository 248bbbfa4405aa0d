#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "surgatt/surgatt.hpp"

namespace fs = std::filesystem;
using namespace surgatt;

int main(int argc, char** argv)
{
    CLI::App app{"surgatt: attention heatmaps, proposal reranking and refinement"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::size_t threads = 0;
    app.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "override every seed in the config");
    app.add_option("--out", out, "output directory");
    app.add_option("--threads", threads, "worker threads for evaluation");

    auto* gen = app.add_subcommand("gen-heatmaps", "render GT heatmaps from a YOLO label directory");
    std::string labels_dir, format = "png";
    gen->add_option("labels", labels_dir, "label directory")->required();
    gen->add_option("--format", format, "png, raw or both")->check(CLI::IsMember({"png", "raw", "both"}));

    auto* eval = app.add_subcommand("eval", "score predicted heatmaps against GT heatmaps");
    std::string pred_dir, gt_dir;
    eval->add_option("pred", pred_dir, "predicted heatmaps")->required();
    eval->add_option("gt", gt_dir, "ground-truth heatmaps")->required();

    std::string params_dir;
    auto* oracle = app.add_subcommand("oracle-table", "selection rules and tracker variants on the benchmark scene");
    oracle->add_option("--params", params_dir, "trained parameters; trains per config when absent");
    auto* topk = app.add_subcommand("topk", "recall@k under confidence and rerank order");
    topk->add_option("--params", params_dir, "trained parameters; trains per config when absent");

    auto* train_cmd = app.add_subcommand("train", "train the rerank and refine heads");
    std::vector<std::string> seq_dirs;
    train_cmd->add_option("sequences", seq_dirs, "sequence directories; synthetic scenes when absent");

    auto* track_cmd = app.add_subcommand("track", "run online tracking on a sequence directory");
    std::string seq_dir;
    bool no_heatmaps = false;
    track_cmd->add_option("sequence", seq_dir, "sequence directory")->required();
    track_cmd->add_option("--params", params_dir, "trained parameters")->required();
    track_cmd->add_flag("--no-heatmaps", no_heatmaps, "skip heatmap rendering");

    auto* simulate = app.add_subcommand("simulate", "write a synthetic sequence directory");

    auto* grad = app.add_subcommand("grad-check", "finite-difference check of every loss and backward pass");
    std::size_t instances = 50;
    grad->add_option("--instances", instances, "seeded instances per target");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? int(ExitCode::kOk) : int(ExitCode::kUsage);
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (seed) cfg.reseed(*seed);
        if (threads > 0) cfg.threads = threads;
        cfg.validate();
        const fs::path out_dir(out);
        const std::optional<fs::path> params =
            params_dir.empty() ? std::nullopt : std::optional<fs::path>(fs::path(params_dir));

        if (*gen) {
            const auto fmt = format == "raw" ? HeatmapFormat::kRaw : format == "both" ? HeatmapFormat::kBoth : HeatmapFormat::kPng;
            const auto files = cmd_gen_heatmaps(labels_dir, cfg, out_dir, fmt);
            std::cout << "wrote " << files.size() << " heatmap files to " << out_dir.string() << "\n";
        } else if (*eval) {
            for (const auto& r : cmd_eval(pred_dir, gt_dir, cfg, out_dir / "metrics.csv"))
                std::cout << to_csv_row(r.sequence_id, r.report) << "\n";
        } else if (*oracle) {
            cmd_oracle_table(cfg, params, out_dir, &std::cout);
        } else if (*topk) {
            for (const auto& p : cmd_topk(cfg, params, out_dir, &std::cout))
                std::cout << p.order << " " << p.rule << " k=" << p.k << " " << p.recall << "\n";
        } else if (*train_cmd) {
            std::vector<fs::path> dirs(seq_dirs.begin(), seq_dirs.end());
            cmd_train(dirs, cfg, out_dir, &std::cout);
        } else if (*track_cmd) {
            const auto recs = cmd_track(seq_dir, *params, cfg, out_dir, !no_heatmaps);
            std::cout << "tracked " << recs.size() << " frames\n";
        } else if (*simulate) {
            cmd_simulate(cfg, out_dir);
            std::cout << "wrote " << cfg.scene.n_frames << " frames to " << out_dir.string() << "\n";
        } else if (*grad) {
            if (!cmd_grad_check(instances, seed.value_or(1), out_dir, &std::cout)) return int(ExitCode::kNumericalFailure);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return int(e.exit_code());
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return int(ExitCode::kDataError);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return int(ExitCode::kDataError);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return int(ExitCode::kDataError);
    }
    return int(ExitCode::kOk);
}
