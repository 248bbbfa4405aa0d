#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "surgatt/error.hpp"
#include "surgatt/heatmap.hpp"
#include "surgatt/losses.hpp"
#include "surgatt/model.hpp"
#include "surgatt/synth.hpp"
#include "surgatt/tracker.hpp"

namespace surgatt {

/// Everything a command can be configured with.
struct RunConfig {
    HeatmapConfig heatmap;
    LossConfig loss;
    GapDistribution gaps;
    SceneConfig scene;
    ModelConfig model;
    std::uint64_t model_seed = 11;
    TrainConfig train;
    std::size_t train_sequences = 4;
    std::size_t train_frames = 250;
    std::size_t threads = 1;
    InitMode init = InitMode::kConfTop1;
    double err_threshold = 15.0;  // px, Top-K MinErr match
    double iou_threshold = 0.5;   // Top-K MaxIoU match

    void validate() const
    {
        heatmap.validate();
        loss.validate();
        gaps.validate();
        scene.validate();
        if (model.n_heads == 0 || model.d_k == 0 || model.hidden == 0 || model.features.d_emb == 0 ||
            model.features.pool < 1)
            throw ConfigError("model dimensions must be positive");
        if (!(model.d_max_fraction > 0.0)) throw ConfigError("model.d_max_fraction must be > 0");
        if (!(train.lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
        if (train.batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
        if (threads == 0) throw ConfigError("run.threads must be >= 1");
    }

    /// Applies a --seed override to every random stream.
    void reseed(std::uint64_t seed)
    {
        scene.seed = seed;
        model_seed = seed;
        train.seed = seed;
    }
};

namespace detail {

inline std::string format_number(double v)
{
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

template <typename T>
T parse_number(std::string_view s, const std::string& key)
{
    T v{};
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || end != s.data() + s.size()) throw ConfigError("bad value for " + key + ": '" + std::string(s) + "'");
    return v;
}

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
std::string join(const std::vector<T>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        if constexpr (std::is_floating_point_v<T>)
            out += format_number(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

template <typename T>
std::vector<T> split(std::string_view s, const std::string& key)
{
    std::vector<T> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto comma = s.find(',', start);
        const auto piece = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
        out.push_back(parse_number<T>(piece, key));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

struct Field {
    std::string section;
    std::string key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, std::string_view)> set;
};

template <typename T, typename Acc>
Field number(std::string section, std::string key, Acc acc)
{
    const std::string full = section + "." + key;
    return {section, key,
            [acc](const RunConfig& c) {
                const T v = acc(c);
                if constexpr (std::is_floating_point_v<T>)
                    return format_number(v);
                else
                    return std::to_string(v);
            },
            [acc, full](RunConfig& c, std::string_view s) { acc(c) = parse_number<T>(s, full); }};
}

template <typename E, typename Acc>
Field choice(std::string section, std::string key, Acc acc, std::vector<std::pair<std::string, E>> names)
{
    const std::string full = section + "." + key;
    return {section, key,
            [acc, names](const RunConfig& c) {
                const E v = acc(c);
                for (const auto& [n, e] : names)
                    if (e == v) return n;
                return std::string("?");
            },
            [acc, names, full](RunConfig& c, std::string_view s) {
                for (const auto& [n, e] : names)
                    if (n == s) {
                        acc(c) = e;
                        return;
                    }
                throw ConfigError("bad value for " + full + ": '" + std::string(s) + "'");
            }};
}

template <typename T, typename Acc>
Field list(std::string section, std::string key, Acc acc)
{
    const std::string full = section + "." + key;
    return {section, key, [acc](const RunConfig& c) { return join(acc(c)); },
            [acc, full](RunConfig& c, std::string_view s) { acc(c) = split<T>(s, full); }};
}

#define SURGATT_REF(expr) [](auto& c) -> auto& { return expr; }

inline const std::vector<Field>& fields()
{
    static const std::vector<Field> all = [] {
        std::vector<Field> f;
        f.push_back(number<std::size_t>("run", "threads", SURGATT_REF(c.threads)));
        f.push_back(choice<InitMode>("run", "init", SURGATT_REF(c.init),
                                     {{"conf", InitMode::kConfTop1}, {"gt", InitMode::kGroundTruth}}));
        f.push_back(number<double>("run", "err_threshold", SURGATT_REF(c.err_threshold)));
        f.push_back(number<double>("run", "iou_threshold", SURGATT_REF(c.iou_threshold)));

        f.push_back(number<int>("heatmap", "width", SURGATT_REF(c.heatmap.out_w)));
        f.push_back(number<int>("heatmap", "height", SURGATT_REF(c.heatmap.out_h)));
        f.push_back(number<double>("heatmap", "alpha", SURGATT_REF(c.heatmap.alpha)));
        f.push_back(number<double>("heatmap", "scale", SURGATT_REF(c.heatmap.scale)));
        f.push_back(number<int>("heatmap", "smooth_k", SURGATT_REF(c.heatmap.smooth_k)));
        f.push_back(number<double>("heatmap", "percentile", SURGATT_REF(c.heatmap.percentile)));
        f.push_back(choice<AreaCompensation>("heatmap", "area_comp", SURGATT_REF(c.heatmap.area_comp),
                                             {{"sqrt", AreaCompensation::kSqrt}, {"none", AreaCompensation::kNone}}));
        f.push_back(number<double>("heatmap", "inflation", SURGATT_REF(c.heatmap.inflation)));

        f.push_back(number<double>("loss", "tau", SURGATT_REF(c.loss.tau)));
        f.push_back(number<double>("loss", "sigma_rank", SURGATT_REF(c.loss.sigma_rank)));
        f.push_back(number<std::size_t>("loss", "top_m", SURGATT_REF(c.loss.top_m)));
        f.push_back(number<double>("loss", "lambda_geo", SURGATT_REF(c.loss.lambda_geo)));
        f.push_back(number<double>("loss", "lambda_rank", SURGATT_REF(c.loss.lambda_rank)));
        f.push_back(number<double>("loss", "lambda_dist", SURGATT_REF(c.loss.lambda_dist)));
        f.push_back(number<double>("loss", "huber_delta", SURGATT_REF(c.loss.huber_delta)));

        f.push_back(list<std::size_t>("gaps", "values", SURGATT_REF(c.gaps.gaps)));
        f.push_back(list<double>("gaps", "probs", SURGATT_REF(c.gaps.probs)));

        f.push_back(number<std::uint64_t>("scene", "seed", SURGATT_REF(c.scene.seed)));
        f.push_back(number<std::size_t>("scene", "frames", SURGATT_REF(c.scene.n_frames)));
        f.push_back(number<int>("scene", "width", SURGATT_REF(c.scene.dims.width)));
        f.push_back(number<int>("scene", "height", SURGATT_REF(c.scene.dims.height)));
        f.push_back(choice<MotionModel>("scene", "motion", SURGATT_REF(c.scene.motion),
                                        {{"linear", MotionModel::kLinear},
                                         {"random-walk", MotionModel::kRandomWalk},
                                         {"teleport", MotionModel::kTeleport}}));
        f.push_back(number<double>("scene", "speed", SURGATT_REF(c.scene.speed)));
        f.push_back(number<double>("scene", "teleport_prob", SURGATT_REF(c.scene.teleport_prob)));
        f.push_back(number<double>("scene", "min_size", SURGATT_REF(c.scene.min_size)));
        f.push_back(number<double>("scene", "max_size", SURGATT_REF(c.scene.max_size)));
        f.push_back(number<std::size_t>("scene", "distractors", SURGATT_REF(c.scene.n_distractors)));
        f.push_back(number<std::size_t>("scene", "near_misses", SURGATT_REF(c.scene.n_near_misses)));
        f.push_back(number<double>("scene", "center_jitter", SURGATT_REF(c.scene.center_jitter)));
        f.push_back(number<double>("scene", "size_jitter", SURGATT_REF(c.scene.size_jitter)));
        f.push_back(number<double>("scene", "corruption", SURGATT_REF(c.scene.corruption)));
        f.push_back(number<double>("scene", "recall_floor", SURGATT_REF(c.scene.recall_floor)));
        f.push_back(number<double>("scene", "occlusion_prob", SURGATT_REF(c.scene.occlusion_prob)));
        f.push_back(number<double>("scene", "render_noise", SURGATT_REF(c.scene.render_noise)));
        f.push_back(number<std::size_t>("scene", "k", SURGATT_REF(c.scene.K)));

        f.push_back(number<std::uint64_t>("model", "seed", SURGATT_REF(c.model_seed)));
        f.push_back(number<std::size_t>("model", "heads", SURGATT_REF(c.model.n_heads)));
        f.push_back(number<std::size_t>("model", "d_k", SURGATT_REF(c.model.d_k)));
        f.push_back(number<std::size_t>("model", "hidden", SURGATT_REF(c.model.hidden)));
        f.push_back(number<double>("model", "d_max_fraction", SURGATT_REF(c.model.d_max_fraction)));
        f.push_back(number<int>("model", "pool", SURGATT_REF(c.model.features.pool)));
        f.push_back(number<std::size_t>("model", "d_emb", SURGATT_REF(c.model.features.d_emb)));
        f.push_back(number<double>("model", "posenc_scale", SURGATT_REF(c.model.features.posenc_scale)));

        f.push_back(number<std::uint64_t>("train", "seed", SURGATT_REF(c.train.seed)));
        f.push_back(number<std::size_t>("train", "epochs", SURGATT_REF(c.train.epochs)));
        f.push_back(number<double>("train", "lr", SURGATT_REF(c.train.lr)));
        f.push_back(choice<OptimizerKind>("train", "optimizer", SURGATT_REF(c.train.optimizer),
                                          {{"sgd", OptimizerKind::kSgdMomentum}, {"adamw", OptimizerKind::kAdamW}}));
        f.push_back(number<double>("train", "momentum", SURGATT_REF(c.train.momentum)));
        f.push_back(number<double>("train", "beta1", SURGATT_REF(c.train.beta1)));
        f.push_back(number<double>("train", "beta2", SURGATT_REF(c.train.beta2)));
        f.push_back(number<double>("train", "eps", SURGATT_REF(c.train.adam_eps)));
        f.push_back(number<double>("train", "weight_decay", SURGATT_REF(c.train.weight_decay)));
        f.push_back(number<std::size_t>("train", "batch_size", SURGATT_REF(c.train.batch_size)));
        f.push_back(number<double>("train", "grad_clip", SURGATT_REF(c.train.grad_clip)));
        f.push_back(number<double>("train", "proj_lr_scale", SURGATT_REF(c.train.proj_lr_scale)));
        f.push_back(number<std::size_t>("train", "sequences", SURGATT_REF(c.train_sequences)));
        f.push_back(number<std::size_t>("train", "frames", SURGATT_REF(c.train_frames)));
        return f;
    }();
    return all;
}

#undef SURGATT_REF

}  // namespace detail

/// Parses `[section]` headers and `key = value` lines; `#` starts a comment.
/// Unknown sections or keys and repeated keys are errors.
inline RunConfig parse_config(std::istream& in, RunConfig cfg = {}, const std::string& source = "<config>")
{
    std::string line, section;
    std::vector<std::string> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string s = detail::trim(line);
        if (s.empty()) continue;
        const auto where = source + ":" + std::to_string(lineno) + ": ";
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(where + "malformed section header");
            section = detail::trim(std::string_view(s).substr(1, s.size() - 2));
            bool known = false;
            for (const auto& f : detail::fields()) known = known || f.section == section;
            if (!known) throw ConfigError(where + "unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(where + "expected key = value");
        const std::string key = detail::trim(std::string_view(s).substr(0, eq));
        const std::string value = detail::trim(std::string_view(s).substr(eq + 1));
        if (section.empty()) throw ConfigError(where + "key '" + key + "' outside a section");
        const std::string full = section + "." + key;
        if (std::find(seen.begin(), seen.end(), full) != seen.end()) throw ConfigError(where + "duplicate key " + full);
        seen.push_back(full);
        const detail::Field* field = nullptr;
        for (const auto& f : detail::fields())
            if (f.section == section && f.key == key) field = &f;
        if (!field) throw ConfigError(where + "unknown key " + full);
        try {
            field->set(cfg, value);
        } catch (const ConfigError& e) {
            throw ConfigError(where + e.what());
        }
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

inline RunConfig load_config(const std::string& path, RunConfig base = {})
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    return parse_config(in, std::move(base), path);
}

/// Canonical form: every key, fixed section and key order, shortest
/// round-trip number formatting.
inline std::string serialize(const RunConfig& cfg)
{
    std::string out, section;
    for (const auto& f : detail::fields()) {
        if (f.section != section) {
            if (!section.empty()) out += "\n";
            section = f.section;
            out += "[" + section + "]\n";
        }
        out += f.key + " = " + f.get(cfg) + "\n";
    }
    return out;
}

/// FNV-1a over the canonical form; identifies a config in manifests.
inline std::uint64_t config_hash(const RunConfig& cfg)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : serialize(cfg)) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace surgatt
