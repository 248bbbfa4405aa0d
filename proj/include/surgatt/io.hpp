#pragma once

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "surgatt/error.hpp"
#include "surgatt/features.hpp"
#include "surgatt/geometry.hpp"
#include "surgatt/heatmap.hpp"
#include "surgatt/model.hpp"
#include "surgatt/synth.hpp"
#include "surgatt/tracker.hpp"

namespace surgatt {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// YOLO label and proposal files
// ---------------------------------------------------------------------------

struct LabelRecord {
    int class_id = 0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;  // normalized

    bool operator==(const LabelRecord&) const = default;
};

/// One proposal line: class cx cy w h confidence, normalized like YOLO
/// predictions saved with confidences.
struct ProposalRecord {
    int class_id = 0;
    double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
    double confidence = 0.0;
};

namespace detail {

inline std::vector<std::string> tokens(const std::string& line)
{
    std::istringstream in(line);
    std::vector<std::string> out;
    for (std::string t; in >> t;) out.push_back(t);
    return out;
}

template <typename T>
T token_value(const std::string& tok, const std::string& file, std::size_t line)
{
    T v{};
    const auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || end != tok.data() + tok.size())
        throw ParseError(file, line, "non-numeric token '" + tok + "'");
    if constexpr (std::is_floating_point_v<T>)
        if (!std::isfinite(v)) throw ParseError(file, line, "non-finite value '" + tok + "'");
    return v;
}

inline std::vector<std::string> read_lines(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    std::vector<std::string> lines;
    for (std::string l; std::getline(in, l);) lines.push_back(l);
    return lines;
}

}  // namespace detail

inline LabelRecord parse_label_line(const std::string& line, const std::string& file = "<line>", std::size_t lineno = 1)
{
    const auto tok = detail::tokens(line);
    if (tok.size() != 5) throw ParseError(file, lineno, "expected 5 fields, got " + std::to_string(tok.size()));
    LabelRecord r;
    r.class_id = detail::token_value<int>(tok[0], file, lineno);
    r.cx = detail::token_value<double>(tok[1], file, lineno);
    r.cy = detail::token_value<double>(tok[2], file, lineno);
    r.w = detail::token_value<double>(tok[3], file, lineno);
    r.h = detail::token_value<double>(tok[4], file, lineno);
    const char* names[] = {"cx", "cy", "w", "h"};
    const double vals[] = {r.cx, r.cy, r.w, r.h};
    for (int i = 0; i < 4; ++i)
        if (vals[i] < 0.0 || vals[i] > 1.0) throw ParseError(file, lineno, std::string(names[i]) + " out of range [0,1]");
    if (r.w <= 0.0 || r.h <= 0.0) throw ParseError(file, lineno, "w and h must be > 0");
    return r;
}

/// Blank lines are skipped; an empty file is a frame without annotation.
inline std::vector<LabelRecord> parse_label_file(const fs::path& path)
{
    std::vector<LabelRecord> out;
    const auto lines = detail::read_lines(path);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (detail::tokens(lines[i]).empty()) continue;
        out.push_back(parse_label_line(lines[i], path.string(), i + 1));
    }
    return out;
}

inline std::vector<ProposalRecord> parse_proposal_file(const fs::path& path)
{
    std::vector<ProposalRecord> out;
    const auto lines = detail::read_lines(path);
    const std::string file = path.string();
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto tok = detail::tokens(lines[i]);
        if (tok.empty()) continue;
        if (tok.size() != 6) throw ParseError(file, i + 1, "expected 6 fields, got " + std::to_string(tok.size()));
        ProposalRecord r;
        r.class_id = detail::token_value<int>(tok[0], file, i + 1);
        r.cx = detail::token_value<double>(tok[1], file, i + 1);
        r.cy = detail::token_value<double>(tok[2], file, i + 1);
        r.w = detail::token_value<double>(tok[3], file, i + 1);
        r.h = detail::token_value<double>(tok[4], file, i + 1);
        r.confidence = detail::token_value<double>(tok[5], file, i + 1);
        if (r.w <= 0.0 || r.h <= 0.0) throw ParseError(file, i + 1, "w and h must be > 0");
        if (r.confidence < 0.0 || r.confidence > 1.0) throw ParseError(file, i + 1, "confidence out of range [0,1]");
        out.push_back(r);
    }
    return out;
}

inline BBox to_pixels(const LabelRecord& r, const FrameDims& dims)
{
    return {r.cx * dims.width, r.cy * dims.height, r.w * dims.width, r.h * dims.height};
}

inline BBox to_pixels(const ProposalRecord& r, const FrameDims& dims)
{
    return {r.cx * dims.width, r.cy * dims.height, r.w * dims.width, r.h * dims.height};
}

/// Normalizes and clips to [0,1] so the record parses back.
inline LabelRecord to_label(const BBox& b, const FrameDims& dims, int class_id = 0)
{
    const auto c01 = [](double v) { return std::clamp(v, 0.0, 1.0); };
    return {class_id, c01(b.cx / dims.width), c01(b.cy / dims.height), c01(b.w / dims.width), c01(b.h / dims.height)};
}

inline void write_label_file(const fs::path& path, const std::vector<LabelRecord>& records)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[160];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%d %.6f %.6f %.6f %.6f\n", r.class_id, r.cx, r.cy, r.w, r.h);
        out << buf;
    }
}

inline void write_proposal_file(const fs::path& path, const ProposalSet& set, const FrameDims& dims)
{
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    char buf[200];
    for (const auto& p : set.entries) {
        std::snprintf(buf, sizeof buf, "0 %.6f %.6f %.6f %.6f %.6f\n", p.box.cx / dims.width, p.box.cy / dims.height,
                      p.box.w / dims.width, p.box.h / dims.height, p.confidence);
        out << buf;
    }
}

/// Regular files with one of `exts`, sorted by file name.
inline std::vector<fs::path> list_files(const fs::path& dir, std::initializer_list<const char*> exts)
{
    if (!fs::is_directory(dir)) throw Error("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        const auto ext = e.path().extension().string();
        for (const char* x : exts)
            if (ext == x) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    return out;
}

struct LabeledFrame {
    std::string stem;
    std::vector<LabelRecord> records;
};

/// One `.txt` file per frame, frame order by file name.
inline std::vector<LabeledFrame> parse_labels(const fs::path& dir)
{
    std::vector<LabeledFrame> out;
    for (const auto& p : list_files(dir, {".txt"})) out.push_back({p.stem().string(), parse_label_file(p)});
    return out;
}

inline BoxSequence to_box_sequence(const std::vector<LabeledFrame>& frames, const FrameDims& dims)
{
    BoxSequence seq;
    seq.dims = dims;
    for (const auto& f : frames) {
        std::vector<BBox> boxes;
        for (const auto& r : f.records) boxes.push_back(to_pixels(r, dims));
        seq.frames.push_back(std::move(boxes));
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Images
// ---------------------------------------------------------------------------

struct Image8 {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;  // row-major, interleaved
};

inline void write_png(const fs::path& path, const Image8& img)
{
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!fp) throw Error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw Error("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    const int type = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : img.channels == 3 ? PNG_COLOR_TYPE_RGB : -1;
    if (type < 0) {
        png_destroy_write_struct(&png, &info);
        throw Error("unsupported channel count for PNG");
    }
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8, type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = std::size_t(img.width) * std::size_t(img.channels);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + std::size_t(y) * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

/// Any PNG, converted to 8-bit gray or RGB (alpha dropped).
inline Image8 read_png(const fs::path& path)
{
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.string().c_str(), "rb"), &std::fclose);
    if (!fp) throw Error("cannot open " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) throw Error("not a PNG file: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("libpng initialization failed");
    }
    Image8 img;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("corrupt PNG: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const auto type = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (type == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    img.width = int(png_get_image_width(png, info));
    img.height = int(png_get_image_height(png, info));
    img.channels = int(png_get_channels(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    img.pixels.resize(stride * std::size_t(img.height));
    for (int y = 0; y < img.height; ++y) png_read_row(png, img.pixels.data() + std::size_t(y) * stride, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

/// Binary P5 (gray) or P6 (RGB), maxval 255.
inline Image8 read_pnm(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P6") throw Error("unsupported PNM type in " + path.string());
    auto next_int = [&] {
        int v = 0;
        while (in >> std::ws && in.peek() == '#') {
            std::string skip;
            std::getline(in, skip);
        }
        if (!(in >> v)) throw Error("malformed PNM header in " + path.string());
        return v;
    };
    Image8 img;
    img.width = next_int();
    img.height = next_int();
    const int maxval = next_int();
    if (maxval != 255 || img.width <= 0 || img.height <= 0) throw Error("unsupported PNM header in " + path.string());
    in.get();
    img.channels = magic == "P5" ? 1 : 3;
    img.pixels.resize(std::size_t(img.width) * std::size_t(img.height) * std::size_t(img.channels));
    if (!in.read(reinterpret_cast<char*>(img.pixels.data()), std::streamsize(img.pixels.size())))
        throw Error("truncated PNM data in " + path.string());
    return img;
}

inline Frame read_frame(const fs::path& path)
{
    const auto ext = path.extension().string();
    const Image8 img = ext == ".png" ? read_png(path) : read_pnm(path);
    Frame f(img.width, img.height, img.channels);
    for (std::size_t i = 0; i < f.data.size(); ++i) f.data[i] = img.pixels[i] / 255.0;
    return f;
}

inline std::uint8_t to_byte(double v) { return std::uint8_t(std::lround(255.0 * std::clamp(v, 0.0, 1.0))); }

inline void write_frame_png(const fs::path& path, const Frame& f)
{
    Image8 img{f.width, f.height, f.channels, {}};
    img.pixels.reserve(f.data.size());
    for (double v : f.data) img.pixels.push_back(to_byte(v));
    write_png(path, img);
}

// ---------------------------------------------------------------------------
// Heatmap files
// ---------------------------------------------------------------------------

/// 8-bit grayscale, value round(255 * H).
inline void write_heatmap_png(const fs::path& path, const Heatmap& h)
{
    Image8 img{h.width(), h.height(), 1, {}};
    img.pixels.reserve(h.values().size());
    for (double v : h.values()) img.pixels.push_back(to_byte(v));
    write_png(path, img);
}

inline Heatmap read_heatmap_png(const fs::path& path)
{
    const Image8 img = read_png(path);
    Heatmap h(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            int s = 0;
            for (int c = 0; c < img.channels; ++c)
                s += img.pixels[(std::size_t(y) * img.width + x) * img.channels + c];
            h(x, y) = s / (255.0 * img.channels);
        }
    return h;
}

inline constexpr char kRawHeatmapMagic[8] = {'S', 'A', 'T', 'H', 'M', 'F', '3', '2'};

namespace detail {

template <typename T>
void put_le(std::ostream& out, T v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get_le(std::istream& in)
{
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error("unexpected end of file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace detail

/// 16-byte header (8-byte magic, u32 width, u32 height, little-endian)
/// followed by row-major float32 values.
inline void write_heatmap_raw(const fs::path& path, const Heatmap& h)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out.write(kRawHeatmapMagic, 8);
    detail::put_le<std::uint32_t>(out, std::uint32_t(h.width()));
    detail::put_le<std::uint32_t>(out, std::uint32_t(h.height()));
    for (double v : h.values()) detail::put_le<float>(out, float(v));
}

inline Heatmap read_heatmap_raw(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kRawHeatmapMagic, 8) != 0) throw Error("bad raw heatmap magic in " + path.string());
    const auto w = detail::get_le<std::uint32_t>(in);
    const auto h = detail::get_le<std::uint32_t>(in);
    if (w == 0 || h == 0 || w > 1u << 16 || h > 1u << 16) throw Error("bad raw heatmap size in " + path.string());
    Heatmap m{int(w), int(h)};
    for (int y = 0; y < int(h); ++y)
        for (int x = 0; x < int(w); ++x) m(x, y) = detail::get_le<float>(in);
    return m;
}

inline Heatmap read_heatmap(const fs::path& path)
{
    return path.extension() == ".png" ? read_heatmap_png(path) : read_heatmap_raw(path);
}

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Tensor shapes in TrackerParams::visit order.
inline std::vector<std::vector<std::size_t>> tensor_shapes(const TrackerParams& p)
{
    std::vector<std::vector<std::size_t>> s;
    for (const auto& m : p.proj.phi) s.push_back({m.rows, m.cols});
    for (const auto* group : {&p.rerank.wq, &p.rerank.wk, &p.rerank.wv})
        for (const auto& m : *group) s.push_back({m.rows, m.cols});
    s.push_back({p.rerank.wo.rows, p.rerank.wo.cols});
    s.push_back({p.rerank.ws.size()});
    s.push_back({p.rerank.bias.size()});
    s.push_back({p.refine.w1.rows, p.refine.w1.cols});
    s.push_back({p.refine.b1.size()});
    s.push_back({p.refine.w2.rows, p.refine.w2.cols});
    s.push_back({p.refine.b2.size()});
    return s;
}

inline nlohmann::json model_json(const ModelConfig& m)
{
    return {{"n_heads", m.n_heads},       {"d_k", m.d_k},           {"hidden", m.hidden},
            {"d_max_fraction", m.d_max_fraction}, {"pool", m.features.pool}, {"d_emb", m.features.d_emb},
            {"posenc_scale", m.features.posenc_scale}};
}

inline constexpr int kParamsVersion = 1;

/// `<dir>/params.bin` (flat little-endian float32 in visit order) and
/// `<dir>/params.json` (shapes, offsets, seed, version, model config).
inline void save_params(const fs::path& dir, TrackerParams params, const ModelConfig& cfg)
{
    fs::create_directories(dir);
    std::ofstream bin(dir / "params.bin", std::ios::binary);
    if (!bin) throw Error("cannot write " + (dir / "params.bin").string());
    const auto shapes = tensor_shapes(params);
    nlohmann::json tensors = nlohmann::json::array();
    std::size_t offset = 0, i = 0;
    params.visit([&](const std::string& name, std::span<double> v) {
        for (double x : v) detail::put_le<float>(bin, float(x));
        tensors.push_back({{"name", name}, {"shape", shapes[i++]}, {"offset", offset}, {"count", v.size()}});
        offset += v.size();
    });
    const nlohmann::json manifest = {{"format", "surgatt-params"},
                                     {"version", kParamsVersion},
                                     {"dtype", "float32-le"},
                                     {"seed", params.seed},
                                     {"count", offset},
                                     {"model", model_json(cfg)},
                                     {"tensors", tensors}};
    std::ofstream js(dir / "params.json");
    js << manifest.dump(2) << "\n";
}

struct LoadedParams {
    TrackerParams params;
    ModelConfig model;
};

inline LoadedParams load_params(const fs::path& dir)
{
    std::ifstream js(dir / "params.json");
    if (!js) throw Error("cannot open " + (dir / "params.json").string());
    nlohmann::json m;
    try {
        js >> m;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed params manifest: " + std::string(e.what()));
    }
    try {
        if (m.at("format") != "surgatt-params" || m.at("version") != kParamsVersion || m.at("dtype") != "float32-le")
            throw Error("unsupported params manifest in " + dir.string());
        LoadedParams out;
        const auto& mj = m.at("model");
        out.model.n_heads = mj.at("n_heads");
        out.model.d_k = mj.at("d_k");
        out.model.hidden = mj.at("hidden");
        out.model.d_max_fraction = mj.at("d_max_fraction");
        out.model.features.pool = mj.at("pool");
        out.model.features.d_emb = mj.at("d_emb");
        out.model.features.posenc_scale = mj.at("posenc_scale");
        out.params = TrackerParams::init(out.model, m.at("seed").get<std::uint64_t>());

        std::ifstream bin(dir / "params.bin", std::ios::binary);
        if (!bin) throw Error("cannot open " + (dir / "params.bin").string());
        const auto& tensors = m.at("tensors");
        std::size_t i = 0;
        out.params.visit([&](const std::string& name, std::span<double> v) {
            if (i >= tensors.size() || tensors[i].at("name") != name || tensors[i].at("count") != v.size())
                throw Error("params manifest does not match the model layout at tensor " + name);
            for (double& x : v) x = detail::get_le<float>(bin);
            ++i;
        });
        if (i != tensors.size()) throw Error("params manifest lists extra tensors");
        if (bin.peek() != std::char_traits<char>::eof()) throw Error("params.bin is longer than the manifest");
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw Error("malformed params manifest: " + std::string(e.what()));
    }
}

// ---------------------------------------------------------------------------
// Sequence directories
// ---------------------------------------------------------------------------

/// Layout: frames/NNNNNN.png, labels/NNNNNN.txt (gt, YOLO),
/// proposals/NNNNNN.txt (class cx cy w h confidence), sequence.json.
inline void save_sequence(const fs::path& dir, const SyntheticSequence& seq, const std::string& config_hash)
{
    for (const char* sub : {"frames", "labels", "proposals"}) fs::create_directories(dir / sub);
    nlohmann::json frames = nlohmann::json::array();
    char stem[32];
    for (std::size_t t = 0; t < seq.size(); ++t) {
        std::snprintf(stem, sizeof stem, "%06zu", t);
        write_frame_png(dir / "frames" / (std::string(stem) + ".png"), seq.frames[t]);
        write_label_file(dir / "labels" / (std::string(stem) + ".txt"), {to_label(seq.gt_boxes[t], seq.dims)});
        write_proposal_file(dir / "proposals" / (std::string(stem) + ".txt"), seq.proposals[t], seq.dims);
        frames.push_back(stem);
    }
    const nlohmann::json manifest = {{"width", seq.dims.width},
                                     {"height", seq.dims.height},
                                     {"n_frames", seq.size()},
                                     {"config_hash", config_hash},
                                     {"frames", frames}};
    std::ofstream js(dir / "sequence.json");
    js << manifest.dump(2) << "\n";
}

struct LoadedSequence {
    TrackData data;
    std::vector<std::string> stems;
};

/// Reads a sequence directory. gt is filled from labels/ when every frame
/// has at least one record (the first one is the target).
inline LoadedSequence load_sequence(const fs::path& dir)
{
    LoadedSequence out;
    const auto frames = list_files(dir / "frames", {".png", ".ppm", ".pgm"});
    const bool has_labels = fs::is_directory(dir / "labels");
    std::vector<BBox> gt;
    for (const auto& fp : frames) {
        const std::string stem = fp.stem().string();
        Frame f = read_frame(fp);
        f.index = out.stems.size();
        if (out.stems.empty())
            out.data.dims = f.dims();
        else if (!(f.dims() == out.data.dims))
            throw ResolutionMismatch("frame " + fp.string() + " differs in size from the first frame");
        const fs::path pp = dir / "proposals" / (stem + ".txt");
        if (!fs::exists(pp)) throw Error("missing proposal file " + pp.string());
        ProposalSet set;
        set.frame = f.index;
        for (const auto& r : parse_proposal_file(pp)) set.entries.push_back({to_pixels(r, out.data.dims), r.confidence});
        std::stable_sort(set.entries.begin(), set.entries.end(),
                         [](const Proposal& a, const Proposal& b) { return a.confidence > b.confidence; });
        out.data.proposals.push_back(std::move(set));
        out.data.pyramids.push_back(build_pyramid(f));
        if (has_labels) {
            const fs::path lp = dir / "labels" / (stem + ".txt");
            const auto recs = fs::exists(lp) ? parse_label_file(lp) : std::vector<LabelRecord>{};
            if (!recs.empty()) gt.push_back(to_pixels(recs.front(), out.data.dims));
        }
        out.stems.push_back(stem);
    }
    if (gt.size() == out.stems.size()) out.data.gt = std::move(gt);
    return out;
}

}  // namespace surgatt
