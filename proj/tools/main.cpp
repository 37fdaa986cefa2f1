// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
//
// geosynth — command-line surface binding the synthesis, ablation, metrics,
// ingestion and synthetic-data modules into reproducible runs. Every command
// resolves its configuration (file + --set overrides + defaults) into an
// explicit document, writes that document next to its outputs, and is
// reproducible from the emitted document alone.
//
// Exit codes: 0 success; 2 configuration/input error; 3 runtime error;
// 4 I/O error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "geosynth/cascade.hpp"
#include "geosynth/compose.hpp"
#include "geosynth/image.hpp"
#include "geosynth/ingest.hpp"
#include "geosynth/metrics.hpp"
#include "geosynth/parallel.hpp"
#include "geosynth/png_io.hpp"
#include "geosynth/pyramid.hpp"
#include "geosynth/rng.hpp"
#include "geosynth/runconfig.hpp"
#include "geosynth/synth.hpp"
#include "geosynth/tiling.hpp"

namespace fs = std::filesystem;
using namespace geosynth;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitIo = 4;

int64_t wall_ms_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - t0)
        .count();
}

std::vector<uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (in.bad()) throw io_error("cannot read " + path.string());
    return bytes;
}

void write_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
        if (ec) throw io_error("cannot create " + path.parent_path().string());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open " + path.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw io_error("cannot write " + path.string());
}

ImageU8 load_png_file(const fs::path& path) {
    const auto bytes = read_file(path);
    return decode_png(bytes.data(), bytes.size());
}

void save_png_file(const fs::path& path, const ImageU8& img) {
    const auto bytes = encode_png(img);
    write_file(path, std::string_view(reinterpret_cast<const char*>(bytes.data()),
                                      bytes.size()));
}

void write_resolved(const fs::path& path, const Json& resolved) {
    write_file(path, resolved.dump(2) + "\n");
}

/// Where the resolved config of a file-valued output lives: next to it,
/// named after its stem.
fs::path sibling_resolved_path(const fs::path& out_file) {
    fs::path p = out_file;
    p.replace_extension();
    p += ".resolved.json";
    return p;
}

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    int threads = 0;
};

Json load_doc(const CommonOpts& opts) {
    Json doc = opts.config_path.empty() ? default_config()
                                        : load_config_file(opts.config_path);
    for (const auto& s : opts.sets) apply_override(doc, s);
    return doc;
}

/// Grayscale visualization of one latent channel: affine map
/// v -> 0.5 + v / 4, clamped. Deterministic, so paired outputs stay
/// comparable across runs.
ImageU8 latent_gray(const ImageF& latent, int channel) {
    ImageU8 out(latent.width, latent.height, 1);
    for (int y = 0; y < latent.height; ++y)
        for (int x = 0; x < latent.width; ++x) {
            const float v = 0.5f + 0.25f * latent.at(x, y, channel);
            const float c = std::min(1.0f, std::max(0.0f, v));
            out.at(x, y, 0) = static_cast<uint8_t>(std::lround(c * 255.0f));
        }
    return out;
}

// --- generate ----------------------------------------------------------------

int cmd_generate(const CommonOpts& opts, const std::string& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const Json resolved = resolve_generate(load_doc(opts));
    set_max_threads(opts.threads);

    const CascadeConfig cfg = build_cascade(resolved);
    const WorldExtent extent =
        build_extent(resolved.at("cascade").at("extent"), "cascade.extent");
    const int tile_px = resolved.at("store").at("tile_px").get<int>();

    const fs::path out(out_dir);
    PyramidMap store(out / "tiles", tile_px);
    const WorldReport report = generate_world(extent, cfg, store);

    write_resolved(out / "resolved_config.json", resolved);

    Json rep;
    rep["tiles_written"] = report.tiles_written;
    Json layers = Json::array();
    std::ostringstream log;
    log << "command: generate\n";
    log << "seed: " << resolved.at("seed").get<uint64_t>() << "\n";
    for (const auto& layer : report.layers) {
        Json jl;
        jl["zoom"] = layer.zoom;
        jl["stage"] = layer.stage;
        jl["px0"] = layer.px0;
        jl["py0"] = layer.py0;
        jl["width"] = layer.width;
        jl["height"] = layer.height;
        jl["tiles"] = layer.tiles;
        layers.push_back(jl);
        log << "layer zoom=" << layer.zoom << " stage=" << layer.stage
            << " origin=(" << layer.px0 << "," << layer.py0 << ") size="
            << layer.width << "x" << layer.height << " tiles=" << layer.tiles
            << "\n";
    }
    rep["layers"] = layers;
    write_file(out / "report.json", rep.dump(2) + "\n");
    log << "tiles_written: " << report.tiles_written << "\n";
    log << "wall_ms: " << wall_ms_since(t0) << "\n";
    write_file(out / "run.log", log.str());

    std::cout << "wrote " << report.tiles_written << " tiles across "
              << report.layers.size() << " layers to "
              << (out / "tiles").string() << "\n";
    return kExitOk;
}

// --- superres ------------------------------------------------------------------

int cmd_superres(const CommonOpts& opts, const std::string& in_png,
                 const std::string& out_png) {
    Json doc = load_doc(opts);
    if (!in_png.empty()) doc["superres"]["in"] = in_png;
    const Json resolved = resolve_superres(doc);
    if (!resolved.at("superres").contains("in"))
        throw config_error(
            "superres.in: required field is missing (give --in or set it in "
            "the config)");
    set_max_threads(opts.threads);

    const auto codec = build_codec(resolved.at("codec"), "codec");
    const StageConfig stage =
        build_stage(resolved.at("superres").at("stage"), codec, "superres.stage");
    const DecodeTiling decode = build_decode(resolved.at("decode"), "decode");
    const uint64_t seed = resolved.at("seed").get<uint64_t>();

    const ImageU8 in_img =
        load_png_file(resolved.at("superres").at("in").get<std::string>());
    const ImageF low = dequantize(in_img);
    const ImageF out = superres_stage(low, stage, seed, *codec, decode);
    save_png_file(out_png, quantize(out));
    write_resolved(sibling_resolved_path(out_png), resolved);

    std::cout << "superres " << in_img.width << "x" << in_img.height << " -> "
              << out.width << "x" << out.height << " (" << out_png << ")\n";
    return kExitOk;
}

// --- ablate --------------------------------------------------------------------

int ablate_tiling(const Json& resolved, const fs::path& out) {
    const Json& node = resolved.at("ablate").at("tiling");
    const auto codec = build_codec(resolved.at("codec"), "codec");
    const auto schedule =
        build_schedule(node.at("schedule"), "ablate.tiling.schedule");
    const SamplerConfig sampler =
        build_sampler(node.at("sampler"), "ablate.tiling.sampler");
    const TilingConfig layout_cfg =
        build_tiling(node.at("layout"), "ablate.tiling.layout");
    const auto denoiser = build_denoiser(node.at("denoiser"), schedule, codec,
                                         "ablate.tiling.denoiser");
    const int width = node.at("width").get<int>();
    const int height = node.at("height").get<int>();
    const int channels = node.at("channels").get<int>();
    const uint64_t seed = node.at("seed").get<uint64_t>();
    const CanvasSpec canvas{width, height, channels, 0, 0};

    const Strategy all[] = {Strategy::naive_stitch, Strategy::gaussian_composite,
                            Strategy::latent_average, Strategy::mixture};
    std::ostringstream csv;
    csv << "strategy,boundary,interior,ratio\n";
    csv.setf(std::ios::fmtflags(0), std::ios::floatfield);
    csv.precision(10);
    for (const Strategy s : all) {
        const ImageF img = run_strategy(s, *denoiser, nullptr, nullptr, *schedule,
                                        sampler, layout_cfg, canvas, seed);
        // Each strategy is scored against the grid it actually generated on:
        // naive stitching runs tiles on a non-overlapping grid.
        const TileLayout layout = build_layout(
            width, height, layout_cfg.tile,
            s == Strategy::naive_stitch ? layout_cfg.tile : layout_cfg.stride);
        const SeamReport r = seam_energy(img, layout);
        csv << strategy_name(s) << "," << r.boundary << "," << r.interior << ","
            << r.ratio << "\n";
        save_png_file(out / ("strategy_" + std::string(strategy_name(s)) + ".png"),
                      latent_gray(img, 0));
        if (channels == codec->channels()) {
            const DecodeTiling decode = build_decode(resolved.at("decode"), "decode");
            save_png_file(
                out / ("strategy_" + std::string(strategy_name(s)) + "_rgb.png"),
                quantize(codec->tiled_decode(img, decode)));
        }
        std::cout << strategy_name(s) << ": seam ratio " << r.ratio << "\n";
    }
    write_file(out / "seam_report.csv", csv.str());
    return kExitOk;
}

int ablate_direct_mode(const Json& resolved, const fs::path& out) {
    const CascadeConfig cfg = build_cascade(resolved);
    const Json& node = resolved.at("ablate").at("direct");
    const StageConfig direct_stage =
        build_stage(node.at("stage"), cfg.codec, "ablate.direct.stage");
    const DirectReport rep =
        ablate_direct(node.at("base_width").get<int>(),
                      node.at("base_height").get<int>(), cfg, direct_stage);

    save_png_file(out / "base.png", rep.base);
    save_png_file(out / "cascaded.png", rep.cascaded);
    save_png_file(out / "direct.png", rep.direct);

    Json j;
    j["r_cascaded"] = rep.r_cascaded;
    j["r_direct"] = rep.r_direct;
    j["band_power_cascaded"] = rep.band_power_cascaded;
    j["band_power_direct"] = rep.band_power_direct;
    write_file(out / "direct_report.json", j.dump(2) + "\n");

    std::cout << "r_cascaded=" << rep.r_cascaded << " r_direct=" << rep.r_direct
              << "\n";
    return kExitOk;
}

int ablate_guidance(const Json& resolved, const fs::path& out) {
    const Json& node = resolved.at("ablate").at("guidance");
    const auto codec = build_codec(resolved.at("codec"), "codec");
    const StageConfig stage =
        build_stage(node.at("stage"), codec, "ablate.guidance.stage");
    const int width = node.at("width").get<int>();
    const int height = node.at("height").get<int>();
    const int channels = node.at("channels").get<int>();
    const uint64_t seed = node.at("seed").get<uint64_t>();
    const CanvasSpec canvas{width, height, channels, 0, 0};
    const std::vector<float>* label = stage.label ? stage.label.get() : nullptr;

    auto sample_with = [&](const Denoiser& den) {
        return run_strategy(Strategy::mixture, den, nullptr, label,
                            *stage.schedule, stage.sampler, stage.tiling, canvas,
                            seed);
    };
    const ImageF unguided = sample_with(*stage.denoiser);
    const ComposedDenoiser zero(stage.denoiser.get(), stage.negative.get(),
                                nullptr, {0.0, 1.0});
    const ImageF at_zero = sample_with(zero);
    const ComposedDenoiser guided(stage.denoiser.get(), stage.negative.get(),
                                  nullptr, {stage.lambda_neg, 1.0});
    const ImageF at_lambda = sample_with(guided);

    double mean_diff = 0.0, max_diff = 0.0;
    for (size_t i = 0; i < at_zero.data.size(); ++i) {
        const double d = std::abs(double(at_lambda.data[i]) - at_zero.data[i]);
        mean_diff += d;
        max_diff = std::max(max_diff, d);
    }
    mean_diff /= double(at_zero.data.size());

    save_png_file(out / "lambda_zero.png", latent_gray(at_zero, 0));
    save_png_file(out / "lambda_default.png", latent_gray(at_lambda, 0));

    Json j;
    j["lambda"] = stage.lambda_neg;
    j["lambda_zero_bitexact_vs_unguided"] = at_zero.data == unguided.data;
    j["mean_abs_diff"] = mean_diff;
    j["max_abs_diff"] = max_diff;
    write_file(out / "guidance_report.json", j.dump(2) + "\n");

    std::cout << "lambda=" << stage.lambda_neg << " mean|diff|=" << mean_diff
              << " (lambda=0 bit-exact: "
              << (at_zero.data == unguided.data ? "yes" : "no") << ")\n";
    return kExitOk;
}

int cmd_ablate(const CommonOpts& opts, std::string mode,
               const std::string& out_dir) {
    Json doc = load_doc(opts);
    if (mode.empty() && doc.contains("mode") && doc.at("mode").is_string())
        mode = doc.at("mode").get<std::string>();
    if (mode.empty())
        throw config_error("ablate.mode: --mode is required (tiling, direct or "
                           "guidance)");
    const Json resolved = resolve_ablate(doc, mode);
    set_max_threads(opts.threads);

    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw io_error("cannot create " + out.string());
    write_resolved(out / "resolved_config.json", resolved);

    if (mode == "tiling") return ablate_tiling(resolved, out);
    if (mode == "direct") return ablate_direct_mode(resolved, out);
    return ablate_guidance(resolved, out);
}

// --- metrics -------------------------------------------------------------------

std::vector<ImageU8> load_image_dir(const fs::path& dir, int* split_count) {
    if (!fs::is_directory(dir))
        throw config_error("metrics: " + dir.string() + " is not a directory");
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<ImageU8> images;
    for (const auto& f : files) {
        ImageU8 img = load_png_file(f);
        if (img.channels != 3)
            throw config_error("metrics: " + f.string() + " is not RGB");
        if (img.width == 2048 && img.height == 2048) {
            auto tiles = eval_split(img);
            ++*split_count;
            for (auto& t : tiles) images.push_back(std::move(t));
        } else {
            images.push_back(std::move(img));
        }
    }
    return images;
}

int cmd_metrics(const CommonOpts& opts, const std::string& dir_a,
                const std::string& dir_b, const std::string& out_file) {
    Json doc = load_doc(opts);
    if (!dir_a.empty()) doc["metrics"]["dir_a"] = dir_a;
    if (!dir_b.empty()) doc["metrics"]["dir_b"] = dir_b;
    const Json resolved = resolve_metrics(doc);
    set_max_threads(opts.threads);
    const Json& m = resolved.at("metrics");

    const std::string path_a = m.at("dir_a").get<std::string>();
    const std::string path_b = m.at("dir_b").get<std::string>();
    std::error_code equiv_ec;
    const bool same_dir = fs::equivalent(path_a, path_b, equiv_ec) && !equiv_ec;

    int split_a = 0, split_b = 0;
    const auto images_a = load_image_dir(path_a, &split_a);
    const auto images_b = same_dir ? images_a : load_image_dir(path_b, &split_b);
    if (same_dir) split_b = split_a;
    if (images_a.size() < 2 || images_b.size() < 2)
        throw config_error("metrics: need at least 2 images per directory, got " +
                           std::to_string(images_a.size()) + " and " +
                           std::to_string(images_b.size()));
    const int subset_size = m.at("subset_size").get<int>();
    // With one shared directory the kernel estimate draws each subset pair as
    // disjoint halves of a single draw from the pool: subsets drawn from two
    // overlapping copies would share identical images, and self-similarity
    // terms in the cross kernel drag the estimate systematically below zero.
    const size_t limit_a = same_dir ? images_a.size() / 2 : images_a.size();
    const size_t limit_b = same_dir ? images_b.size() / 2 : images_b.size();
    if (static_cast<size_t>(subset_size) > limit_a ||
        static_cast<size_t>(subset_size) > limit_b)
        throw config_error(
            "metrics.subset_size: " + std::to_string(subset_size) +
            " exceeds the available images (" + std::to_string(limit_a) +
            " and " + std::to_string(limit_b) +
            (same_dir ? ", comparing a directory against itself halves the pool)"
                      : ")"));

    const RandomProjectionExtractor extractor(
        m.at("dim").get<int>(), m.at("down").get<int>(),
        m.at("extractor_seed").get<uint64_t>());
    const auto fa = extract_features(extractor, images_a);
    const auto fb = same_dir ? fa : extract_features(extractor, images_b);

    const double fid = frechet_distance(compute_stats(fa), compute_stats(fb));
    const uint64_t kid_seed = resolved.at("seed").get<uint64_t>();
    const int n_subsets = m.at("n_subsets").get<int>();
    const KidResult k = same_dir
                            ? kid_self(fa, subset_size, n_subsets, kid_seed)
                            : kid(fa, fb, subset_size, n_subsets, kid_seed);

    Json rep;
    rep["fid"] = fid;
    Json kj;
    kj["mean"] = k.mean;
    kj["std_error"] = k.std_error;
    kj["subset_size"] = k.subset_size;
    kj["n_subsets"] = k.n_subsets;
    kj["self_comparison_split"] = same_dir;
    rep["kid"] = kj;
    Json ex;
    ex["kind"] = "random-projection";
    ex["dim"] = extractor.dim();
    ex["down"] = m.at("down").get<int>();
    ex["seed"] = m.at("extractor_seed").get<uint64_t>();
    rep["extractor"] = ex;
    Json counts;
    counts["a"] = images_a.size();
    counts["b"] = images_b.size();
    counts["split_applied_a"] = split_a;
    counts["split_applied_b"] = split_b;
    rep["counts"] = counts;
    rep["note"] =
        "feature space is a seeded random projection; values are comparable "
        "only between runs of this tool with the same extractor settings";

    write_file(out_file, rep.dump(2) + "\n");
    write_resolved(sibling_resolved_path(out_file), resolved);

    std::cout << "fid=" << fid << " kid=" << k.mean << " +- " << k.std_error
              << " (n_a=" << images_a.size() << ", n_b=" << images_b.size()
              << ")\n";
    return kExitOk;
}

// --- ingest --------------------------------------------------------------------

int cmd_ingest(const CommonOpts& opts, const std::string& out_dir) {
    const Json resolved = resolve_ingest(load_doc(opts));
    set_max_threads(opts.threads);
    const Json& g = resolved.at("ingest");

    TileServerSpec server = build_server_spec(g.at("server"), "ingest.server");
    if (server.api_key.empty()) {
        if (const char* env = std::getenv("GEOSYNTH_API_KEY")) server.api_key = env;
    }
    validate_server_spec(server);

    const fs::path out(out_dir);
    PyramidMap store(out / "tiles",
                     resolved.at("store").at("tile_px").get<int>());
    RateLimiter limiter(server.rate_limit);
    const bool classify = g.at("classify").get<bool>();

    Json summary = Json::array();
    int failures = 0;
    int i = 0;
    for (const auto& s : g.at("stacks")) {
        const std::string path = "ingest.stacks[" + std::to_string(i) + "]";
        const PyramidSpec spec = build_pyramid_spec(s, path);
        const StackManifest manifest = fetch_pyramid(server, spec, store, limiter);
        const std::string file = "stack_" + std::to_string(i) + ".json";
        write_file(out / file, manifest.to_json());

        Json row;
        row["file"] = file;
        row["requested_lat"] = spec.center_lat;
        row["requested_lon"] = spec.center_lon;
        row["lat"] = manifest.lat;
        row["lon"] = manifest.lon;
        row["complete"] = manifest.complete();
        if (classify)
            row["availability"] = availability_name(
                classify_availability(server, manifest.lat, manifest.lon, limiter));
        summary.push_back(row);
        if (!manifest.complete()) {
            ++failures;
            std::cerr << "warning: stack " << i
                      << " is incomplete; rerun to resume\n";
        }
        ++i;
    }
    Json top;
    top["stacks"] = summary;
    write_file(out / "manifest.json", top.dump(2) + "\n");
    write_resolved(out / "resolved_config.json", resolved);

    std::cout << "fetched " << i << " stacks (" << (i - failures)
              << " complete) into " << (out / "tiles").string() << "\n";
    return kExitOk;
}

// --- synth ---------------------------------------------------------------------

int cmd_synth(const CommonOpts& opts, const std::string& out_dir) {
    const Json resolved = resolve_synth(load_doc(opts));
    set_max_threads(opts.threads);
    const Json& s = resolved.at("synth");

    std::vector<int> zooms;
    for (const auto& z : s.at("zooms")) zooms.push_back(z.get<int>());
    const int side = s.at("side").get<int>();
    const int tile_px = s.at("tile_px").get<int>();
    const uint64_t seed = resolved.at("seed").get<uint64_t>();

    const SynthStack stack = synth_pyramid(seed, zooms, side);

    const fs::path out(out_dir);
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw io_error("cannot create " + out.string());
    PyramidMap store(out / "tiles", tile_px);
    const int per_side = side / tile_px;
    for (size_t li = 0; li < stack.levels.size(); ++li) {
        const int zoom = stack.zooms[li];
        const ImageU8& level = stack.levels[li];
        save_png_file(out / ("level_" + std::to_string(zoom) + ".png"), level);
        for (int ty = 0; ty < per_side; ++ty)
            for (int tx = 0; tx < per_side; ++tx)
                store.put(TileCoord{zoom, tx, ty},
                          crop(level, tx * tile_px, ty * tile_px, tile_px,
                               tile_px));
    }
    store.flush_manifest();
    write_resolved(out / "resolved_config.json", resolved);

    std::cout << "synthesized " << stack.levels.size() << " levels (side "
              << side << ") into " << out.string() << "\n";
    return kExitOk;
}

void add_common(CLI::App* sub, CommonOpts& opts) {
    sub->add_option("--config", opts.config_path,
                    "JSON run config (omit to use the built-in defaults)");
    sub->add_option("--set", opts.sets,
                    "override a config field: dotted.path=value (repeatable)");
    sub->add_option("--threads", opts.threads,
                    "cap worker threads (0 = hardware default); never affects "
                    "output bytes");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "geosynth: tiled cascaded diffusion synthesis of multi-resolution "
        "raster map pyramids"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_path, in_path, mode, dir_a, dir_b;

    CLI::App* generate = app.add_subcommand(
        "generate", "generate a pyramid for a world extent");
    add_common(generate, opts);
    generate->add_option("--out", out_path, "output directory")->required();

    CLI::App* superres = app.add_subcommand(
        "superres", "single x4 super-resolution stage on one image");
    add_common(superres, opts);
    superres->add_option("--in", in_path, "input PNG (or superres.in in config)");
    superres->add_option("--out", out_path, "output PNG")->required();

    CLI::App* ablate = app.add_subcommand(
        "ablate", "tiling-strategy, direct-generation or guidance ablations");
    add_common(ablate, opts);
    ablate->add_option("--mode", mode, "tiling | direct | guidance");
    ablate->add_option("--out", out_path, "output directory")->required();

    CLI::App* metrics = app.add_subcommand(
        "metrics", "distribution distance between two tile directories");
    add_common(metrics, opts);
    metrics->add_option("--dir-a", dir_a, "first image directory");
    metrics->add_option("--dir-b", dir_b, "second image directory");
    metrics->add_option("--out", out_path, "report JSON path")->required();

    CLI::App* ingest = app.add_subcommand(
        "ingest", "fetch concentric tile stacks from a tile server");
    add_common(ingest, opts);
    ingest->add_option("--out", out_path, "output directory")->required();

    CLI::App* synth = app.add_subcommand(
        "synth", "procedural multi-zoom ground-truth pyramid");
    add_common(synth, opts);
    synth->add_option("--out", out_path, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }

    try {
        if (generate->parsed()) return cmd_generate(opts, out_path);
        if (superres->parsed()) return cmd_superres(opts, in_path, out_path);
        if (ablate->parsed()) return cmd_ablate(opts, mode, out_path);
        if (metrics->parsed()) return cmd_metrics(opts, dir_a, dir_b, out_path);
        if (ingest->parsed()) return cmd_ingest(opts, out_path);
        if (synth->parsed()) return cmd_synth(opts, out_path);
        std::cerr << "error: no command\n";
        return kExitConfig;
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const io_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
