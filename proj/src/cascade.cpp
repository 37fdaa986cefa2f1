// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#include "geosynth/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "geosynth/rng.hpp"

namespace geosynth {

namespace {

/// Half-open rectangle in latent pixels of one stage.
struct Rect {
    int64_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    int64_t w() const { return x1 - x0; }
    int64_t h() const { return y1 - y0; }
};

int64_t floor_div(int64_t a, int64_t b) {
    int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int64_t ceil_div_pos(int64_t a, int64_t b) { return (a + b - 1) / b; }

ImageU8 quantize_u8(const ImageF& img) {
    ImageU8 out(img.width, img.height, img.channels);
    for (size_t i = 0; i < img.data.size(); ++i) {
        const float v = std::clamp(img.data[i], 0.0f, 1.0f);
        out.data[i] = static_cast<uint8_t>(std::lround(v * 255.0f));
    }
    return out;
}

ImageF to_float(const ImageU8& img) {
    ImageF out(img.width, img.height, img.channels);
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
    return out;
}

/// Wraps the stage model in negative guidance when configured. The holder
/// keeps the decorator alive for the duration of a sampling run.
struct GuidedModel {
    std::unique_ptr<ComposedDenoiser> holder;
    const Denoiser* model = nullptr;
};

GuidedModel guided(const StageConfig& stage) {
    GuidedModel g;
    if (stage.lambda_neg < 0.0)
        throw std::invalid_argument("stage '" + stage.name +
                                    "': lambda_neg must be >= 0");
    if (stage.lambda_neg > 0.0 && !stage.negative)
        throw std::invalid_argument("stage '" + stage.name +
                                    "': lambda_neg > 0 needs a negative model");
    if (stage.negative && stage.lambda_neg > 0.0) {
        g.holder = std::make_unique<ComposedDenoiser>(
            stage.denoiser.get(), stage.negative.get(), nullptr,
            GuidanceConfig{stage.lambda_neg, 1.0});
        g.model = g.holder.get();
    } else {
        g.model = stage.denoiser.get();
    }
    return g;
}

void check_stage_basics(const StageConfig& stage) {
    if (!stage.denoiser)
        throw std::invalid_argument("stage '" + stage.name + "': no denoiser");
    if (!stage.schedule)
        throw std::invalid_argument("stage '" + stage.name + "': no schedule");
    if (stage.scale != 4)
        throw std::invalid_argument("stage '" + stage.name +
                                    "': scale factor must be 4");
}

/// Tiled mixture sampling over one latent canvas, falling back to the
/// untiled reference path when the canvas is smaller than one tile.
ImageF sample_canvas(const StageConfig& stage, const Denoiser& model,
                     const ImageF* cond, const CanvasSpec& canvas, uint64_t seed) {
    const std::vector<float>* label = stage.label ? stage.label.get() : nullptr;
    if (canvas.width < stage.tiling.tile || canvas.height < stage.tiling.tile)
        return untiled_sample(model, cond, label, *stage.schedule, stage.sampler,
                              canvas, seed);
    return run_strategy(Strategy::mixture, model, cond, label, *stage.schedule,
                        stage.sampler, stage.tiling, canvas, seed);
}

/// Rising ramp from both canvas edges over `ramp` pixels, the same profile
/// shape the windowed decoder uses for its overlaps.
double ramp_profile(int u, int extent, int ramp) {
    double w = 1.0;
    if (ramp > 0) {
        if (u < ramp) w = (u + 1.0) / (ramp + 1.0);
        const int from_end = extent - 1 - u;
        if (from_end < ramp) w = std::min(w, (from_end + 1.0) / (ramp + 1.0));
    }
    return w;
}

double variance_channel_centred(const ImageF& img) {
    if (img.data.empty()) return 0.0;
    const size_t px = static_cast<size_t>(img.width) * img.height;
    double total = 0.0;
    for (int c = 0; c < img.channels; ++c) {
        double mean = 0.0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) mean += img.at(x, y, c);
        mean /= static_cast<double>(px);
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const double d = img.at(x, y, c) - mean;
                total += d * d;
            }
    }
    return total / static_cast<double>(px * img.channels);
}

/// Power in dyadic low-frequency bands: variance of the 2^k box-downsampled
/// image for every k that divides the dims, coarsest last.
std::vector<double> band_power(const ImageF& img) {
    std::vector<double> bands;
    for (int k = 0; k < 8; ++k) {
        const int f = 1 << k;
        if (img.width % f != 0 || img.height % f != 0) break;
        if (img.width / f < 2 || img.height / f < 2) break;
        bands.push_back(variance_channel_centred(
            k == 0 ? img : box_downsample(img, f)));
    }
    return bands;
}

}  // namespace

TileSeed tile_seed(uint64_t global_seed, int zoom, int64_t x, int64_t y,
                   std::string_view stage_name) {
    return TileSeed{stable_seed(global_seed, stage_name,
                                static_cast<uint64_t>(zoom),
                                static_cast<uint64_t>(x),
                                static_cast<uint64_t>(y))};
}

ImageF generate_base(int width, int height, uint64_t seed, const StageConfig& stage,
                     const LinearLatentCodec& codec, const DecodeTiling& decode,
                     int64_t world_x, int64_t world_y) {
    check_stage_basics(stage);
    if (stage.denoiser->needs_low_res())
        throw std::invalid_argument(
            "generate_base: the base model must be unconditional-capable");
    if (width <= 0 || height <= 0 || width % 4 != 0 || height % 4 != 0)
        throw std::invalid_argument(
            "generate_base: dims must be positive multiples of 4");
    if (!codec.valid()) throw std::invalid_argument("generate_base: unfitted codec");

    const GuidedModel g = guided(stage);
    const CanvasSpec canvas{width / 4, height / 4, codec.channels(), world_x,
                            world_y};
    const ImageF latent = sample_canvas(stage, *g.model, nullptr, canvas, seed);
    return codec.tiled_decode(latent, decode);
}

ImageF superres_stage(const ImageF& low_res, const StageConfig& stage, uint64_t seed,
                      const LinearLatentCodec& codec, const DecodeTiling& decode,
                      int64_t world_x, int64_t world_y) {
    check_stage_basics(stage);
    if (!stage.denoiser->needs_low_res())
        throw std::invalid_argument(
            "superres_stage: the stage model must accept low-res conditioning");
    if (low_res.channels != 3)
        throw std::invalid_argument("superres_stage: conditioning must be RGB");
    if (low_res.width <= 0 || low_res.height <= 0)
        throw std::invalid_argument("superres_stage: empty conditioning image");
    if (!codec.valid()) throw std::invalid_argument("superres_stage: unfitted codec");
    const bool tiled = low_res.width >= stage.tiling.tile &&
                       low_res.height >= stage.tiling.tile;
    if (tiled && (low_res.width % stage.tiling.stride != 0 ||
                  low_res.height % stage.tiling.stride != 0))
        throw std::invalid_argument(
            "superres_stage: input dims misaligned with the stage layout "
            "(must be multiples of the tile stride)");

    const GuidedModel g = guided(stage);
    const CanvasSpec canvas{low_res.width, low_res.height, codec.channels(),
                            world_x, world_y};
    const ImageF latent = sample_canvas(stage, *g.model, &low_res, canvas, seed);
    return codec.tiled_decode(latent, decode);
}

WorldReport generate_world(const WorldExtent& extent, const CascadeConfig& config,
                           PyramidMap& store) {
    const int tile_px = store.tile_px();
    if (tile_px % 4 != 0)
        throw std::invalid_argument(
            "generate_world: store tile side must be a multiple of 4");
    if (extent.tiles_w < 1 || extent.tiles_h < 1)
        throw std::invalid_argument("generate_world: extent needs >= 1 base tile");
    if (extent.tile_x0 < 0 || extent.tile_y0 < 0 ||
        extent.tile_x0 + extent.tiles_w > (int64_t{1} << config.base_zoom) ||
        extent.tile_y0 + extent.tiles_h > (int64_t{1} << config.base_zoom))
        throw std::invalid_argument(
            "generate_world: extent outside the base-zoom tile grid");
    if (!config.codec || !config.codec->valid())
        throw std::invalid_argument("generate_world: unfitted codec");
    if (config.chunk_px < 4 || config.chunk_px % 4 != 0)
        throw std::invalid_argument(
            "generate_world: chunk size must be a positive multiple of 4 "
            "output pixels");
    if (config.halo < 0)
        throw std::invalid_argument("generate_world: negative halo");
    const int K = static_cast<int>(config.stages.size());
    if (config.base_zoom < 1 || config.base_zoom + 2 * K > 30)
        throw std::invalid_argument("generate_world: zoom range outside [1, 30]");

    const int64_t cell = config.chunk_px / 4;  // cell pitch, latent px
    const int64_t halo = config.halo;
    check_stage_basics(config.base);
    if (config.base.denoiser->needs_low_res())
        throw std::invalid_argument(
            "generate_world: the base model must be unconditional-capable");
    for (const StageConfig& stage : config.stages) {
        check_stage_basics(stage);
        if (!stage.denoiser->needs_low_res())
            throw std::invalid_argument("generate_world: stage '" + stage.name +
                                        "' must accept low-res conditioning");
    }
    for (int s = 0; s <= K; ++s) {
        const StageConfig& stage = s == 0 ? config.base : config.stages[s - 1];
        if (halo < stage.tiling.tile - stage.tiling.stride)
            throw std::invalid_argument(
                "generate_world: halo smaller than the tile overlap of stage '" +
                stage.name + "'");
        if (cell + 2 * halo < stage.tiling.tile)
            throw std::invalid_argument(
                "generate_world: chunk plus halo smaller than one tile of "
                "stage '" + stage.name + "'");
    }

    // Support margins, in latent pixels per layer: how far each layer must
    // extend beyond its emitted region so every later cell finds its full
    // halo-extended source crop inside generated data.
    std::vector<int64_t> margin(K + 1, 0);
    for (int s = K - 1; s >= 0; --s)
        margin[s] = ceil_div_pos(margin[s + 1] + 2 * halo + cell - 1, 4);

    const int channels = config.codec->channels();
    WorldReport report;
    ImageU8 prev_quantized;  // previous layer over its generated rect
    Rect prev_gen_rgb;

    for (int s = 0; s <= K; ++s) {
        const StageConfig& stage = s == 0 ? config.base : config.stages[s - 1];
        const int zoom = config.base_zoom + 2 * s;
        // scale = 4^s maps base-zoom global RGB pixels to this layer's.
        const int64_t scale = int64_t{1} << (2 * s);
        Rect nominal;  // latent px of this stage
        nominal.x0 = extent.tile_x0 * tile_px * scale / 4;
        nominal.y0 = extent.tile_y0 * tile_px * scale / 4;
        nominal.x1 = nominal.x0 + int64_t{extent.tiles_w} * tile_px * scale / 4;
        nominal.y1 = nominal.y0 + int64_t{extent.tiles_h} * tile_px * scale / 4;
        Rect gen{nominal.x0 - margin[s], nominal.y0 - margin[s],
                 nominal.x1 + margin[s], nominal.y1 + margin[s]};

        const int64_t cx0 = floor_div(gen.x0 - halo, cell);
        const int64_t cx1 = floor_div(gen.x1 - 1 + halo, cell);
        const int64_t cy0 = floor_div(gen.y0 - halo, cell);
        const int64_t cy1 = floor_div(gen.y1 - 1 + halo, cell);
        const int64_t world_latent = (int64_t{tile_px} << zoom) / 4;
        if (cx0 * cell - halo < 0 || cy0 * cell - halo < 0 ||
            (cx1 + 1) * cell + halo > world_latent ||
            (cy1 + 1) * cell + halo > world_latent)
            throw std::invalid_argument(
                "generate_world: extent too close to the world edge for the "
                "configured chunk, halo, and support margins");

        const GuidedModel g = guided(stage);
        const int gw = static_cast<int>(gen.w()), gh = static_cast<int>(gen.h());
        ImageD acc(gw, gh, channels, 0.0);
        ImageD wsum(gw, gh, 1, 0.0);
        const int canvas_side = static_cast<int>(cell + 2 * halo);
        const int ramp = static_cast<int>(2 * halo);

        for (int64_t cy = cy0; cy <= cy1; ++cy) {
            for (int64_t cx = cx0; cx <= cx1; ++cx) {
                const Rect p{cx * cell - halo, cy * cell - halo,
                             (cx + 1) * cell + halo, (cy + 1) * cell + halo};
                ImageF cond_crop;
                const ImageF* cond = nullptr;
                if (s > 0) {
                    // One latent pixel per source RGB pixel; the previous
                    // layer's canvas covers this crop by margin construction.
                    cond_crop = to_float(crop(
                        prev_quantized, static_cast<int>(p.x0 - prev_gen_rgb.x0),
                        static_cast<int>(p.y0 - prev_gen_rgb.y0), canvas_side,
                        canvas_side));
                    cond = &cond_crop;
                }
                const CanvasSpec canvas{canvas_side, canvas_side, channels, p.x0,
                                        p.y0};
                const uint64_t seed =
                    tile_seed(config.seed, zoom, cx, cy, stage.name).seed;
                const ImageF out =
                    sample_canvas(stage, *g.model, cond, canvas, seed);

                const int64_t bx0 = std::max(p.x0, gen.x0),
                              bx1 = std::min(p.x1, gen.x1);
                const int64_t by0 = std::max(p.y0, gen.y0),
                              by1 = std::min(p.y1, gen.y1);
                for (int64_t y = by0; y < by1; ++y) {
                    const double wy = ramp_profile(static_cast<int>(y - p.y0),
                                                   canvas_side, ramp);
                    for (int64_t x = bx0; x < bx1; ++x) {
                        const double w =
                            wy * ramp_profile(static_cast<int>(x - p.x0),
                                              canvas_side, ramp);
                        const int gx = static_cast<int>(x - gen.x0);
                        const int gy = static_cast<int>(y - gen.y0);
                        for (int ch = 0; ch < channels; ++ch)
                            acc.at(gx, gy, ch) +=
                                w * out.at(static_cast<int>(x - p.x0),
                                           static_cast<int>(y - p.y0), ch);
                        wsum.at(gx, gy, 0) += w;
                    }
                }
            }
        }

        ImageF latent(gw, gh, channels);
        for (int y = 0; y < gh; ++y)
            for (int x = 0; x < gw; ++x) {
                const double total = wsum.at(x, y, 0);
                for (int ch = 0; ch < channels; ++ch)
                    latent.at(x, y, ch) =
                        static_cast<float>(acc.at(x, y, ch) / total);
            }

        const ImageF rgb = config.codec->tiled_decode(latent, config.decode);
        prev_quantized = quantize_u8(rgb);
        prev_gen_rgb = Rect{gen.x0 * 4, gen.y0 * 4, gen.x1 * 4, gen.y1 * 4};

        // Emit the nominal region as store tiles.
        const int64_t tx0 = extent.tile_x0 * scale, ty0 = extent.tile_y0 * scale;
        const int64_t tx1 = tx0 + int64_t{extent.tiles_w} * scale;
        const int64_t ty1 = ty0 + int64_t{extent.tiles_h} * scale;
        int emitted = 0;
        for (int64_t ty = ty0; ty < ty1; ++ty)
            for (int64_t tx = tx0; tx < tx1; ++tx) {
                const ImageU8 tile = crop(
                    prev_quantized,
                    static_cast<int>(tx * tile_px - prev_gen_rgb.x0),
                    static_cast<int>(ty * tile_px - prev_gen_rgb.y0), tile_px,
                    tile_px);
                store.put(TileCoord{zoom, tx, ty}, tile);
                ++emitted;
            }
        store.flush_manifest();

        WorldReport::Layer layer;
        layer.zoom = zoom;
        layer.stage = stage.name;
        layer.px0 = nominal.x0 * 4;
        layer.py0 = nominal.y0 * 4;
        layer.width = static_cast<int>(nominal.w() * 4);
        layer.height = static_cast<int>(nominal.h() * 4);
        layer.tiles = emitted;
        report.layers.push_back(std::move(layer));
        report.tiles_written += static_cast<size_t>(emitted);
    }
    return report;
}

double pearson_correlation(const ImageF& a, const ImageF& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("pearson_correlation: shape mismatch");
    const size_t px = static_cast<size_t>(a.width) * a.height;
    if (px == 0) throw std::invalid_argument("pearson_correlation: empty image");
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        double ma = 0.0, mb = 0.0;
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                ma += a.at(x, y, c);
                mb += b.at(x, y, c);
            }
        ma /= static_cast<double>(px);
        mb /= static_cast<double>(px);
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                const double da = a.at(x, y, c) - ma;
                const double db = b.at(x, y, c) - mb;
                sxy += da * db;
                sxx += da * da;
                syy += db * db;
            }
    }
    const double denom = std::sqrt(sxx) * std::sqrt(syy);
    return denom > 0.0 ? sxy / denom : 0.0;
}

DirectReport ablate_direct(int base_width, int base_height,
                           const CascadeConfig& config,
                           const StageConfig& direct_stage) {
    if (config.stages.empty())
        throw std::invalid_argument("ablate_direct: cascade has no stages");
    if (!config.codec || !config.codec->valid())
        throw std::invalid_argument("ablate_direct: unfitted codec");
    const int K = static_cast<int>(config.stages.size());

    DirectReport report;
    // Cascaded path: base layer, then every stage; 8-bit quantization between
    // layers, mirroring how generate_world persists them.
    ImageU8 layer = quantize_u8(generate_base(
        base_width, base_height,
        tile_seed(config.seed, config.base_zoom, 0, 0, config.base.name).seed,
        config.base, *config.codec, config.decode));
    report.base = layer;
    for (int s = 0; s < K; ++s) {
        const StageConfig& stage = config.stages[s];
        const int zoom = config.base_zoom + 2 * (s + 1);
        const ImageF cond = to_float(layer);
        layer = quantize_u8(superres_stage(
            cond, stage, tile_seed(config.seed, zoom, 0, 0, stage.name).seed,
            *config.codec, config.decode));
    }
    report.cascaded = layer;

    // Direct path: one unconditional pass at the final dimensions.
    const int final_zoom = config.base_zoom + 2 * K;
    const int factor = 1 << (2 * K);
    report.direct = quantize_u8(generate_base(
        base_width * factor, base_height * factor,
        tile_seed(config.seed, final_zoom, 0, 0, direct_stage.name).seed,
        direct_stage, *config.codec, config.decode));

    const ImageF basef = to_float(report.base);
    report.r_cascaded =
        pearson_correlation(box_downsample(to_float(report.cascaded), factor), basef);
    report.r_direct =
        pearson_correlation(box_downsample(to_float(report.direct), factor), basef);
    report.band_power_cascaded = band_power(to_float(report.cascaded));
    report.band_power_direct = band_power(to_float(report.direct));
    return report;
}

}  // namespace geosynth
