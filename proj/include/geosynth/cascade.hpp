// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "geosynth/codec.hpp"
#include "geosynth/compose.hpp"
#include "geosynth/denoise.hpp"
#include "geosynth/image.hpp"
#include "geosynth/pyramid.hpp"
#include "geosynth/schedule.hpp"
#include "geosynth/tiling.hpp"

namespace geosynth {

/// Derived seed for one generation unit. The derivation is a pure function
/// of (global seed, zoom, x, y, stage name), so any sub-extent regenerated
/// with the same global seed draws identical randomness per unit.
struct TileSeed {
    uint64_t seed = 0;
};

TileSeed tile_seed(uint64_t global_seed, int zoom, int64_t x, int64_t y,
                   std::string_view stage_name);

/// One rung of the cascade: either the base layer sampler or a x4
/// super-resolution model that conditions on the previous layer.
struct StageConfig {
    std::string name;  // e.g. "base", "10to12"
    int scale = 4;     // linear upscale per stage; fixed
    std::shared_ptr<const Denoiser> denoiser;
    std::shared_ptr<const Denoiser> negative;  // optional unwanted-mode model
    double lambda_neg = 0.0;                   // negative-guidance strength
    std::shared_ptr<const NoiseSchedule> schedule;
    SamplerConfig sampler;  // DPM, 50 steps by default
    TilingConfig tiling;
    std::shared_ptr<const std::vector<float>> label;  // optional conditioning
};

/// Whole-cascade description: zoom bookkeeping, per-stage models, and the
/// out-of-core chunking geometry. One stage advances the zoom by exactly 2
/// (x4 linear). `chunk_px` is the side of one processing cell in output RGB
/// pixels; `halo` is the extra border per cell side in source-layer pixels
/// (equal to latent pixels of the stage). The halo must cover at least the
/// tile overlap of every stage layout.
struct CascadeConfig {
    int base_zoom = 10;
    StageConfig base;
    std::vector<StageConfig> stages;
    uint64_t seed = 0;
    int chunk_px = 1024;
    int halo = 128;
    std::shared_ptr<const LinearLatentCodec> codec;
    DecodeTiling decode;
};

/// Sample the base layer for an in-memory region: seeded unit-Gaussian
/// latent, tiled mixture sampling to t = 0, windowed decode. `width` and
/// `height` are output RGB pixels (divisible by 4); the latent canvas is a
/// quarter of that per axis and anchored at (world_x, world_y) in latent
/// coordinates. A region smaller than one latent tile falls back to the
/// untiled sampler. Negative guidance applies when the stage carries a
/// negative model and lambda_neg > 0.
ImageF generate_base(int width, int height, uint64_t seed, const StageConfig& stage,
                     const LinearLatentCodec& codec, const DecodeTiling& decode,
                     int64_t world_x = 0, int64_t world_y = 0);

/// One x4 super-resolution pass over an in-memory low-res image. The latent
/// canvas matches the input dimensions (one latent pixel per source pixel);
/// every latent tile is conditioned on its aligned source crop, and the
/// stage's negative guidance is applied to each prediction. Input dims must
/// be multiples of the stage tile stride when they exceed one tile; smaller
/// inputs fall back to the untiled sampler.
ImageF superres_stage(const ImageF& low_res, const StageConfig& stage, uint64_t seed,
                      const LinearLatentCodec& codec, const DecodeTiling& decode,
                      int64_t world_x = 0, int64_t world_y = 0);

/// Rectangle of store tiles at the base zoom.
struct WorldExtent {
    int64_t tile_x0 = 0, tile_y0 = 0;
    int tiles_w = 1, tiles_h = 1;
};

/// Per-layer record of one generate_world run.
struct WorldReport {
    struct Layer {
        int zoom = 0;
        std::string stage;
        int64_t px0 = 0, py0 = 0;  // global RGB pixel origin of the layer
        int width = 0, height = 0;
        int tiles = 0;
    };
    std::vector<Layer> layers;
    size_t tiles_written = 0;
};

/// Generate the full pyramid for an extent: base layer, then every stage,
/// each quantized to 8-bit once and emitted as store tiles; stages condition
/// on the quantized previous layer. Layers are processed in world-anchored
/// cells of `chunk_px` output pixels extended by `halo`, each sampled with
/// its own TileSeed and blended with per-axis ramp weights over the halo
/// overlap, so the sampler working set stays bounded by the cell size and
/// regenerating any containing extent reproduces this extent's tiles byte
/// for byte. Intermediate layers carry a support margin so that every
/// emitted pixel's dependence cone stays inside generated data.
WorldReport generate_world(const WorldExtent& extent, const CascadeConfig& config,
                           PyramidMap& store);

/// Cascaded-vs-direct comparison: the same extent generated through the
/// cascade and in one direct pass at the final zoom, with cross-scale
/// consistency numbers (Pearson correlation of each final layer, downsampled
/// back to base resolution, against the cascade's own base layer) and power
/// in dyadic low-frequency bands of both finals.
struct DirectReport {
    ImageU8 base;
    ImageU8 cascaded;
    ImageU8 direct;
    double r_cascaded = 0.0;
    double r_direct = 0.0;
    std::vector<double> band_power_cascaded;
    std::vector<double> band_power_direct;
};

/// `base_width`/`base_height` are base-layer RGB pixels; the finals are
/// 4^stages larger. `direct_stage` samples the final zoom unconditionally.
DirectReport ablate_direct(int base_width, int base_height,
                           const CascadeConfig& config,
                           const StageConfig& direct_stage);

/// Pooled Pearson correlation of two same-shaped images with per-channel
/// means removed; the consistency yardstick used by DirectReport.
double pearson_correlation(const ImageF& a, const ImageF& b);

}  // namespace geosynth
