// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geosynth/denoise.hpp"
#include "geosynth/image.hpp"
#include "geosynth/schedule.hpp"

namespace geosynth {

/// Overlapping tile grid over a latent canvas. Origins advance by `stride`;
/// the final origin per axis is clamped so the last tile ends exactly at the
/// canvas edge (tiles are always full-sized, shifted inward at the border).
struct TileLayout {
    struct Tile {
        int x0 = 0, y0 = 0;
        int w = 0, h = 0;
    };
    int canvas_w = 0, canvas_h = 0;
    int tile = 0, stride = 0;
    std::vector<Tile> tiles;  // row-major (y, then x); order is the contract
};

/// Build the grid. Throws if the tile does not fit the canvas or stride is
/// not in [1, tile].
TileLayout build_layout(int canvas_w, int canvas_h, int tile, int stride);

/// Per-tile, per-pixel blending weights, normalized so that the weights of
/// all tiles covering any canvas pixel sum to 1 (within 1e-9; exactly 1.0
/// where a single tile covers).
struct WeightMap {
    std::vector<ImageD> tile_weights;  // one (w x h x 1) map per layout tile
};

/// Gaussian weights centred on each tile: raw weight at tile pixel p is
/// exp(-|p - centre|^2 / (2 (std_fraction * tile)^2)), then normalized per
/// canvas pixel. std_fraction must be > 0.
WeightMap gaussian_weights(const TileLayout& layout, double std_fraction = 0.25);

/// Uniform weights: every covering tile contributes 1 / coverage(p).
WeightMap uniform_weights(const TileLayout& layout);

/// Predict noise per tile: each tile sees its crop of the canvas latent and
/// (if present) the aligned crop of the conditioning canvas. Tiles are
/// evaluated in parallel; the returned order matches layout.tiles.
std::vector<ImageF> predict_tiles(const Denoiser& denoiser, const ImageF* cond_canvas,
                                  const std::vector<float>* label, const ImageF& z,
                                  int t, const TileLayout& layout);

/// Blend per-tile predictions into a canvas-sized field:
/// out(p) = sum_v w_v(p) pred_v(p), accumulated in double in layout order.
ImageF aggregate_predictions(const TileLayout& layout, const WeightMap& weights,
                             const std::vector<ImageF>& preds, int channels);

struct SamplerConfig {
    enum class Kind { ancestral, dpm };
    Kind kind = Kind::dpm;
    int steps = 50;
};

SamplerConfig::Kind sampler_kind_from_string(const std::string& name);
const char* sampler_kind_name(SamplerConfig::Kind kind);

/// One aggregated denoising step t_from -> t_to over the whole canvas: tile
/// predictions, Gaussian blend, then a single shared sampler update.
/// `step_noise` is required for ancestral steps with t_from > 1 (ancestral
/// also requires t_to == t_from - 1) and must be null for DPM steps.
ImageF mixture_step(const Denoiser& denoiser, const ImageF* cond_canvas,
                    const std::vector<float>* label, const ImageF& z, int t_from,
                    int t_to, const NoiseSchedule& sched, SamplerConfig::Kind kind,
                    const TileLayout& layout, const WeightMap& weights,
                    const ImageF* step_noise);

/// How tiles cooperate over a sampling run.
enum class Strategy {
    naive_stitch,        // independent trajectories on a non-overlapping grid
    gaussian_composite,  // independent trajectories, final Gaussian blend
    latent_average,      // per-step uniform average of clean-latent estimates
    mixture              // per-step Gaussian blend of noise predictions
};

Strategy strategy_from_string(const std::string& name);
const char* strategy_name(Strategy s);

struct TilingConfig {
    int tile = 128;
    int stride = 64;
    double std_fraction = 0.25;
};

/// Canvas geometry plus its anchor in a global latent coordinate system.
/// All noise is keyed by absolute position, so two canvases whose extents
/// overlap draw identical noise on the shared pixels.
struct CanvasSpec {
    int width = 0, height = 0, channels = 0;
    int64_t world_x = 0, world_y = 0;
};

/// Reference sampler without tiling: z_T from seeded noise, then the full
/// timestep trajectory with the denoiser applied to the whole canvas.
ImageF untiled_sample(const Denoiser& denoiser, const ImageF* cond_canvas,
                      const std::vector<float>* label, const NoiseSchedule& sched,
                      const SamplerConfig& sampler, const CanvasSpec& canvas,
                      uint64_t seed);

/// Run a full sampling trajectory under the given tiling strategy. The seed
/// fixes every noise draw; per-step strategies (mixture, latent_average)
/// share position-keyed canvas noise, while independent-trajectory
/// strategies (naive_stitch, gaussian_composite) key noise per tile. A
/// layout with exactly one tile has no independence to express, so every
/// strategy then reproduces the untiled trajectory bit for bit.
ImageF run_strategy(Strategy strategy, const Denoiser& denoiser,
                    const ImageF* cond_canvas, const std::vector<float>* label,
                    const NoiseSchedule& sched, const SamplerConfig& sampler,
                    const TilingConfig& tiling, const CanvasSpec& canvas,
                    uint64_t seed);

}  // namespace geosynth
