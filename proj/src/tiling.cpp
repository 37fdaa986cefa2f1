// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/tiling.hpp"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "geosynth/kernels.hpp"
#include "geosynth/parallel.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

namespace {

std::vector<int> origins_for(int canvas, int tile, int stride) {
    std::vector<int> origins;
    for (int v = 0; v + tile < canvas; v += stride) origins.push_back(v);
    if (origins.empty() || origins.back() != canvas - tile)
        origins.push_back(canvas - tile);
    return origins;
}

}  // namespace

TileLayout build_layout(int canvas_w, int canvas_h, int tile, int stride) {
    if (tile < 1) throw std::invalid_argument("build_layout: tile must be >= 1");
    if (stride < 1 || stride > tile)
        throw std::invalid_argument("build_layout: stride must be in [1, tile]");
    if (tile > canvas_w || tile > canvas_h)
        throw std::invalid_argument("build_layout: tile larger than the canvas");
    TileLayout layout;
    layout.canvas_w = canvas_w;
    layout.canvas_h = canvas_h;
    layout.tile = tile;
    layout.stride = stride;
    const std::vector<int> xs = origins_for(canvas_w, tile, stride);
    const std::vector<int> ys = origins_for(canvas_h, tile, stride);
    layout.tiles.reserve(xs.size() * ys.size());
    for (const int y0 : ys)
        for (const int x0 : xs) layout.tiles.push_back({x0, y0, tile, tile});
    return layout;
}

namespace {

WeightMap normalized_weights(const TileLayout& layout,
                             const std::function<double(const TileLayout::Tile&,
                                                        int, int)>& raw) {
    WeightMap map;
    map.tile_weights.reserve(layout.tiles.size());
    ImageD sums(layout.canvas_w, layout.canvas_h, 1, 0.0);
    for (const auto& t : layout.tiles) {
        ImageD w(t.w, t.h, 1);
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x) {
                const double v = raw(t, x, y);
                w.at(x, y, 0) = v;
                sums.at(t.x0 + x, t.y0 + y, 0) += v;
            }
        map.tile_weights.push_back(std::move(w));
    }
    for (const double s : sums.data)
        if (!(s > 0.0))
            throw std::logic_error("tile weights: canvas pixel not covered by any tile");
    for (size_t v = 0; v < layout.tiles.size(); ++v) {
        const auto& t = layout.tiles[v];
        ImageD& w = map.tile_weights[v];
        for (int y = 0; y < t.h; ++y)
            for (int x = 0; x < t.w; ++x)
                w.at(x, y, 0) /= sums.at(t.x0 + x, t.y0 + y, 0);
    }
    return map;
}

}  // namespace

WeightMap gaussian_weights(const TileLayout& layout, double std_fraction) {
    if (!(std_fraction > 0.0))
        throw std::invalid_argument("gaussian_weights: std_fraction must be > 0");
    const double sigma = std_fraction * layout.tile;
    const double inv = 1.0 / (2.0 * sigma * sigma);
    return normalized_weights(
        layout, [inv](const TileLayout::Tile& t, int x, int y) {
            const double dx = x - (t.w - 1) / 2.0;
            const double dy = y - (t.h - 1) / 2.0;
            // Clamp the exponent so weights never underflow to zero: a pixel
            // covered by a single tile must get weight w / w == 1.0 exactly.
            const double e = std::max(-(dx * dx + dy * dy) * inv, -700.0);
            return std::exp(e);
        });
}

WeightMap uniform_weights(const TileLayout& layout) {
    return normalized_weights(layout,
                              [](const TileLayout::Tile&, int, int) { return 1.0; });
}

std::vector<ImageF> predict_tiles(const Denoiser& denoiser, const ImageF* cond_canvas,
                                  const std::vector<float>* label, const ImageF& z,
                                  int t, const TileLayout& layout) {
    if (z.width != layout.canvas_w || z.height != layout.canvas_h)
        throw std::invalid_argument("predict_tiles: latent does not match the layout");
    if (denoiser.needs_low_res() && !cond_canvas)
        throw std::invalid_argument("predict_tiles: denoiser requires conditioning");
    if (cond_canvas &&
        (cond_canvas->width != z.width || cond_canvas->height != z.height))
        throw std::invalid_argument(
            "predict_tiles: conditioning canvas must align with the latent");

    std::vector<ImageF> preds(layout.tiles.size());
    parallel_for(layout.tiles.size(), [&](size_t v) {
        const auto& tl = layout.tiles[v];
        const ImageF zc = crop(z, tl.x0, tl.y0, tl.w, tl.h);
        ImageF cc;
        ConditioningBundle bundle;
        bundle.label_embedding = label;
        if (cond_canvas) {
            cc = crop(*cond_canvas, tl.x0, tl.y0, tl.w, tl.h);
            bundle.low_res = &cc;
        }
        ImageF p = denoiser.predict(zc, t, bundle);
        if (p.width != tl.w || p.height != tl.h || p.channels != z.channels)
            throw std::logic_error("predict_tiles: prediction shape mismatch");
        preds[v] = std::move(p);
    });
    return preds;
}

ImageF aggregate_predictions(const TileLayout& layout, const WeightMap& weights,
                             const std::vector<ImageF>& preds, int channels) {
    if (preds.size() != layout.tiles.size() ||
        weights.tile_weights.size() != layout.tiles.size())
        throw std::invalid_argument(
            "aggregate_predictions: predictions/weights do not match the layout");
    ImageD acc(layout.canvas_w, layout.canvas_h, channels, 0.0);
    for (size_t v = 0; v < layout.tiles.size(); ++v) {
        const auto& tl = layout.tiles[v];
        const ImageF& p = preds[v];
        const ImageD& w = weights.tile_weights[v];
        if (p.width != tl.w || p.height != tl.h || p.channels != channels)
            throw std::invalid_argument("aggregate_predictions: bad prediction shape");
        for (int y = 0; y < tl.h; ++y) {
            const float* pr = p.row(y);
            const double* wr = w.row(y);
            double* ar = acc.row(tl.y0 + y) +
                         static_cast<size_t>(tl.x0) * channels;
            for (int x = 0; x < tl.w; ++x) {
                const double wv = wr[x];
                for (int c = 0; c < channels; ++c)
                    ar[static_cast<size_t>(x) * channels + c] +=
                        wv * pr[static_cast<size_t>(x) * channels + c];
            }
        }
    }
    ImageF out(layout.canvas_w, layout.canvas_h, channels);
    kern::ops().narrow(acc.data.data(), out.data.data(), out.size());
    return out;
}

SamplerConfig::Kind sampler_kind_from_string(const std::string& name) {
    if (name == "ancestral") return SamplerConfig::Kind::ancestral;
    if (name == "dpm") return SamplerConfig::Kind::dpm;
    throw std::invalid_argument("unknown sampler '" + name + "'");
}

const char* sampler_kind_name(SamplerConfig::Kind kind) {
    return kind == SamplerConfig::Kind::ancestral ? "ancestral" : "dpm";
}

namespace {

ImageF apply_step(const ImageF& z, const ImageF& eps, int t_from, int t_to,
                  const NoiseSchedule& sched, SamplerConfig::Kind kind,
                  const ImageF* step_noise) {
    if (kind == SamplerConfig::Kind::ancestral) {
        if (t_to != t_from - 1)
            throw std::invalid_argument(
                "ancestral steps must advance one timestep at a time");
        return sched.ddpm_step(z, eps, t_from, step_noise);
    }
    if (step_noise)
        throw std::invalid_argument("dpm steps are deterministic; no noise allowed");
    return sched.dpm_single_step(z, eps, t_from, t_to);
}

void check_sampler(const NoiseSchedule& sched, const SamplerConfig& sampler) {
    if (sampler.kind == SamplerConfig::Kind::ancestral &&
        sampler.steps != sched.T())
        throw std::invalid_argument(
            "the ancestral sampler visits every timestep: set steps = T");
    if (sampler.steps < 1 || sampler.steps > sched.T())
        throw std::invalid_argument("sampler steps outside [1, T]");
}

uint64_t init_key(uint64_t seed) { return stable_seed(seed, "latent-init"); }
uint64_t step_key(uint64_t seed, int t) { return stable_seed(seed, "latent-step", t); }

}  // namespace

ImageF mixture_step(const Denoiser& denoiser, const ImageF* cond_canvas,
                    const std::vector<float>* label, const ImageF& z, int t_from,
                    int t_to, const NoiseSchedule& sched, SamplerConfig::Kind kind,
                    const TileLayout& layout, const WeightMap& weights,
                    const ImageF* step_noise) {
    if (t_from <= t_to || t_to < 0 || t_from > sched.T())
        throw std::invalid_argument("mixture_step: need T >= t_from > t_to >= 0");
    const std::vector<ImageF> preds =
        predict_tiles(denoiser, cond_canvas, label, z, t_from, layout);
    const ImageF eps = aggregate_predictions(layout, weights, preds, z.channels);
    return apply_step(z, eps, t_from, t_to, sched, kind, step_noise);
}

Strategy strategy_from_string(const std::string& name) {
    if (name == "naive_stitch") return Strategy::naive_stitch;
    if (name == "gaussian_composite") return Strategy::gaussian_composite;
    if (name == "latent_average") return Strategy::latent_average;
    if (name == "mixture") return Strategy::mixture;
    throw std::invalid_argument("unknown tiling strategy '" + name + "'");
}

const char* strategy_name(Strategy s) {
    switch (s) {
        case Strategy::naive_stitch: return "naive_stitch";
        case Strategy::gaussian_composite: return "gaussian_composite";
        case Strategy::latent_average: return "latent_average";
        case Strategy::mixture: return "mixture";
    }
    throw std::invalid_argument("unknown tiling strategy");
}

namespace {

// Full trajectory for one independent tile. Multi-tile layouts draw fresh
// noise per tile (that is what makes the trajectories independent); a
// single-tile layout has no independence to express, so it uses the same
// canvas-position keys as the per-step strategies and therefore coincides
// with them bit-for-bit.
ImageF tile_trajectory(const Denoiser& denoiser, const ImageF* cond_canvas,
                       const std::vector<float>* label, const NoiseSchedule& sched,
                       const SamplerConfig& sampler, const TileLayout::Tile& tl,
                       const CanvasSpec& canvas, uint64_t seed, size_t tile_index,
                       bool sole_tile) {
    const int64_t wx = canvas.world_x + tl.x0, wy = canvas.world_y + tl.y0;
    ImageF z(tl.w, tl.h, canvas.channels);
    fill_gaussian(z,
                  sole_tile ? init_key(seed)
                            : stable_seed(seed, "tile-init",
                                          static_cast<uint64_t>(tile_index)),
                  wx, wy);
    ImageF cc;
    ConditioningBundle bundle;
    bundle.label_embedding = label;
    if (cond_canvas) {
        cc = crop(*cond_canvas, tl.x0, tl.y0, tl.w, tl.h);
        bundle.low_res = &cc;
    }
    const std::vector<int> ts = sched.sampler_timesteps(sampler.steps);
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        const int t_from = ts[i], t_to = ts[i + 1];
        const ImageF eps = denoiser.predict(z, t_from, bundle);
        ImageF noise;
        const ImageF* np = nullptr;
        if (sampler.kind == SamplerConfig::Kind::ancestral && t_from > 1) {
            noise = ImageF(tl.w, tl.h, canvas.channels);
            fill_gaussian(noise,
                          sole_tile ? step_key(seed, t_from)
                                    : stable_seed(seed, "tile-step",
                                                  static_cast<uint64_t>(tile_index),
                                                  static_cast<uint64_t>(t_from)),
                          wx, wy);
            np = &noise;
        }
        z = apply_step(z, eps, t_from, t_to, sched, sampler.kind, np);
    }
    return z;
}

ImageF independent_tiles(Strategy strategy, const Denoiser& denoiser,
                         const ImageF* cond_canvas, const std::vector<float>* label,
                         const NoiseSchedule& sched, const SamplerConfig& sampler,
                         const TilingConfig& tiling, const CanvasSpec& canvas,
                         uint64_t seed) {
    const bool stitch = strategy == Strategy::naive_stitch;
    const TileLayout layout =
        build_layout(canvas.width, canvas.height, tiling.tile,
                     stitch ? tiling.tile : tiling.stride);
    std::vector<ImageF> samples(layout.tiles.size());
    const bool sole_tile = layout.tiles.size() == 1;
    parallel_for(layout.tiles.size(), [&](size_t v) {
        samples[v] = tile_trajectory(denoiser, cond_canvas, label, sched, sampler,
                                     layout.tiles[v], canvas, seed, v, sole_tile);
    });
    if (stitch) {
        // Hard paste at native positions; clamped border tiles overwrite in
        // layout order.
        ImageF out(canvas.width, canvas.height, canvas.channels);
        for (size_t v = 0; v < layout.tiles.size(); ++v)
            paste(out, samples[v], layout.tiles[v].x0, layout.tiles[v].y0);
        return out;
    }
    return aggregate_predictions(layout, gaussian_weights(layout, tiling.std_fraction),
                                 samples, canvas.channels);
}

}  // namespace

ImageF untiled_sample(const Denoiser& denoiser, const ImageF* cond_canvas,
                      const std::vector<float>* label, const NoiseSchedule& sched,
                      const SamplerConfig& sampler, const CanvasSpec& canvas,
                      uint64_t seed) {
    check_sampler(sched, sampler);
    if (canvas.width < 1 || canvas.height < 1 || canvas.channels < 1)
        throw std::invalid_argument("untiled_sample: empty canvas");
    ImageF z(canvas.width, canvas.height, canvas.channels);
    fill_gaussian(z, init_key(seed), canvas.world_x, canvas.world_y);
    ConditioningBundle bundle;
    bundle.low_res = cond_canvas;
    bundle.label_embedding = label;
    const std::vector<int> ts = sched.sampler_timesteps(sampler.steps);
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        const int t_from = ts[i], t_to = ts[i + 1];
        const ImageF eps = denoiser.predict(z, t_from, bundle);
        ImageF noise;
        const ImageF* np = nullptr;
        if (sampler.kind == SamplerConfig::Kind::ancestral && t_from > 1) {
            noise = ImageF(canvas.width, canvas.height, canvas.channels);
            fill_gaussian(noise, step_key(seed, t_from), canvas.world_x,
                          canvas.world_y);
            np = &noise;
        }
        z = apply_step(z, eps, t_from, t_to, sched, sampler.kind, np);
    }
    return z;
}

ImageF run_strategy(Strategy strategy, const Denoiser& denoiser,
                    const ImageF* cond_canvas, const std::vector<float>* label,
                    const NoiseSchedule& sched, const SamplerConfig& sampler,
                    const TilingConfig& tiling, const CanvasSpec& canvas,
                    uint64_t seed) {
    check_sampler(sched, sampler);
    if (canvas.width < 1 || canvas.height < 1 || canvas.channels < 1)
        throw std::invalid_argument("run_strategy: empty canvas");
    if (cond_canvas && (cond_canvas->width != canvas.width ||
                        cond_canvas->height != canvas.height))
        throw std::invalid_argument(
            "run_strategy: conditioning canvas must align with the latent");

    if (strategy == Strategy::naive_stitch ||
        strategy == Strategy::gaussian_composite)
        return independent_tiles(strategy, denoiser, cond_canvas, label, sched,
                                 sampler, tiling, canvas, seed);

    const TileLayout layout =
        build_layout(canvas.width, canvas.height, tiling.tile, tiling.stride);
    // Uniform weights realize per-step clean-latent averaging: the clean
    // estimate is the same affine map of (z, eps) on every tile, so the
    // least-squares average of the estimates equals aggregating eps with
    // uniform weights.
    const WeightMap weights = strategy == Strategy::mixture
                                  ? gaussian_weights(layout, tiling.std_fraction)
                                  : uniform_weights(layout);

    ImageF z(canvas.width, canvas.height, canvas.channels);
    fill_gaussian(z, init_key(seed), canvas.world_x, canvas.world_y);
    const std::vector<int> ts = sched.sampler_timesteps(sampler.steps);
    for (size_t i = 0; i + 1 < ts.size(); ++i) {
        const int t_from = ts[i], t_to = ts[i + 1];
        ImageF noise;
        const ImageF* np = nullptr;
        if (sampler.kind == SamplerConfig::Kind::ancestral && t_from > 1) {
            noise = ImageF(canvas.width, canvas.height, canvas.channels);
            fill_gaussian(noise, step_key(seed, t_from), canvas.world_x,
                          canvas.world_y);
            np = &noise;
        }
        z = mixture_step(denoiser, cond_canvas, label, z, t_from, t_to, sched,
                         sampler.kind, layout, weights, np);
    }
    return z;
}

}  // namespace geosynth
