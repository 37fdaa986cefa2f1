// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#include "geosynth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "geosynth/parallel.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

namespace {

// Colour stops for the terrain ramp: height -> RGB.
struct Stop {
    double h;
    uint8_t rgb[3];
};
// Channel values stay inside [64, 192] so refinement detail always has
// headroom and is never silently flattened near black or white.
constexpr Stop kStops[] = {
    {0.00, {64, 80, 128}},   // deep water
    {0.42, {72, 104, 152}},  // shallow water
    {0.46, {184, 176, 152}}, // shore
    {0.52, {104, 140, 88}},  // lowland
    {0.70, {80, 112, 80}},   // forest
    {0.85, {136, 128, 120}}, // rock
    {1.00, {188, 192, 192}}, // snow
};

// Lattice value in [0, 1) for one octave cell.
double lattice(uint64_t octave_key, int64_t cx, int64_t cy) {
    return keyed_uniform(hash_combine(hash_combine(octave_key, cx), cy));
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

// Classic value noise: bilinear blend of hashed lattice corners.
double value_noise(uint64_t octave_key, double x, double y) {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto cx = static_cast<int64_t>(fx), cy = static_cast<int64_t>(fy);
    const double tx = smooth(x - fx), ty = smooth(y - fy);
    const double v00 = lattice(octave_key, cx, cy);
    const double v10 = lattice(octave_key, cx + 1, cy);
    const double v01 = lattice(octave_key, cx, cy + 1);
    const double v11 = lattice(octave_key, cx + 1, cy + 1);
    const double a = v00 + (v10 - v00) * tx;
    const double b = v01 + (v11 - v01) * tx;
    return a + (b - a) * ty;
}

// Coarsest level: octave value noise through the terrain ramp.
ImageU8 base_level(uint64_t seed, int side) {
    constexpr int kOctaves = 5;
    constexpr double kPersistence = 0.65;
    double amp_sum = 0.0, amp = 1.0;
    for (int o = 0; o < kOctaves; ++o, amp *= kPersistence) amp_sum += amp;

    ImageU8 img(side, side, 3);
    parallel_for(static_cast<size_t>(side), [&](size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < side; ++x) {
            double h = 0.0, a = 1.0;
            for (int o = 0; o < kOctaves; ++o, a *= kPersistence) {
                const uint64_t key = stable_seed(seed, "synth-lattice", o);
                // 16 cells across the image at the first octave, doubling;
                // enough independent blobs that two seeds decorrelate.
                const double cells = 16.0 * double(1 << o);
                h += a * value_noise(key, (x + 0.5) * cells / side,
                                     (y + 0.5) * cells / side);
            }
            uint8_t rgb[3];
            terrain_palette(h / amp_sum, rgb);
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = rgb[c];
        }
    });
    return img;
}

// Refine the central half of `src` into a full-side level. Every parent
// pixel becomes a 2x2 block carrying two antisymmetric detail pairs
// (+d0/-d0, +d1/-d1), so the block's integer sum is exactly 4x the parent
// value and its 2x2 box average is exact in integer arithmetic. Pair
// orientation alternates by a hash bit to avoid a global stripe direction,
// and the amplitude is clamped to the parent's headroom so no member can
// leave [0, 255].
ImageU8 refine_level(const ImageU8& src, uint64_t seed, int zoom, int amplitude) {
    const int side = src.width;
    const int half = side / 2, off = side / 4;
    ImageU8 out(side, side, 3);
    const uint64_t level_key = stable_seed(seed, "synth-detail", zoom);
    parallel_for(static_cast<size_t>(half), [&](size_t row) {
        const int v = static_cast<int>(row);
        for (int u = 0; u < half; ++u) {
            const uint64_t pixel_key =
                hash_combine(hash_combine(level_key, u), v);
            // Shared luminance-like detail shape for the block.
            double r[2];
            for (int k = 0; k < 2; ++k)
                r[k] = 2.0 * keyed_uniform(hash_combine(pixel_key, k)) - 1.0;
            const bool vertical = keyed_uniform(hash_combine(pixel_key, 2)) < 0.5;
            for (int c = 0; c < 3; ++c) {
                const int p = src.at(off + u, off + v, c);
                const int a = std::min({amplitude, p, 255 - p});
                const int d0 = static_cast<int>(std::lround(r[0] * a));
                const int d1 = static_cast<int>(std::lround(r[1] * a));
                int d[4];  // row-major block order: (0,0) (1,0) (0,1) (1,1)
                if (vertical) {
                    d[0] = d0, d[2] = -d0;
                    d[1] = d1, d[3] = -d1;
                } else {
                    d[0] = d0, d[1] = -d0;
                    d[2] = d1, d[3] = -d1;
                }
                out.at(2 * u, 2 * v, c) = static_cast<uint8_t>(p + d[0]);
                out.at(2 * u + 1, 2 * v, c) = static_cast<uint8_t>(p + d[1]);
                out.at(2 * u, 2 * v + 1, c) = static_cast<uint8_t>(p + d[2]);
                out.at(2 * u + 1, 2 * v + 1, c) = static_cast<uint8_t>(p + d[3]);
            }
        }
    });
    return out;
}

}  // namespace

void terrain_palette(double height, uint8_t rgb[3]) {
    const double h = std::clamp(height, 0.0, 1.0);
    const Stop* lo = &kStops[0];
    const Stop* hi = &kStops[0];
    for (const Stop& s : kStops) {
        if (s.h <= h) lo = &s;
        if (s.h >= h) {
            hi = &s;
            break;
        }
    }
    const double span = hi->h - lo->h;
    const double t = span > 0.0 ? (h - lo->h) / span : 0.0;
    for (int c = 0; c < 3; ++c)
        rgb[c] = static_cast<uint8_t>(
            std::lround(lo->rgb[c] + t * (hi->rgb[c] - lo->rgb[c])));
}

SynthStack synth_pyramid(uint64_t seed, const std::vector<int>& zooms, int side) {
    if (zooms.empty())
        throw std::invalid_argument("synth_pyramid: need at least one zoom");
    for (size_t i = 1; i < zooms.size(); ++i)
        if (zooms[i] != zooms[i - 1] + 1)
            throw std::invalid_argument(
                "synth_pyramid: zooms must be contiguous ascending");
    if (side < 4 || side % 4 != 0)
        throw std::invalid_argument("synth_pyramid: side must be a multiple of 4");

    SynthStack stack;
    stack.side = side;
    stack.zooms = zooms;
    stack.levels.reserve(zooms.size());
    stack.levels.push_back(base_level(seed, side));
    for (size_t i = 1; i < zooms.size(); ++i) {
        // Self-similar refinement: constant pixel-scale detail amplitude, so
        // deep levels carry as much fresh signal as shallow ones and stacks
        // from different seeds stay decorrelated at every zoom.
        stack.levels.push_back(
            refine_level(stack.levels[i - 1], seed, zooms[i], /*amplitude=*/60));
    }
    return stack;
}

}  // namespace geosynth
