// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "geosynth/image.hpp"

namespace geosynth {

/// A concentric multi-zoom stack over one ground location: every level has
/// the same pixel side, each zoom doubles the ground resolution, so level
/// i+1 depicts the central half (per axis) of level i in twice the detail.
struct SynthStack {
    int side = 0;
    std::vector<int> zooms;       // ascending, contiguous
    std::vector<ImageU8> levels;  // RGB, side x side, one per zoom
};

/// Procedurally generate a stack of fractal-terrain images with exact
/// cross-scale consistency: the 2x2 box average of level i+1 reproduces the
/// central side/2 crop of level i byte-for-byte. The coarsest level is
/// octave value noise through a terrain colour ramp; each finer level
/// refines every parent pixel into a 2x2 block whose integer sum is exactly
/// 4x the parent value, with the remaining degrees of freedom filled by
/// seeded detail noise whose amplitude halves per zoom.
///
/// The exactness makes (4x box-downsample, original) pairs perfect training
/// and evaluation ground truth for super-resolution denoisers.
///
/// zooms must be non-empty, contiguous and ascending; side must be a
/// positive multiple of 4. Throws std::invalid_argument otherwise.
SynthStack synth_pyramid(uint64_t seed, const std::vector<int>& zooms,
                         int side = 2048);

/// The terrain colour ramp used for the coarsest level: piecewise-linear
/// RGB over a height in [0, 1] (water through sand, vegetation, rock,
/// snow). Exposed for tests; height is clamped to [0, 1].
void terrain_palette(double height, uint8_t rgb[3]);

}  // namespace geosynth
