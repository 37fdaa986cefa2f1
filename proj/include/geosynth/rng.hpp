// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

#include "geosynth/image.hpp"

namespace geosynth {

// All randomness in the project flows through the helpers below. We avoid
// std::random distributions on purpose: their output is not pinned by the
// standard, so results would differ between standard libraries. Everything
// here is exact integer arithmetic plus our own Box-Muller transform, which
// makes every artifact byte-reproducible from its seeds alone.

/// splitmix64 finalizer: a high-quality 64 -> 64 bit mixer.
uint64_t mix64(uint64_t x);

/// Fold one more word into a running hash (order-sensitive).
uint64_t hash_combine(uint64_t h, uint64_t v);

/// Stable seed for a named stream: hashes the label bytes and up to three
/// integer coordinates into the global seed. Used for tile seeds
/// (zoom, x, y, stage) and any other derived stream.
uint64_t stable_seed(uint64_t global_seed, std::string_view label,
                     uint64_t a = 0, uint64_t b = 0, uint64_t c = 0);

/// Sequential stream (xoshiro256++), for draws that are naturally ordered
/// (shuffles, subset sampling, synthetic data).
class Rng {
public:
    explicit Rng(uint64_t seed);
    uint64_t next();
    /// Uniform double in [0, 1).
    double uniform();
    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);
    /// Uniform integer in [lo, hi] (inclusive).
    int64_t uniform_int(int64_t lo, int64_t hi);
    /// Standard normal via Box-Muller (pairs cached).
    double gaussian();

private:
    uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Standard normal value fully determined by a single 64-bit key.
/// Keys are position hashes, so the value at a world coordinate is the same
/// no matter which tile, chunk or thread asks for it.
float keyed_gaussian(uint64_t key);

/// Uniform in [0,1) fully determined by a key.
double keyed_uniform(uint64_t key);

/// Fill img with keyed unit normals. The value at pixel (x, y, c) is keyed by
/// (base_key, world_x0 + x, world_y0 + y, c): world-anchored, so overlapping
/// fills of different windows agree on their intersection.
void fill_gaussian(ImageF& img, uint64_t base_key, int64_t world_x0 = 0,
                   int64_t world_y0 = 0);

}  // namespace geosynth
