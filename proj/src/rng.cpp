// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/rng.hpp"

#include <cmath>

namespace geosynth {

uint64_t mix64(uint64_t x) {
    // splitmix64 finalizer (Steele, Lea, Flood 2014 / Stafford mix13).
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

uint64_t hash_combine(uint64_t h, uint64_t v) { return mix64(h ^ mix64(v)); }

uint64_t stable_seed(uint64_t global_seed, std::string_view label, uint64_t a,
                     uint64_t b, uint64_t c) {
    // FNV-1a over the label, then mix in the coordinates in order.
    uint64_t h = 0xcbf29ce484222325ull;
    for (const char ch : label) {
        h ^= static_cast<unsigned char>(ch);
        h *= 0x100000001b3ull;
    }
    h = hash_combine(global_seed, h);
    h = hash_combine(h, a);
    h = hash_combine(h, b);
    h = hash_combine(h, c);
    return h;
}

namespace {

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

// [0, 1) with 53 random bits.
inline double to_unit(uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

// (0, 1]: never zero, safe under log().
inline double to_unit_open(uint64_t x) {
    return static_cast<double>((x >> 11) + 1) * 0x1.0p-53;
}

}  // namespace

Rng::Rng(uint64_t seed) {
    // Seed-expand with splitmix64 as recommended for xoshiro.
    uint64_t s = seed;
    for (auto& word : s_) {
        s += 0x9e3779b97f4a7c15ull;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        word = z ^ (z >> 31);
    }
}

uint64_t Rng::next() {
    // xoshiro256++
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() { return to_unit(next()); }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
    // Bounded draw by rejection; unbiased.
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<int64_t>(next());  // full 64-bit range
    const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t r;
    do {
        r = next();
    } while (r >= limit);
    return lo + static_cast<int64_t>(r % span);
}

double Rng::gaussian() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = to_unit_open(next());
    const double u2 = to_unit(next());
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

float keyed_gaussian(uint64_t key) {
    const double u1 = to_unit_open(mix64(key));
    const double u2 = to_unit(mix64(key ^ 0x5851f42d4c957f2dull));
    const double r = std::sqrt(-2.0 * std::log(u1));
    return static_cast<float>(
        r * std::cos(6.283185307179586476925286766559 * u2));
}

double keyed_uniform(uint64_t key) { return to_unit(mix64(key)); }

void fill_gaussian(ImageF& img, uint64_t base_key, int64_t world_x0,
                   int64_t world_y0) {
    for (int y = 0; y < img.height; ++y) {
        const uint64_t row_key =
            hash_combine(base_key, static_cast<uint64_t>(world_y0 + y));
        float* row = img.row(y);
        for (int x = 0; x < img.width; ++x) {
            const uint64_t px_key =
                hash_combine(row_key, static_cast<uint64_t>(world_x0 + x));
            for (int c = 0; c < img.channels; ++c)
                row[static_cast<size_t>(x) * img.channels + c] =
                    keyed_gaussian(hash_combine(px_key, static_cast<uint64_t>(c)));
        }
    }
}

}  // namespace geosynth
