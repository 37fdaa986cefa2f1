// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include "doctest.h"
#include "geosynth/image.hpp"
#include "geosynth/synth.hpp"

using namespace geosynth;

namespace {

bool same_bytes(const ImageU8& a, const ImageU8& b) {
    return a.same_shape(b) &&
           std::memcmp(a.data.data(), b.data.data(), a.data.size()) == 0;
}

// Per-channel correlation (channel means removed so the shared palette
// structure does not masquerade as signal), worst channel returned.
double worst_pearson(const ImageU8& a, const ImageU8& b) {
    double worst = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        double ma = 0, mb = 0;
        const int n = a.width * a.height;
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                ma += a.at(x, y, c);
                mb += b.at(x, y, c);
            }
        ma /= n;
        mb /= n;
        double sab = 0, saa = 0, sbb = 0;
        for (int y = 0; y < a.height; ++y)
            for (int x = 0; x < a.width; ++x) {
                const double da = a.at(x, y, c) - ma, db = b.at(x, y, c) - mb;
                sab += da * db;
                saa += da * da;
                sbb += db * db;
            }
        const double r = sab / std::sqrt(saa * sbb);
        if (std::abs(r) > std::abs(worst)) worst = r;
    }
    return worst;
}

}  // namespace

TEST_SUITE("synth") {

TEST_CASE("stack: box downsample reproduces the parent centre exactly") {
    const SynthStack s = synth_pyramid(7, {10, 11, 12, 13}, 256);
    REQUIRE(s.levels.size() == 4);
    for (const ImageU8& lv : s.levels) {
        REQUIRE(lv.width == 256);
        REQUIRE(lv.height == 256);
        REQUIRE(lv.channels == 3);
    }
    for (size_t i = 1; i < s.levels.size(); ++i) {
        const ImageU8 down = box_downsample_u8(s.levels[i], 2);
        const ImageU8 want = crop(s.levels[i - 1], 64, 64, 128, 128);
        CHECK(same_bytes(down, want));
    }
}

TEST_CASE("stack: x4 downsample lands two zooms up, also exactly") {
    // This is the relation super-resolution training pairs rely on: one x4
    // stage spans two zoom levels.
    const SynthStack s = synth_pyramid(3, {14, 15, 16}, 256);
    const ImageU8 down = box_downsample_u8(s.levels[2], 4);
    const ImageU8 want = crop(s.levels[0], 96, 96, 64, 64);
    CHECK(same_bytes(down, want));
}

TEST_CASE("stack: seeded determinism and seed sensitivity") {
    const SynthStack a = synth_pyramid(11, {10, 11}, 128);
    const SynthStack b = synth_pyramid(11, {10, 11}, 128);
    const SynthStack c = synth_pyramid(12, {10, 11}, 128);
    for (size_t i = 0; i < a.levels.size(); ++i) {
        CHECK(same_bytes(a.levels[i], b.levels[i]));
        CHECK_FALSE(same_bytes(a.levels[i], c.levels[i]));
    }
}

TEST_CASE("stack: distinct seeds are nearly uncorrelated at every zoom") {
    for (uint64_t base : {300ull, 304ull}) {
        const SynthStack a = synth_pyramid(base, {10, 11, 12, 13}, 256);
        const SynthStack b = synth_pyramid(base + 1, {10, 11, 12, 13}, 256);
        for (size_t l = 0; l < a.levels.size(); ++l)
            CHECK(std::abs(worst_pearson(a.levels[l], b.levels[l])) <= 0.1);
    }
}

TEST_CASE("stack: terrain has tonal variety, not flat fill") {
    const SynthStack s = synth_pyramid(5, {10}, 128);
    std::set<uint8_t> reds;
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) reds.insert(s.levels[0].at(x, y, 0));
    CHECK(reds.size() >= 10);
}

TEST_CASE("stack: input validation") {
    CHECK_THROWS_AS(synth_pyramid(1, {}, 256), std::invalid_argument);
    CHECK_THROWS_AS(synth_pyramid(1, {10, 12}, 256), std::invalid_argument);
    CHECK_THROWS_AS(synth_pyramid(1, {11, 10}, 256), std::invalid_argument);
    CHECK_THROWS_AS(synth_pyramid(1, {10}, 0), std::invalid_argument);
    CHECK_THROWS_AS(synth_pyramid(1, {10}, 130), std::invalid_argument);
    CHECK_THROWS_AS(synth_pyramid(1, {10}, -256), std::invalid_argument);
}

TEST_CASE("palette: endpoints, interpolation and clamping") {
    uint8_t rgb[3];
    terrain_palette(0.0, rgb);
    CHECK(rgb[0] == 64);
    CHECK(rgb[1] == 80);
    CHECK(rgb[2] == 128);
    terrain_palette(1.0, rgb);
    CHECK(rgb[0] == 188);
    CHECK(rgb[1] == 192);
    CHECK(rgb[2] == 192);
    // Halfway between the 0.42 and 0.46 stops.
    terrain_palette(0.44, rgb);
    CHECK(rgb[0] == 128);
    CHECK(rgb[1] == 140);
    CHECK(rgb[2] == 152);
    uint8_t lo[3], hi[3];
    terrain_palette(-0.5, lo);
    terrain_palette(0.0, rgb);
    CHECK(std::memcmp(lo, rgb, 3) == 0);
    terrain_palette(1.5, hi);
    terrain_palette(1.0, rgb);
    CHECK(std::memcmp(hi, rgb, 3) == 0);
}

}  // TEST_SUITE
