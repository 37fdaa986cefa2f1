// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "geosynth/codec.hpp"
#include "geosynth/png_io.hpp"
#include "geosynth/rng.hpp"

using namespace geosynth;

namespace {

// Smooth random image: sum of a few random sinusoids per channel.
ImageF smooth_image(int w, int h, uint64_t seed) {
    ImageF img(w, h, 3);
    Rng rng(seed);
    double ax[6], ay[6], ph[6], amp[6];
    for (int i = 0; i < 6; ++i) {
        ax[i] = rng.uniform(0.02, 0.35);
        ay[i] = rng.uniform(0.02, 0.35);
        ph[i] = rng.uniform(0.0, 6.28);
        amp[i] = rng.uniform(0.05, 0.2);
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                const int i = 2 * c, j = 2 * c + 1;
                const double v = 0.5 + amp[i] * std::sin(ax[i] * x + ay[i] * y + ph[i]) +
                                 amp[j] * std::cos(ax[j] * x - ay[j] * y + ph[j]);
                img.at(x, y, c) = static_cast<float>(v);
            }
    return img;
}

float max_abs_diff(const ImageF& a, const ImageF& b) {
    REQUIRE(a.same_shape(b));
    float m = 0.0f;
    for (size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

LinearLatentCodec fitted_codec(int C = 4) {
    std::vector<ImageF> train;
    for (uint64_t s = 0; s < 6; ++s) train.push_back(smooth_image(64, 64, 100 + s));
    return fit_codec(train, C, 50000, 7);
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("shapes, domain checks and latent statistics") {
    const auto codec = fitted_codec();
    CHECK(codec.channels() == 4);
    const ImageF img = smooth_image(32, 48, 1);
    const ImageF z = codec.encode(img);
    CHECK(z.width == 8);
    CHECK(z.height == 12);
    CHECK(z.channels == 4);
    const ImageF back = codec.decode(z);
    CHECK(back.width == 32);
    CHECK(back.height == 48);

    CHECK_THROWS_AS(codec.encode(ImageF(30, 32, 3)), std::invalid_argument);
    CHECK_THROWS_AS(codec.encode(ImageF(32, 32, 1)), std::invalid_argument);
    CHECK_THROWS_AS(codec.decode(ImageF(8, 8, 3)), std::invalid_argument);
    CHECK_THROWS_AS(LinearLatentCodec().encode(ImageF(8, 8, 3)), std::logic_error);

    // Whitening: on training-like data, latent channels are O(1).
    double ss = 0.0;
    for (const float v : z.data) ss += static_cast<double>(v) * v;
    const double rms = std::sqrt(ss / static_cast<double>(z.size()));
    CHECK(rms > 0.05);
    CHECK(rms < 5.0);
}

TEST_CASE("encode inverts decode on the latent side") {
    const auto codec = fitted_codec();
    ImageF z(16, 16, 4);
    fill_gaussian(z, 99);
    const ImageF z2 = codec.encode(codec.decode(z));
    CHECK(max_abs_diff(z, z2) < 1e-4f);
}

TEST_CASE("decode is affine: combinations with unit coefficient sum commute") {
    const auto codec = fitted_codec();
    ImageF z1(8, 8, 4), z2(8, 8, 4);
    fill_gaussian(z1, 5);
    fill_gaussian(z2, 6);
    const double alpha = 0.3;
    ImageF mix(8, 8, 4);
    for (size_t i = 0; i < mix.size(); ++i)
        mix.data[i] = static_cast<float>(alpha * z1.data[i] + (1.0 - alpha) * z2.data[i]);
    const ImageF d1 = codec.decode(z1), d2 = codec.decode(z2);
    const ImageF dmix = codec.decode(mix);
    float worst = 0.0f;
    for (size_t i = 0; i < dmix.size(); ++i) {
        const double want = alpha * d1.data[i] + (1.0 - alpha) * d2.data[i];
        worst = std::max(worst, static_cast<float>(std::abs(want - dmix.data[i])));
    }
    CHECK(worst < 1e-5f);
}

TEST_CASE("windowed decode equals whole-image decode") {
    const auto codec = fitted_codec();
    ImageF z(96, 64, 4);
    fill_gaussian(z, 42);
    const ImageF whole = codec.decode(z);
    for (const DecodeTiling t : {DecodeTiling{512, 0.25}, DecodeTiling{128, 0.25},
                                 DecodeTiling{64, 0.5}, DecodeTiling{48, 0.0}}) {
        const ImageF tiled = codec.tiled_decode(z, t);
        INFO("window ", t.window, " overlap ", t.overlap);
        CHECK(max_abs_diff(whole, tiled) <= 1e-6f);
    }
    CHECK_THROWS_AS(codec.tiled_decode(z, DecodeTiling{130, 0.25}),
                    std::invalid_argument);
    CHECK_THROWS_AS(codec.tiled_decode(z, DecodeTiling{128, 0.95}),
                    std::invalid_argument);
}

TEST_CASE("fit recovers a planted patch subspace") {
    // Patches generated from 3 fixed basis directions + mean; a 3-channel
    // codec must reconstruct them almost exactly.
    Rng rng(11);
    ImageF img(64, 64, 3);
    double basis[3][48];
    Rng brng(12);
    for (auto& b : basis) {
        double norm = 0.0;
        for (double& v : b) {
            v = brng.gaussian();
            norm += v * v;
        }
        for (double& v : b) v /= std::sqrt(norm);
    }
    for (int py = 0; py < 16; ++py)
        for (int px = 0; px < 16; ++px) {
            const double w0 = rng.gaussian(), w1 = 0.5 * rng.gaussian(),
                         w2 = 0.25 * rng.gaussian();
            int k = 0;
            for (int dy = 0; dy < 4; ++dy)
                for (int dx = 0; dx < 4; ++dx)
                    for (int c = 0; c < 3; ++c) {
                        img.at(px * 4 + dx, py * 4 + dy, c) = static_cast<float>(
                            0.5 + w0 * basis[0][k] + w1 * basis[1][k] + w2 * basis[2][k]);
                        ++k;
                    }
        }
    const auto codec = fit_codec({img}, 3, 100000, 0);
    const ImageF rec = codec.decode(codec.encode(img));
    CHECK(max_abs_diff(rec, img) < 1e-4f);
}

TEST_CASE("block-constant imagery round-trips through a 4-channel codec") {
    // Nearest-neighbour x4 upsamples produce constant 4x4 patches, a
    // 4-dimensional patch family (3 colors + mean). This property is what
    // lets a coarse conditioning image survive encode/decode unchanged.
    std::vector<ImageF> train;
    for (uint64_t s = 0; s < 4; ++s) {
        const ImageF low = smooth_image(32, 32, 200 + s);
        train.push_back(upsample_nearest(low, 4));
    }
    const auto codec = fit_codec(train, 4, 80000, 3);
    const ImageF probe = upsample_nearest(smooth_image(24, 24, 300), 4);
    const ImageF rec = codec.decode(codec.encode(probe));
    CHECK(max_abs_diff(rec, probe) < 5e-4f);
}

TEST_CASE("model file round-trips bit-exactly") {
    const auto codec = fitted_codec();
    const auto path = std::filesystem::temp_directory_path() / "geosynth_codec_test.bin";
    codec.save(path);
    const auto back = LinearLatentCodec::load(path);
    CHECK(back.channels() == codec.channels());
    CHECK(back.mean() == codec.mean());
    CHECK(back.enc() == codec.enc());
    CHECK(back.dec() == codec.dec());
    // Corrupt magic must be rejected.
    {
        std::ofstream f(path, std::ios::binary);
        const uint32_t junk[3] = {0xdeadbeef, 1, 4};
        f.write(reinterpret_cast<const char*>(junk), sizeof(junk));
    }
    CHECK_THROWS_AS(LinearLatentCodec::load(path), io_error);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(LinearLatentCodec::load(path), io_error);
    CHECK_THROWS_AS(fit_codec({}, 4), std::invalid_argument);
    CHECK_THROWS_AS(fit_codec({smooth_image(8, 8, 1)}, 49), std::invalid_argument);
}

}  // TEST_SUITE
