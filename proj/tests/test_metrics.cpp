// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "doctest.h"
#include "geosynth/metrics.hpp"
#include "geosynth/parallel.hpp"
#include "geosynth/rng.hpp"
#include "geosynth/tiling.hpp"

using namespace geosynth;

namespace {

std::vector<std::vector<float>> gaussian_features(int n, int d, uint64_t seed,
                                                  float shift = 0.0f) {
    Rng rng(seed);
    std::vector<std::vector<float>> out(n, std::vector<float>(d));
    for (auto& row : out)
        for (float& v : row) v = static_cast<float>(rng.gaussian()) + shift;
    return out;
}

FeatureStats diag_stats(std::vector<double> mean, double diag) {
    FeatureStats s;
    s.n = 1000;
    const int d = static_cast<int>(mean.size());
    s.mean = std::move(mean);
    s.cov.assign(static_cast<size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) s.cov[static_cast<size_t>(i) * d + i] = diag;
    return s;
}

ImageU8 patterned_rgb(int side) {
    ImageU8 img(side, side, 3);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = static_cast<uint8_t>((x * 7 + y * 13 + c * 29) & 255);
    return img;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("stats: hand-computed mean and covariance") {
    const std::vector<std::vector<float>> f = {
        {0.f, 0.f}, {2.f, 0.f}, {0.f, 2.f}, {2.f, 2.f}};
    const FeatureStats s = compute_stats(f);
    CHECK(s.n == 4);
    REQUIRE(s.dim() == 2);
    CHECK(s.mean[0] == doctest::Approx(1.0));
    CHECK(s.mean[1] == doctest::Approx(1.0));
    // Sum of squared deviations is 4 per axis; n-1 normalization gives 4/3.
    CHECK(s.cov[0] == doctest::Approx(4.0 / 3));
    CHECK(s.cov[3] == doctest::Approx(4.0 / 3));
    CHECK(s.cov[1] == doctest::Approx(0.0));
    CHECK(s.cov[2] == doctest::Approx(0.0));
}

TEST_CASE("stats: input validation") {
    CHECK_THROWS_AS(compute_stats({}), std::invalid_argument);
    CHECK_THROWS_AS(compute_stats({{1.f, 2.f}}), std::invalid_argument);
    CHECK_THROWS_AS(compute_stats({{1.f, 2.f}, {1.f}}), std::invalid_argument);
    CHECK_THROWS_AS(compute_stats({{}, {}}), std::invalid_argument);
}

TEST_CASE("frechet: identical distributions score zero") {
    const auto f = gaussian_features(300, 6, stable_seed(1, "frechet-self"));
    const FeatureStats s = compute_stats(f);
    CHECK(std::abs(frechet_distance(s, s)) <= 1e-6);
}

TEST_CASE("frechet: pure mean shift scores its squared norm") {
    FeatureStats a = diag_stats({0.0, 0.0, 0.0}, 0.5);
    FeatureStats b = diag_stats({1.0, -2.0, 0.5}, 0.5);
    const double want = 1.0 + 4.0 + 0.25;
    CHECK(frechet_distance(a, b) == doctest::Approx(want).epsilon(1e-6));
}

TEST_CASE("frechet: unit covariance against a point mass scores d") {
    const int d = 7;
    FeatureStats a = diag_stats(std::vector<double>(d, 0.3), 0.0);
    FeatureStats b = diag_stats(std::vector<double>(d, 0.3), 1.0);
    CHECK(frechet_distance(a, b) == doctest::Approx(double(d)).epsilon(1e-6));
}

TEST_CASE("frechet: symmetric in its arguments") {
    const auto fa = gaussian_features(200, 5, stable_seed(2, "frechet-a"));
    const auto fb = gaussian_features(220, 5, stable_seed(2, "frechet-b"), 0.4f);
    const FeatureStats a = compute_stats(fa), b = compute_stats(fb);
    const double ab = frechet_distance(a, b), ba = frechet_distance(b, a);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-9));
    CHECK(ab > 0.0);
}

TEST_CASE("frechet: rejects malformed inputs") {
    FeatureStats a = diag_stats({0.0, 0.0}, 1.0);
    FeatureStats b3 = diag_stats({0.0, 0.0, 0.0}, 1.0);
    CHECK_THROWS_AS(frechet_distance(a, b3), std::invalid_argument);

    FeatureStats neg = diag_stats({0.0, 0.0}, -1.0);  // not a covariance
    CHECK_THROWS_AS(frechet_distance(a, neg), std::invalid_argument);

    FeatureStats asym = diag_stats({0.0, 0.0}, 1.0);
    asym.cov[1] = 0.5;  // upper off-diagonal only
    CHECK_THROWS_AS(frechet_distance(a, asym), std::invalid_argument);
}

TEST_CASE("kid: two-point closed form") {
    // Both sets hold two copies of a single vector, so every subset pair is
    // the same and the unbiased estimate is k(x,x) + k(y,y) - 2 k(x,y).
    const std::vector<std::vector<float>> a = {{1.f, 0.f}, {1.f, 0.f}};
    const std::vector<std::vector<float>> b = {{0.f, 1.f}, {0.f, 1.f}};
    const KidResult r = kid(a, b, /*subset_size=*/2, /*n_subsets=*/4, 7);
    // k(x,x) = k(y,y) = (0.5 + 1)^3 = 3.375, k(x,y) = 1^3 = 1.
    CHECK(r.mean == doctest::Approx(3.375 + 3.375 - 2.0).epsilon(1e-12));
    CHECK(std::abs(r.std_error) <= 1e-12);
    CHECK(r.subset_size == 2);
    CHECK(r.n_subsets == 4);
}

TEST_CASE("kid: near zero on same-distribution draws") {
    const auto a = gaussian_features(400, 8, stable_seed(3, "kid-a"));
    const auto b = gaussian_features(400, 8, stable_seed(3, "kid-b"));
    const KidResult r = kid(a, b, 100, 20, 11);
    CHECK(r.std_error > 0.0);
    CHECK(std::abs(r.mean) <= 3.0 * r.std_error);
}

TEST_CASE("kid: detects a shifted distribution") {
    const auto a = gaussian_features(400, 8, stable_seed(4, "kid-a"));
    const auto b = gaussian_features(400, 8, stable_seed(4, "kid-b"), 1.5f);
    const KidResult r = kid(a, b, 100, 20, 11);
    CHECK(r.mean > 10.0 * r.std_error);
}

TEST_CASE("kid: deterministic for a fixed seed, sensitive to it") {
    const auto a = gaussian_features(300, 4, stable_seed(5, "kid-a"));
    const auto b = gaussian_features(300, 4, stable_seed(5, "kid-b"));
    const KidResult r1 = kid(a, b, 50, 10, 21);
    const KidResult r2 = kid(a, b, 50, 10, 21);
    const KidResult r3 = kid(a, b, 50, 10, 22);
    CHECK(r1.mean == r2.mean);
    CHECK(r1.std_error == r2.std_error);
    CHECK(r1.mean != r3.mean);
}

TEST_CASE("kid: input validation") {
    const auto a = gaussian_features(50, 4, 1);
    const auto b = gaussian_features(50, 4, 2);
    CHECK_THROWS_AS(kid(a, b, 51, 10), std::invalid_argument);  // too few samples
    CHECK_THROWS_AS(kid(a, b, 1, 10), std::invalid_argument);
    CHECK_THROWS_AS(kid(a, b, 10, 1), std::invalid_argument);
    auto ragged = a;
    ragged[7].pop_back();
    CHECK_THROWS_AS(kid(ragged, b, 10, 5), std::invalid_argument);
}

TEST_CASE("extractor: deterministic and seed-keyed") {
    const ImageU8 img = patterned_rgb(96);
    RandomProjectionExtractor e1(256, 32, 17), e2(256, 32, 17), e3(256, 32, 18);
    CHECK(e1.dim() == 256);
    const auto f1 = e1.extract(img), f2 = e2.extract(img), f3 = e3.extract(img);
    REQUIRE(f1.size() == 256);
    CHECK(f1 == f2);
    CHECK(f1 != f3);
    double norm = 0.0;
    for (float v : f1) norm += double(v) * v;
    CHECK(norm > 0.0);
}

TEST_CASE("extractor: zero image maps to zero features") {
    const ImageU8 img(64, 64, 3);  // all zeros
    RandomProjectionExtractor e(128, 32, 9);
    for (float v : e.extract(img)) CHECK(v == 0.0f);
}

TEST_CASE("extractor: rejects bad construction and non-RGB input") {
    CHECK_THROWS_AS(RandomProjectionExtractor(0, 32, 1), std::invalid_argument);
    CHECK_THROWS_AS(RandomProjectionExtractor(64, 0, 1), std::invalid_argument);
    RandomProjectionExtractor e(64, 16, 1);
    CHECK_THROWS_AS(e.extract(ImageU8(32, 32, 1)), std::invalid_argument);
    CHECK_THROWS_AS(e.extract(ImageU8()), std::invalid_argument);
}

TEST_CASE("extractor: batch extraction preserves order across worker counts") {
    std::vector<ImageU8> images;
    Rng rng(stable_seed(6, "batch-imgs"));
    for (int i = 0; i < 12; ++i) {
        ImageU8 img(48, 48, 3);
        for (auto& v : img.data)
            v = static_cast<uint8_t>(rng.uniform_int(0, 255));
        images.push_back(std::move(img));
    }
    RandomProjectionExtractor e(128, 24, 3);

    std::vector<std::vector<float>> serial;
    for (const auto& img : images) serial.push_back(e.extract(img));

    const int before = max_threads();
    set_max_threads(4);
    const auto parallel = extract_features(e, images);
    set_max_threads(before);
    CHECK(parallel == serial);
}

TEST_CASE("eval split: 49 overlapping half-stride windows") {
    const ImageU8 src = patterned_rgb(2048);
    const auto tiles = eval_split(src);
    REQUIRE(tiles.size() == 49);
    for (int i = 0; i < 49; ++i) {
        const int x0 = 256 * (i % 7), y0 = 256 * (i / 7);
        REQUIRE(tiles[i].width == 512);
        REQUIRE(tiles[i].height == 512);
        REQUIRE(tiles[i].channels == 3);
        for (auto [xx, yy] : {std::pair{0, 0}, {511, 0}, {0, 511}, {511, 511},
                              {137, 402}}) {
            for (int c = 0; c < 3; ++c)
                CHECK(tiles[i].at(xx, yy, c) == src.at(x0 + xx, y0 + yy, c));
        }
    }
    CHECK_THROWS_AS(eval_split(ImageU8(1024, 1024, 3)), std::invalid_argument);
}

TEST_CASE("seam energy: constant image reports ratio one") {
    const ImageF img(96, 96, 2, 0.37f);
    const TileLayout l = build_layout(96, 96, 32, 16);
    const SeamReport r = seam_energy(img, l);
    CHECK(r.boundary == 0.0);
    CHECK(r.interior == 0.0);
    CHECK(r.ratio == 1.0);
}

TEST_CASE("seam energy: a step at a cut line is pure boundary signal") {
    // Non-overlapping 32-tiles on a 96-wide canvas cut at x = 32 and 64. A
    // unit step at x = 32 produces |second difference| = 1 exactly on the
    // two stencils straddling that cut and zero everywhere else.
    ImageF img(96, 32, 1);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 96; ++x) img.at(x, y, 0) = x < 32 ? 0.0f : 1.0f;
    const TileLayout l = build_layout(96, 32, 32, 32);
    const SeamReport r = seam_energy(img, l);
    // Per row, four boundary stencils: two at the live cut (value 1) and two
    // at the silent cut x = 64 (value 0).
    CHECK(r.boundary == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(r.interior == 0.0);
    CHECK(std::isinf(r.ratio));
}

TEST_CASE("seam energy: smooth fields are near ratio one") {
    ImageF img(96, 96, 1);
    for (int y = 0; y < 96; ++y)
        for (int x = 0; x < 96; ++x)
            img.at(x, y, 0) = std::sin(0.2f * x + 0.3f * y);
    const TileLayout l = build_layout(96, 96, 32, 16);
    const SeamReport r = seam_energy(img, l);
    CHECK(r.interior > 0.0);
    CHECK(r.ratio == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("seam energy: input validation") {
    const TileLayout l = build_layout(96, 96, 32, 16);
    CHECK_THROWS_AS(seam_energy(ImageF(64, 64, 1), l), std::invalid_argument);
    // A single-tile layout has no interior boundaries to evaluate.
    const TileLayout single = build_layout(96, 96, 96, 96);
    CHECK_THROWS_AS(seam_energy(ImageF(96, 96, 1), single), std::invalid_argument);
}

}  // TEST_SUITE
