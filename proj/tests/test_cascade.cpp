// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <memory>
#include <set>
#include <vector>

#include "doctest.h"
#include "geosynth/cascade.hpp"
#include "geosynth/kernels.hpp"
#include "geosynth/parallel.hpp"
#include "geosynth/rng.hpp"
#include "geosynth/synth.hpp"

using namespace geosynth;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("cascade");

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("geosynth_test_" + std::to_string(mix64(
                    std::chrono::steady_clock::now().time_since_epoch().count())));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

ImageF to_float(const ImageU8& img) {
    ImageF out(img.width, img.height, img.channels);
    for (size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
    return out;
}

/// Codec fitted once on jittered flat fields, so the constant color
/// directions dominate the patch PCA and constant patches survive the
/// encode/decode round trip almost exactly — the property the
/// identity-consistency stages lean on.
std::shared_ptr<const LinearLatentCodec> shared_codec() {
    static const auto codec = [] {
        Rng rng(19);
        std::vector<ImageF> train;
        for (int i = 0; i < 40; ++i) {
            ImageF img(64, 64, 3);
            const float r = static_cast<float>(rng.uniform(0.1, 0.9));
            const float g = static_cast<float>(rng.uniform(0.1, 0.9));
            const float b = static_cast<float>(rng.uniform(0.1, 0.9));
            for (int y = 0; y < 64; ++y)
                for (int x = 0; x < 64; ++x) {
                    img.at(x, y, 0) = r + 0.02f * static_cast<float>(rng.gaussian());
                    img.at(x, y, 1) = g + 0.02f * static_cast<float>(rng.gaussian());
                    img.at(x, y, 2) = b + 0.02f * static_cast<float>(rng.gaussian());
                }
            train.push_back(std::move(img));
        }
        return std::make_shared<const LinearLatentCodec>(
            fit_codec(train, 4, 80000, 7));
    }();
    return codec;
}

std::shared_ptr<const NoiseSchedule> shared_schedule() {
    static const auto sched = std::make_shared<const NoiseSchedule>(
        NoiseSchedule::make(NoiseSchedule::Kind::linear, 25));
    return sched;
}

/// Constant analytic Gaussian prior shaped for a given canvas.
std::shared_ptr<const Denoiser> constant_prior(int side, int channels, float mu,
                                               float var) {
    return std::make_shared<AnalyticGaussianDenoiser>(
        shared_schedule(), ImageF(side, side, channels, mu),
        ImageF(side, side, channels, var));
}

/// Patterned analytic prior: a smooth sinusoid mean field.
std::shared_ptr<const Denoiser> patterned_prior(int side, int channels,
                                                float var) {
    ImageF mu(side, side, channels);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            for (int c = 0; c < channels; ++c)
                mu.at(x, y, c) = 0.5f * std::sin(0.37f * x + 0.21f * y + c);
    return std::make_shared<AnalyticGaussianDenoiser>(
        shared_schedule(), std::move(mu), ImageF(side, side, channels, var));
}

StageConfig consistency_stage(const std::string& name, int tile = 32,
                              int stride = 16) {
    StageConfig stage;
    stage.name = name;
    stage.denoiser =
        std::make_shared<ConsistencyDenoiser>(shared_schedule(), shared_codec());
    stage.schedule = shared_schedule();
    stage.sampler = {SamplerConfig::Kind::dpm, 8};
    stage.tiling = {tile, stride, 0.25};
    return stage;
}

StageConfig base_stage(std::shared_ptr<const Denoiser> denoiser, int tile = 32,
                       int stride = 16) {
    StageConfig stage;
    stage.name = "base";
    stage.denoiser = std::move(denoiser);
    stage.schedule = shared_schedule();
    stage.sampler = {SamplerConfig::Kind::dpm, 8};
    stage.tiling = {tile, stride, 0.25};
    return stage;
}

/// Assemble a stored layer into one image for cross-scale checks.
ImageU8 assemble_layer(const PyramidMap& store, int zoom, int64_t tx0, int64_t ty0,
                       int tiles_w, int tiles_h) {
    const int tp = store.tile_px();
    ImageU8 out(tiles_w * tp, tiles_h * tp, 3);
    for (int ty = 0; ty < tiles_h; ++ty)
        for (int tx = 0; tx < tiles_w; ++tx) {
            const auto tile = store.get(TileCoord{zoom, tx0 + tx, ty0 + ty});
            REQUIRE(tile.has_value());
            paste(out, *tile, tx * tp, ty * tp);
        }
    return out;
}

int max_abs_diff(const ImageU8& a, const ImageU8& b) {
    REQUIRE(a.data.size() == b.data.size());
    int worst = 0;
    for (size_t i = 0; i < a.data.size(); ++i)
        worst = std::max(worst, std::abs(int(a.data[i]) - int(b.data[i])));
    return worst;
}

}  // namespace

TEST_CASE("tile seeds are deterministic and collision-free over a grid") {
    const TileSeed a = tile_seed(42, 10, 5, 7, "10to12");
    CHECK(a.seed == tile_seed(42, 10, 5, 7, "10to12").seed);

    std::set<uint64_t> seen;
    for (int zoom : {10, 12, 14})
        for (int64_t x = 0; x < 8; ++x)
            for (int64_t y = 0; y < 8; ++y)
                for (const char* name : {"base", "10to12", "12to14"})
                    seen.insert(tile_seed(42, zoom, x, y, name).seed);
    CHECK(seen.size() == 3u * 8 * 8 * 3);
    CHECK(tile_seed(42, 10, 5, 7, "a").seed != tile_seed(43, 10, 5, 7, "a").seed);
}

TEST_CASE("base generation matches the untiled reference on one tile") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    StageConfig stage = base_stage(patterned_prior(32, C, 0.4f));
    const DecodeTiling decode{64, 0.25};

    // 128 RGB px -> 32 latent px = exactly one 32-px tile.
    const ImageF got = generate_base(128, 128, 99, stage, *codec, decode, 40, 60);

    const CanvasSpec canvas{32, 32, C, 40, 60};
    const ImageF latent = untiled_sample(*stage.denoiser, nullptr, nullptr,
                                         *stage.schedule, stage.sampler, canvas, 99);
    const ImageF want = codec->tiled_decode(latent, decode);
    REQUIRE(got.same_shape(want));
    CHECK(std::memcmp(got.data.data(), want.data.data(),
                      got.data.size() * sizeof(float)) == 0);
}

TEST_CASE("base generation falls back to the untiled path below one tile") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    StageConfig stage = base_stage(patterned_prior(16, C, 0.4f));
    const DecodeTiling decode{64, 0.25};

    const ImageF got = generate_base(64, 64, 5, stage, *codec, decode);
    REQUIRE(got.width == 64);
    REQUIRE(got.height == 64);
    REQUIRE(got.channels == 3);

    const CanvasSpec canvas{16, 16, C, 0, 0};
    const ImageF latent = untiled_sample(*stage.denoiser, nullptr, nullptr,
                                         *stage.schedule, stage.sampler, canvas, 5);
    const ImageF want = codec->tiled_decode(latent, decode);
    CHECK(std::memcmp(got.data.data(), want.data.data(),
                      got.data.size() * sizeof(float)) == 0);
}

TEST_CASE("base generation is seeded and validates its inputs") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    StageConfig stage = base_stage(patterned_prior(16, C, 0.4f));
    const DecodeTiling decode{64, 0.25};

    const ImageF a = generate_base(64, 64, 5, stage, *codec, decode);
    const ImageF b = generate_base(64, 64, 5, stage, *codec, decode);
    const ImageF c = generate_base(64, 64, 6, stage, *codec, decode);
    CHECK(std::memcmp(a.data.data(), b.data.data(),
                      a.data.size() * sizeof(float)) == 0);
    CHECK(std::memcmp(a.data.data(), c.data.data(),
                      a.data.size() * sizeof(float)) != 0);

    CHECK_THROWS_AS(generate_base(65, 64, 5, stage, *codec, decode),
                    std::invalid_argument);
    CHECK_THROWS_AS(generate_base(0, 64, 5, stage, *codec, decode),
                    std::invalid_argument);

    StageConfig conditional = consistency_stage("sr");
    CHECK_THROWS_AS(generate_base(64, 64, 5, conditional, *codec, decode),
                    std::invalid_argument);

    StageConfig no_model = stage;
    no_model.denoiser = nullptr;
    CHECK_THROWS_AS(generate_base(64, 64, 5, no_model, *codec, decode),
                    std::invalid_argument);
    StageConfig no_sched = stage;
    no_sched.schedule = nullptr;
    CHECK_THROWS_AS(generate_base(64, 64, 5, no_sched, *codec, decode),
                    std::invalid_argument);
    LinearLatentCodec unfitted;
    CHECK_THROWS_AS(generate_base(64, 64, 5, stage, unfitted, decode),
                    std::invalid_argument);
}

TEST_CASE("base generation reproduces analytic Gaussian moments") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    ImageF mu(16, 16, C);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < C; ++c)
                mu.at(x, y, c) = 0.3f * ((x + y + c) % 5) - 0.6f;
    const float var = 0.5f;
    // A terminal schedule (alpha_bar(T) ~ 0) so that starting the reverse
    // trajectory from unit noise matches the forward marginal.
    const auto schedule = std::make_shared<NoiseSchedule>(
        NoiseSchedule::make(NoiseSchedule::Kind::linear, 400));
    StageConfig stage = base_stage(std::make_shared<AnalyticGaussianDenoiser>(
        schedule, mu, ImageF(16, 16, C, var)));
    stage.schedule = schedule;
    stage.sampler = {SamplerConfig::Kind::ancestral, 400};
    const DecodeTiling decode{64, 0.25};

    const int runs = 200;
    const size_t n = mu.data.size();
    std::vector<double> sum(n, 0.0), sq(n, 0.0);
    for (int r = 0; r < runs; ++r) {
        const ImageF rgb = generate_base(64, 64, 1000 + r, stage, *codec, decode);
        const ImageF z = codec->encode(rgb);  // invert the linear decode
        REQUIRE(z.data.size() == n);
        for (size_t i = 0; i < n; ++i) {
            sum[i] += z.data[i];
            sq[i] += double(z.data[i]) * z.data[i];
        }
    }
    int mean_ok = 0;
    double var_sum = 0.0;
    const double sigma = std::sqrt(var);
    for (size_t i = 0; i < n; ++i) {
        const double m = sum[i] / runs;
        if (std::abs(m - mu.data[i]) <= 4.0 * sigma / std::sqrt(double(runs)))
            ++mean_ok;
        var_sum += sq[i] / runs - m * m;
    }
    CHECK(mean_ok >= int(0.98 * n));
    CHECK(var_sum / double(n) == doctest::Approx(var).epsilon(0.15));
}

TEST_CASE("super-resolution output is x4 and consistent with its input") {
    const auto codec = shared_codec();
    const SynthStack stack = synth_pyramid(3, {12}, 64);
    const ImageF low_res = to_float(stack.levels[0]);

    StageConfig stage = consistency_stage("10to12");
    const ImageF out =
        superres_stage(low_res, stage, 7, *codec, DecodeTiling{64, 0.25});
    REQUIRE(out.width == 256);
    REQUIRE(out.height == 256);
    REQUIRE(out.channels == 3);

    // The identity-consistency stage must reproduce the conditioning when
    // averaged back down: each 4x4 output patch decodes the encoded constant
    // patch of its source pixel.
    const ImageF down = box_downsample(out, 4);
    float worst = 0.0f;
    for (size_t i = 0; i < down.data.size(); ++i)
        worst = std::max(worst, std::abs(down.data[i] - low_res.data[i]));
    CHECK(worst <= 2.0f / 255.0f);
}

TEST_CASE("super-resolution validates conditioning and layout alignment") {
    const auto codec = shared_codec();
    const DecodeTiling decode{64, 0.25};
    StageConfig stage = consistency_stage("10to12");

    const ImageF bad_channels(64, 64, 4, 0.5f);
    CHECK_THROWS_AS(superres_stage(bad_channels, stage, 7, *codec, decode),
                    std::invalid_argument);

    // 40 is neither below one tile (32) nor a multiple of the stride (16).
    const ImageF misaligned(40, 40, 3, 0.5f);
    CHECK_THROWS_AS(superres_stage(misaligned, stage, 7, *codec, decode),
                    std::invalid_argument);

    StageConfig unconditional =
        base_stage(constant_prior(32, codec->channels(), 0.0f, 1.0f));
    const ImageF ok(64, 64, 3, 0.5f);
    CHECK_THROWS_AS(superres_stage(ok, unconditional, 7, *codec, decode),
                    std::invalid_argument);

    StageConfig missing_negative = consistency_stage("10to12");
    missing_negative.lambda_neg = 2.0;
    CHECK_THROWS_AS(superres_stage(ok, missing_negative, 7, *codec, decode),
                    std::invalid_argument);
    StageConfig negative_lambda = consistency_stage("10to12");
    negative_lambda.lambda_neg = -0.5;
    CHECK_THROWS_AS(superres_stage(ok, negative_lambda, 7, *codec, decode),
                    std::invalid_argument);
}

TEST_CASE("sub-tile super-resolution falls back to the untiled path") {
    const auto codec = shared_codec();
    StageConfig stage = consistency_stage("10to12");
    const SynthStack stack = synth_pyramid(4, {12}, 16);
    const ImageF low_res = to_float(stack.levels[0]);

    const ImageF out =
        superres_stage(low_res, stage, 7, *codec, DecodeTiling{64, 0.25});
    REQUIRE(out.width == 64);
    const ImageF down = box_downsample(out, 4);
    float worst = 0.0f;
    for (size_t i = 0; i < down.data.size(); ++i)
        worst = std::max(worst, std::abs(down.data[i] - low_res.data[i]));
    CHECK(worst <= 2.0f / 255.0f);
}

TEST_CASE("zero-strength negative guidance leaves the stage output unchanged") {
    const auto codec = shared_codec();
    const SynthStack stack = synth_pyramid(5, {12}, 32);
    const ImageF low_res = to_float(stack.levels[0]);
    const DecodeTiling decode{64, 0.25};

    StageConfig plain = consistency_stage("10to12");
    StageConfig with_negative = consistency_stage("10to12");
    with_negative.negative =
        constant_prior(32, codec->channels(), 0.8f, 0.3f);
    with_negative.lambda_neg = 0.0;

    const ImageF a = superres_stage(low_res, plain, 7, *codec, decode);
    const ImageF b = superres_stage(low_res, with_negative, 7, *codec, decode);
    CHECK(std::memcmp(a.data.data(), b.data.data(),
                      a.data.size() * sizeof(float)) == 0);

    with_negative.lambda_neg = 3.0;
    const ImageF c = superres_stage(low_res, with_negative, 7, *codec, decode);
    CHECK(std::memcmp(a.data.data(), c.data.data(),
                      a.data.size() * sizeof(float)) != 0);
}

TEST_CASE("world generation emits every layer with cross-scale consistency") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    CascadeConfig config;
    config.base_zoom = 10;
    config.seed = 21;
    config.chunk_px = 128;  // 32-latent-px cells
    config.halo = 16;
    config.codec = codec;
    config.decode = {64, 0.25};
    config.base = base_stage(constant_prior(32, C, 0.1f, 0.4f));
    config.stages = {consistency_stage("10to12"), consistency_stage("12to14")};

    TempDir tmp;
    PyramidMap store(tmp.path, 32);
    const WorldExtent extent{300, 300, 2, 2};
    const WorldReport report = generate_world(extent, config, store);

    REQUIRE(report.layers.size() == 3);
    CHECK(report.layers[0].zoom == 10);
    CHECK(report.layers[1].zoom == 12);
    CHECK(report.layers[2].zoom == 14);
    CHECK(report.layers[0].width == 64);
    CHECK(report.layers[1].width == 256);
    CHECK(report.layers[2].width == 1024);
    CHECK(report.layers[0].tiles == 4);
    CHECK(report.layers[1].tiles == 64);
    CHECK(report.layers[2].tiles == 1024);
    CHECK(report.tiles_written == 4u + 64 + 1024);
    CHECK(store.tile_count() == 4u + 64 + 1024);

    // Each layer, box-averaged x4, reproduces the previous layer.
    const ImageU8 l10 = assemble_layer(store, 10, 300, 300, 2, 2);
    const ImageU8 l12 = assemble_layer(store, 12, 1200, 1200, 8, 8);
    const ImageU8 l14 = assemble_layer(store, 14, 4800, 4800, 32, 32);
    CHECK(max_abs_diff(box_downsample_u8(l12, 4), l10) <= 2);
    CHECK(max_abs_diff(box_downsample_u8(l14, 4), l12) <= 2);
}

TEST_CASE("world generation is deterministic across runs and thread counts") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    CascadeConfig config;
    config.base_zoom = 10;
    config.seed = 33;
    config.chunk_px = 128;
    config.halo = 16;
    config.codec = codec;
    config.decode = {64, 0.25};
    config.base = base_stage(patterned_prior(32, C, 0.4f));
    config.stages = {consistency_stage("10to12")};
    const WorldExtent extent{300, 300, 1, 1};

    auto run = [&](int threads) {
        set_max_threads(threads);
        TempDir tmp;
        PyramidMap store(tmp.path, 32);
        generate_world(extent, config, store);
        std::vector<std::vector<uint8_t>> tiles;
        for (const TileCoord& t : store.tiles()) tiles.push_back(store.get(t)->data);
        return tiles;
    };
    const auto a = run(1);
    const auto b = run(4);
    set_max_threads(0);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("a containing extent reproduces the smaller extent's tiles exactly") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    CascadeConfig config;
    config.base_zoom = 10;
    config.seed = 55;
    config.chunk_px = 128;
    config.halo = 16;
    config.codec = codec;
    config.decode = {64, 0.25};
    config.base = base_stage(patterned_prior(32, C, 0.4f));
    config.stages = {consistency_stage("10to12")};

    TempDir tmp_small, tmp_big;
    PyramidMap small(tmp_small.path, 32), big(tmp_big.path, 32);
    generate_world(WorldExtent{300, 300, 2, 2}, config, small);
    generate_world(WorldExtent{299, 299, 4, 4}, config, big);

    // World-anchored cells make every shared tile byte-identical, interior
    // and boundary alike.
    for (const TileCoord& t : small.tiles()) {
        const auto ours = small.get(t);
        const auto theirs = big.get(t);
        REQUIRE(theirs.has_value());
        CHECK(ours->data == theirs->data);
    }
}

TEST_CASE("world generation validates geometry and configuration") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    CascadeConfig config;
    config.base_zoom = 10;
    config.chunk_px = 128;
    config.halo = 16;
    config.codec = codec;
    config.base = base_stage(constant_prior(32, C, 0.0f, 1.0f));
    config.stages = {consistency_stage("10to12")};
    TempDir tmp;
    PyramidMap store(tmp.path, 32);

    CHECK_THROWS_AS(
        generate_world(WorldExtent{300, 300, 0, 1}, config, store),
        std::invalid_argument);
    CHECK_THROWS_AS(
        generate_world(WorldExtent{-1, 300, 1, 1}, config, store),
        std::invalid_argument);
    // Close to the world edge: the support margin would need tiles at
    // negative coordinates.
    CHECK_THROWS_AS(generate_world(WorldExtent{0, 0, 1, 1}, config, store),
                    std::invalid_argument);

    CascadeConfig bad = config;
    bad.halo = 8;  // below the 16-px tile overlap of the stage layouts
    CHECK_THROWS_AS(generate_world(WorldExtent{300, 300, 1, 1}, bad, store),
                    std::invalid_argument);
    bad = config;
    bad.chunk_px = 122;  // chunk must stay on the 4-px latent grid
    CHECK_THROWS_AS(generate_world(WorldExtent{300, 300, 1, 1}, bad, store),
                    std::invalid_argument);
    bad = config;
    bad.halo = 0;
    bad.chunk_px = 16;  // 4-px cells: cell + halo cannot hold a 32-px tile
    CHECK_THROWS_AS(generate_world(WorldExtent{300, 300, 1, 1}, bad, store),
                    std::invalid_argument);
    bad = config;
    bad.codec = nullptr;
    CHECK_THROWS_AS(generate_world(WorldExtent{300, 300, 1, 1}, bad, store),
                    std::invalid_argument);
    bad = config;
    bad.base_zoom = 29;  // final zoom 31 would exceed the mercator cap of 30
    CHECK_THROWS_AS(generate_world(WorldExtent{300, 300, 1, 1}, bad, store),
                    std::invalid_argument);

    TempDir tmp_odd;
    PyramidMap odd_store(tmp_odd.path, 30);
    CHECK_THROWS_AS(generate_world(WorldExtent{300, 300, 1, 1}, config, odd_store),
                    std::invalid_argument);
}

TEST_CASE("direct generation loses the cross-scale consistency the cascade keeps") {
    const auto codec = shared_codec();
    const int C = codec->channels();
    CascadeConfig config;
    config.base_zoom = 10;
    config.seed = 77;
    config.codec = codec;
    config.decode = {64, 0.25};
    config.base = base_stage(patterned_prior(8, C, 0.25f));
    config.stages = {consistency_stage("10to12"), consistency_stage("12to14")};

    StageConfig direct = base_stage(constant_prior(32, C, 0.0f, 0.25f));
    direct.name = "direct";

    const DirectReport report = ablate_direct(32, 32, config, direct);
    REQUIRE(report.base.width == 32);
    REQUIRE(report.cascaded.width == 512);
    REQUIRE(report.direct.width == 512);
    REQUIRE(report.cascaded.height == report.direct.height);

    CHECK(report.r_cascaded >= 0.9);
    CHECK(std::abs(report.r_direct) <= 0.2);

    REQUIRE(!report.band_power_cascaded.empty());
    REQUIRE(report.band_power_cascaded.size() == report.band_power_direct.size());
    for (const double p : report.band_power_cascaded) CHECK(p >= 0.0);
}

TEST_CASE("pooled correlation matches hand values") {
    ImageF a(8, 8, 2), b(8, 8, 2), c(8, 8, 2);
    Rng rng(3);
    for (size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] = static_cast<float>(rng.gaussian());
        b.data[i] = 2.0f * a.data[i] + 1.0f;   // perfectly correlated
        c.data[i] = -0.5f * a.data[i] + 3.0f;  // perfectly anti-correlated
    }
    CHECK(pearson_correlation(a, b) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(pearson_correlation(a, c) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(pearson_correlation(a, ImageF(8, 8, 2, 0.7f)) == 0.0);
    CHECK_THROWS_AS(pearson_correlation(a, ImageF(4, 4, 2, 0.0f)),
                    std::invalid_argument);
}

TEST_SUITE_END();
