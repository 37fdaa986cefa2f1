// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

#include "geosynth/codec.hpp"
#include "geosynth/denoise.hpp"
#include "geosynth/png_io.hpp"
#include "geosynth/rng.hpp"
#include "geosynth/schedule.hpp"

using namespace geosynth;

namespace {

std::shared_ptr<NoiseSchedule> linear_schedule(int T = 200) {
    return std::make_shared<NoiseSchedule>(
        NoiseSchedule::make(NoiseSchedule::Kind::linear, T, 1e-4, 0.02));
}

ImageF smooth_rgb(int w, int h, uint64_t seed) {
    ImageF img(w, h, 3);
    Rng rng(seed);
    const double fx = rng.uniform(0.02, 0.2), fy = rng.uniform(0.02, 0.2);
    const double px = rng.uniform(0.0, 6.28), py = rng.uniform(0.0, 6.28);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = static_cast<float>(
                    0.5 + 0.4 * std::sin(fx * x * (c + 1) + px) *
                              std::cos(fy * y + py + c));
    return img;
}

struct TempFile {
    std::filesystem::path path;
    explicit TempFile(const char* name)
        : path(std::filesystem::temp_directory_path() / name) {}
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_SUITE("denoise") {

TEST_CASE("analytic posterior matches the closed form by hand") {
    auto sched = linear_schedule();
    ImageF mu(2, 2, 1), var(2, 2, 1);
    const double mu_v[4] = {0.3, -1.2, 0.0, 2.5};
    const double var_v[4] = {0.5, 1.0, 2.0, 0.25};
    for (int i = 0; i < 4; ++i) {
        mu.data[i] = static_cast<float>(mu_v[i]);
        var.data[i] = static_cast<float>(var_v[i]);
    }
    AnalyticGaussianDenoiser d(sched, mu, var);
    ImageF z(2, 2, 1);
    const double z_v[4] = {1.0, -0.5, 0.7, 2.0};
    for (int i = 0; i < 4; ++i) z.data[i] = static_cast<float>(z_v[i]);

    for (const int t : {1, 37, 200}) {
        const ImageF eps = d.predict(z, t, {});
        const double a = sched->alpha_bar(t);
        for (int i = 0; i < 4; ++i) {
            const double g = std::sqrt(a) * var_v[i] / (a * var_v[i] + 1.0 - a);
            const double x0 = mu_v[i] + g * (z_v[i] - std::sqrt(a) * mu_v[i]);
            const double want = (z_v[i] - std::sqrt(a) * x0) / std::sqrt(1.0 - a);
            CHECK(eps.data[i] == doctest::Approx(want).epsilon(2e-5));
        }
    }
}

TEST_CASE("analytic posterior limits: tight prior trusts mu, wide prior trusts z") {
    auto sched = linear_schedule();
    const int t = 100;
    const double a = sched->alpha_bar(t);
    ImageF mu(4, 4, 2, 0.8f);
    ImageF z(4, 4, 2);
    fill_gaussian(z, 99);

    // var -> 0: x0_hat -> mu, eps_hat -> (z - sqrt(a) mu) / sqrt(1 - a).
    ImageF tight(4, 4, 2, 1e-8f);
    const ImageF eps_tight = AnalyticGaussianDenoiser(sched, mu, tight).predict(z, t, {});
    // var -> inf: x0_hat -> z / sqrt(a), eps_hat -> 0.
    ImageF wide(4, 4, 2, 1e8f);
    const ImageF eps_wide = AnalyticGaussianDenoiser(sched, mu, wide).predict(z, t, {});
    for (size_t i = 0; i < z.size(); ++i) {
        const double want =
            (z.data[i] - std::sqrt(a) * 0.8) / std::sqrt(1.0 - a);
        CHECK(eps_tight.data[i] == doctest::Approx(want).epsilon(1e-4));
        CHECK(std::abs(eps_wide.data[i]) < 1e-4);
    }
}

TEST_CASE("analytic posterior recovers the true noise in expectation") {
    auto sched = linear_schedule();
    const int W = 24, H = 24, C = 2;
    ImageF mu(W, H, C), var(W, H, C, 1.3f);
    fill_gaussian(mu, 7);
    AnalyticGaussianDenoiser d(sched, mu, var);

    // Draw x0 ~ N(mu, var), diffuse, and check E||eps_hat - eps||^2 is well
    // below E||eps||^2 = 1 (the predictor must beat the trivial zero guess
    // exactly by the posterior variance it removes).
    const double loss =
        [&] {
            Rng rng(1234);
            double total = 0.0;
            size_t values = 0;
            for (int rep = 0; rep < 40; ++rep) {
                ImageF x0(W, H, C), noise(W, H, C);
                for (size_t i = 0; i < x0.size(); ++i)
                    x0.data[i] = mu.data[i] +
                                 std::sqrt(1.3f) * static_cast<float>(rng.gaussian());
                fill_gaussian(noise, 4000 + rep);
                const int t = 60;
                const ImageF zt = sched->forward_diffuse(x0, t, noise);
                const ImageF eps = d.predict(zt, t, {});
                for (size_t i = 0; i < x0.size(); ++i) {
                    const double diff = eps.data[i] - noise.data[i];
                    total += diff * diff;
                }
                values += x0.size();
            }
            return total / values;
        }();
    // Closed form: E||eps_hat - eps||^2 = a var / (a var + 1 - a) per value
    // (exact in the var->0 and var->inf limits). For t=60 here a ~ 0.83, so
    // the optimum is ~0.87 -- below the trivial zero-guess loss of 1.
    const double a = sched->alpha_bar(60);
    const double optimal = a * 1.3 / (a * 1.3 + 1.0 - a);
    CHECK(loss == doctest::Approx(optimal).epsilon(0.05));
    CHECK(loss < 0.95);
}

TEST_CASE("analytic denoiser rejects bad inputs") {
    auto sched = linear_schedule();
    ImageF mu(4, 4, 1, 0.0f), var(4, 4, 1, 1.0f);
    AnalyticGaussianDenoiser d(sched, mu, var);
    ImageF z(4, 4, 1);
    CHECK_THROWS_AS(d.predict(z, 0, {}), std::invalid_argument);
    CHECK_THROWS_AS(d.predict(z, 201, {}), std::invalid_argument);
    CHECK_THROWS_AS(d.predict(ImageF(4, 3, 1), 5, {}), std::invalid_argument);
    ImageF bad_var(4, 4, 1, 0.0f);
    CHECK_THROWS_AS(AnalyticGaussianDenoiser(sched, mu, bad_var),
                    std::invalid_argument);
    CHECK_THROWS_AS(AnalyticGaussianDenoiser(sched, mu, ImageF(3, 4, 1, 1.0f)),
                    std::invalid_argument);
}

TEST_CASE("mixture responsibilities identify the generating component") {
    auto sched = linear_schedule();
    const int W = 16, H = 16, C = 1;
    GaussianMixtureDenoiser::Component a, b;
    a.weight = 0.5;
    a.mu = ImageF(W, H, C, -2.0f);
    a.var = 0.2;
    b.weight = 0.5;
    b.mu = ImageF(W, H, C, 2.0f);
    b.var = 0.2;
    GaussianMixtureDenoiser d(sched, {a, b});

    ImageF noise(W, H, C);
    fill_gaussian(noise, 321);
    const int t = 40;  // still informative
    const ImageF zt = sched->forward_diffuse(b.mu, t, noise);
    const auto resp = d.responsibilities(zt, t);
    REQUIRE(resp.size() == 2);
    CHECK(resp[0] + resp[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(resp[1] > 0.999);

    // At that certainty the mixture prediction collapses to component b's
    // analytic posterior.
    const ImageF got = d.predict(zt, t, {});
    const ImageF want =
        AnalyticGaussianDenoiser(sched, b.mu, ImageF(W, H, C, 0.2f)).predict(zt, t, {});
    for (size_t i = 0; i < got.size(); ++i)
        CHECK(got.data[i] == doctest::Approx(want.data[i]).epsilon(2e-4));
}

TEST_CASE("single-component mixture equals the analytic posterior") {
    auto sched = linear_schedule();
    const int W = 9, H = 7, C = 3;
    GaussianMixtureDenoiser::Component k;
    k.weight = 1.0;
    k.mu = smooth_rgb(W, H, 5);
    k.var = 0.7;
    GaussianMixtureDenoiser mix(sched, {k});
    AnalyticGaussianDenoiser mono(sched, k.mu, ImageF(W, H, C, 0.7f));
    ImageF z(W, H, C);
    fill_gaussian(z, 55);
    for (const int t : {3, 111, 200}) {
        const ImageF a = mix.predict(z, t, {});
        const ImageF b = mono.predict(z, t, {});
        for (size_t i = 0; i < a.size(); ++i)
            CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(2e-4));
    }
}

TEST_CASE("mixture prediction blends components under ambiguity") {
    auto sched = linear_schedule();
    GaussianMixtureDenoiser::Component a, b;
    a.weight = 0.5;
    a.mu = ImageF(1, 1, 1, -1.0f);
    a.var = 1.0;
    b.weight = 0.5;
    b.mu = ImageF(1, 1, 1, 1.0f);
    b.var = 1.0;
    GaussianMixtureDenoiser d(sched, {a, b});
    // z exactly between the modes: responsibilities are 1/2 each and the
    // blended x0 estimate is 0, so eps_hat = z / sqrt(1 - a_bar).
    ImageF z(1, 1, 1, 0.0f);
    const auto resp = d.responsibilities(z, 120);
    CHECK(resp[0] == doctest::Approx(0.5).epsilon(1e-9));
    const ImageF eps = d.predict(z, 120, {});
    CHECK(eps.data[0] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK_THROWS_AS(GaussianMixtureDenoiser(sched, {}), std::invalid_argument);
}

TEST_CASE("consistency denoiser pins the trajectory to the conditioning target") {
    auto sched = linear_schedule();
    // Fit a codec on smooth images so encode/decode is well conditioned.
    std::vector<ImageF> training;
    for (int i = 0; i < 12; ++i) training.push_back(smooth_rgb(64, 64, 100 + i));
    auto codec = std::make_shared<LinearLatentCodec>(
        fit_codec(training, 4, 20000, 9));
    auto den = std::make_shared<ConsistencyDenoiser>(sched, codec);

    const ImageF cond = smooth_rgb(24, 24, 200);
    ConditioningBundle bundle;
    bundle.low_res = &cond;

    // target_latent must equal encode(nearest-neighbour x4 upsample).
    const ImageF target = den->target_latent(cond);
    const ImageF big = upsample_nearest(cond, 4);
    const ImageF want = codec->encode(big);
    REQUIRE(target.same_shape(want));
    for (size_t i = 0; i < want.size(); ++i)
        CHECK(target.data[i] == doctest::Approx(want.data[i]).epsilon(1e-4));

    // Ancestral sampling with this denoiser lands on the target (sigma -> 0
    // near the end, and every step contracts toward it).
    ImageF z(24, 24, codec->channels());
    fill_gaussian(z, 777);
    for (int t = sched->T(); t >= 1; --t) {
        const ImageF eps = den->predict(z, t, bundle);
        ImageF step_noise(z.width, z.height, z.channels);
        fill_gaussian(step_noise, hash_combine(31337, t));
        z = sched->ddpm_step(z, eps, t, t > 1 ? &step_noise : nullptr);
    }
    double err = 0.0;
    for (size_t i = 0; i < z.size(); ++i)
        err = std::max(err, std::abs(static_cast<double>(z.data[i]) - target.data[i]));
    CHECK(err < 5e-3);

    CHECK_THROWS_AS(den->predict(z, 10, {}), std::invalid_argument);
    CHECK(den->needs_low_res());
}

TEST_CASE("linear denoiser approaches the analytic optimum on a Gaussian world") {
    auto sched = linear_schedule(60);
    // World: x0 pixels i.i.d. N(0.4, 0.6). The optimal predictor is the
    // analytic posterior; a trained affine model must come close.
    std::vector<ImageF> train, held;
    Rng rng(42);
    for (int i = 0; i < 6; ++i) {
        ImageF img(16, 16, 2);
        for (auto& v : img.data)
            v = 0.4f + std::sqrt(0.6f) * static_cast<float>(rng.gaussian());
        (i < 4 ? train : held).push_back(std::move(img));
    }
    LinearDenoiser::Config cfg;
    cfg.buckets = 20;
    cfg.window = 1;
    LinearDenoiser model = train_linear_denoiser(*sched, train, cfg, 60000, 7);

    ImageF mu(16, 16, 2, 0.4f), var(16, 16, 2, 0.6f);
    AnalyticGaussianDenoiser optimal(sched, mu, var);
    const double loss_lin = eval_denoiser_loss(model, *sched, held, nullptr, 300, 3);
    const double loss_opt = eval_denoiser_loss(optimal, *sched, held, nullptr, 300, 3);
    CHECK(loss_lin < loss_opt * 1.05);
    CHECK(loss_lin > loss_opt * 0.9);  // cannot beat the Bayes optimum by much
}

TEST_CASE("conditioning strictly improves the linear super-resolution model") {
    auto sched = linear_schedule(60);
    // Latents carry structure that only the conditioning reveals.
    std::vector<ImageF> latents, lowres;
    Rng rng(11);
    for (int i = 0; i < 6; ++i) {
        ImageF lr = smooth_rgb(16, 16, 500 + i);
        ImageF z(16, 16, 2);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                const float base =
                    lr.at(x, y, 0) + 0.5f * lr.at(x, y, 1) - 0.3f * lr.at(x, y, 2);
                z.at(x, y, 0) = 2.0f * base + 0.1f * static_cast<float>(rng.gaussian());
                z.at(x, y, 1) = -base + 0.1f * static_cast<float>(rng.gaussian());
            }
        latents.push_back(std::move(z));
        lowres.push_back(std::move(lr));
    }
    std::vector<ImageF> hl(latents.begin() + 4, latents.end());
    std::vector<ImageF> hr(lowres.begin() + 4, lowres.end());
    latents.resize(4);
    lowres.resize(4);

    LinearDenoiser::Config cfg;
    cfg.buckets = 12;
    cfg.window = 1;
    LinearDenoiser uncond = train_linear_denoiser(*sched, latents, cfg, 50000, 21);
    LinearDenoiser sr = train_sr_linear_denoiser(*sched, latents, lowres, cfg, 50000, 21);
    CHECK(sr.uses_low_res());
    CHECK_FALSE(uncond.uses_low_res());

    const double loss_un = eval_denoiser_loss(uncond, *sched, hl, nullptr, 200, 5);
    const double loss_sr = eval_denoiser_loss(sr, *sched, hl, &hr, 200, 5);
    CHECK(loss_sr < loss_un * 0.97);
}

TEST_CASE("linear denoiser round-trips through its file format") {
    auto sched = linear_schedule(40);
    std::vector<ImageF> train;
    Rng rng(2);
    for (int i = 0; i < 2; ++i) {
        ImageF img(12, 12, 3);
        for (auto& v : img.data) v = static_cast<float>(rng.gaussian());
        train.push_back(std::move(img));
    }
    LinearDenoiser::Config cfg;
    cfg.buckets = 4;
    cfg.window = 3;
    LinearDenoiser model = train_linear_denoiser(*sched, train, cfg, 30000, 13);

    TempFile f("geosynth_linear_model.bin");
    model.save(f.path);
    LinearDenoiser back = LinearDenoiser::load(f.path);
    CHECK(back.T() == model.T());
    CHECK(back.buckets() == 4);
    CHECK(back.window() == 3);

    ImageF z(12, 12, 3);
    fill_gaussian(z, 1);
    const ImageF a = model.predict(z, 17, {});
    const ImageF b = back.predict(z, 17, {});
    CHECK(std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(float)) == 0);

    // Corrupt magic must be rejected.
    {
        std::ofstream out(f.path, std::ios::binary);
        out.write("junkjunkjunkjunk", 16);
    }
    CHECK_THROWS_AS(LinearDenoiser::load(f.path), io_error);
    CHECK_THROWS_AS(LinearDenoiser().predict(z, 1, {}), std::logic_error);
    CHECK_THROWS_AS(model.predict(z, 0, {}), std::invalid_argument);
    CHECK_THROWS_AS(model.predict(ImageF(12, 12, 2), 5, {}), std::invalid_argument);
}

TEST_CASE("training rejects malformed requests") {
    auto sched = linear_schedule(40);
    std::vector<ImageF> ok = {ImageF(8, 8, 1)};
    LinearDenoiser::Config cfg;
    CHECK_THROWS_AS(train_linear_denoiser(*sched, {}, cfg, 1000, 1),
                    std::invalid_argument);
    LinearDenoiser::Config even;
    even.window = 2;
    CHECK_THROWS_AS(train_linear_denoiser(*sched, ok, even, 1000, 1),
                    std::invalid_argument);
    LinearDenoiser::Config many;
    many.buckets = 41;
    CHECK_THROWS_AS(train_linear_denoiser(*sched, ok, many, 100000, 1),
                    std::invalid_argument);
    LinearDenoiser::Config tiny;
    CHECK_THROWS_AS(train_linear_denoiser(*sched, ok, tiny, 10, 1),
                    std::invalid_argument);
    std::vector<ImageF> short_lr;
    CHECK_THROWS_AS(train_sr_linear_denoiser(*sched, ok, short_lr, cfg, 1000, 1),
                    std::invalid_argument);
}

}  // TEST_SUITE
