// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "geosynth/rng.hpp"
#include "geosynth/schedule.hpp"

using namespace geosynth;

namespace {

ImageF random_field(int w, int h, int c, uint64_t seed) {
    ImageF img(w, h, c);
    fill_gaussian(img, seed);
    return img;
}

}  // namespace

TEST_SUITE("schedule") {

TEST_CASE("alpha_bar telescopes the per-step alphas") {
    const auto s = NoiseSchedule::make(NoiseSchedule::Kind::linear, 100, 1e-3, 0.05);
    CHECK(s.alpha_bar(0) == 1.0);
    double prod = 1.0;
    for (int t = 1; t <= 100; ++t) {
        prod *= s.alpha(t);
        CHECK(s.alpha_bar(t) == doctest::Approx(prod).epsilon(1e-12));
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.beta(t) == doctest::Approx(1e-3 + (0.05 - 1e-3) * (t - 1) / 99.0));
    }
    // Default-style full-length schedule ends almost fully noised.
    const auto full = NoiseSchedule::make(NoiseSchedule::Kind::linear, 1000, 1e-4, 2e-2);
    CHECK(full.alpha_bar(1000) < 0.01);
    CHECK(full.alpha_bar(1000) > 0.0);
}

TEST_CASE("cosine schedule starts clean and clips betas") {
    const auto s = NoiseSchedule::make(NoiseSchedule::Kind::cosine, 50);
    CHECK(s.alpha_bar(0) == 1.0);
    for (int t = 1; t <= 50; ++t) {
        CHECK(s.beta(t) <= 0.999);
        CHECK(s.beta(t) >= 0.0);
        CHECK(s.alpha_bar(t) <= s.alpha_bar(t - 1));
    }
    CHECK(s.alpha_bar(50) < 1e-3);
    CHECK(s.alpha_bar(1) > 0.99);  // near-clean at the start
}

TEST_CASE("constructor and accessors validate their domain") {
    CHECK_THROWS_AS(NoiseSchedule::make(NoiseSchedule::Kind::linear, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::make(NoiseSchedule::Kind::linear, 10, 0.0, 0.5),
                    std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::make(NoiseSchedule::Kind::linear, 10, 0.5, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::make(NoiseSchedule::Kind::linear, 10, 0.1, 1.0),
                    std::invalid_argument);
    const auto s = NoiseSchedule::make(NoiseSchedule::Kind::linear, 10);
    CHECK_THROWS_AS(s.alpha(0), std::invalid_argument);
    CHECK_THROWS_AS(s.alpha(11), std::invalid_argument);
    CHECK_THROWS_AS(s.alpha_bar(-1), std::invalid_argument);
    CHECK_THROWS_AS(s.sigma(0), std::invalid_argument);
    const ImageF z(4, 4, 2), eps(4, 4, 2), bad(4, 5, 2);
    CHECK_THROWS_AS(s.forward_diffuse(z, 3, bad), std::invalid_argument);
    CHECK_THROWS_AS(s.ddpm_step(z, bad, 3, nullptr), std::invalid_argument);
    CHECK_THROWS_AS(s.ddpm_step(z, eps, 3, nullptr), std::invalid_argument);  // sigma>0
    CHECK_THROWS_AS(s.dpm_single_step(z, eps, 3, 3), std::invalid_argument);
    CHECK_THROWS_AS(s.dpm_single_step(z, eps, 0, 0), std::invalid_argument);
}

TEST_CASE("forward diffuse matches the closed form and t=0 is identity") {
    const auto s = NoiseSchedule::make(NoiseSchedule::Kind::linear, 40, 1e-3, 0.04);
    const ImageF z0 = random_field(8, 8, 3, 11);
    const ImageF eps = random_field(8, 8, 3, 22);
    CHECK(s.forward_diffuse(z0, 0, eps).data == z0.data);
    const int t = 17;
    const ImageF zt = s.forward_diffuse(z0, t, eps);
    const double a = std::sqrt(s.alpha_bar(t)), b = std::sqrt(1.0 - s.alpha_bar(t));
    for (size_t i = 0; i < z0.size(); i += 37) {
        const double want = a * static_cast<double>(z0.data[i]) +
                            b * static_cast<double>(eps.data[i]);
        CHECK(zt.data[i] == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("ancestral step matches a hand-evaluated posterior move") {
    const auto s = NoiseSchedule::make(NoiseSchedule::Kind::linear, 30, 2e-3, 0.08);
    const ImageF z = random_field(6, 6, 2, 33);
    const ImageF eps = random_field(6, 6, 2, 44);
    const ImageF noise = random_field(6, 6, 2, 55);
    const int t = 12;
    const ImageF out = s.ddpm_step(z, eps, t, &noise);
    const double beta = s.beta(t);
    const double m = 1.0 / std::sqrt(1.0 - beta);
    const double k = beta / std::sqrt(1.0 - s.alpha_bar(t));
    const double sig =
        std::sqrt((1.0 - s.alpha_bar(t - 1)) / (1.0 - s.alpha_bar(t)) * beta);
    for (size_t i = 0; i < z.size(); i += 11) {
        const double want = m * (z.data[i] - k * eps.data[i]) + sig * noise.data[i];
        CHECK(out.data[i] == doctest::Approx(want).epsilon(2e-5));
    }
    // sigma(1) is zero: the last ancestral step must be deterministic and
    // must not require a noise field.
    CHECK(s.sigma(1) == 0.0);
    const ImageF last = s.ddpm_step(z, eps, 1, nullptr);
    CHECK(last.size() == z.size());
}

TEST_CASE("single deterministic step equals the sigma=0 ancestral flow") {
    // The exponential-integrator step in log-SNR time, for one hop
    // t -> t_to, must coincide with the classic deterministic update
    // a_to * x0_hat + s_to * eps_hat. This is an exact algebraic identity;
    // float evaluation order gives tiny differences only.
    const auto s = NoiseSchedule::make(NoiseSchedule::Kind::linear, 500, 1e-4, 0.02);
    const ImageF z = random_field(8, 8, 4, 66);
    const ImageF eps = random_field(8, 8, 4, 77);
    Rng rng(88);
    for (int trial = 0; trial < 25; ++trial) {
        const int t_from = static_cast<int>(rng.uniform_int(2, 500));
        const int t_to = static_cast<int>(rng.uniform_int(1, t_from - 1));
        const ImageF got = s.dpm_single_step(z, eps, t_from, t_to);
        const double af = std::sqrt(s.alpha_bar(t_from));
        const double sf = std::sqrt(1.0 - s.alpha_bar(t_from));
        const double at = std::sqrt(s.alpha_bar(t_to));
        const double st = std::sqrt(1.0 - s.alpha_bar(t_to));
        for (size_t i = 0; i < z.size(); i += 7) {
            const double x0 = (z.data[i] - sf * eps.data[i]) / af;
            const double want = at * x0 + st * eps.data[i];
            CHECK(got.data[i] == doctest::Approx(want).epsilon(5e-5).scale(1.0));
        }
    }
    // Terminal hop: collapses to the predicted clean signal.
    const ImageF x0 = s.dpm_single_step(z, eps, 350, 0);
    const double af = std::sqrt(s.alpha_bar(350));
    const double sf = std::sqrt(1.0 - s.alpha_bar(350));
    for (size_t i = 0; i < z.size(); i += 13) {
        const double want = (z.data[i] - sf * eps.data[i]) / af;
        CHECK(x0.data[i] == doctest::Approx(want).epsilon(5e-5).scale(1.0));
    }
}

TEST_CASE("sampler trajectory spans T..0 evenly") {
    const auto s = NoiseSchedule::make(NoiseSchedule::Kind::linear, 1000);
    const auto ts = s.sampler_timesteps(50);
    REQUIRE(ts.size() == 51);
    CHECK(ts.front() == 1000);
    CHECK(ts.back() == 0);
    CHECK(ts[1] == 980);
    for (size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] < ts[i - 1]);
    const auto all = s.sampler_timesteps(1000);
    CHECK(all.size() == 1001);
    CHECK_THROWS_AS(s.sampler_timesteps(0), std::invalid_argument);
    CHECK_THROWS_AS(s.sampler_timesteps(1001), std::invalid_argument);
}

TEST_CASE("json round-trip preserves the schedule") {
    const auto s = NoiseSchedule::make(NoiseSchedule::Kind::linear, 123, 3e-4, 0.011);
    const auto back = NoiseSchedule::from_json(s.to_json());
    CHECK(back.T() == 123);
    for (int t : {1, 7, 60, 123})
        CHECK(back.alpha_bar(t) == s.alpha_bar(t));
    CHECK_THROWS_AS(NoiseSchedule::from_json("{"), std::invalid_argument);
    CHECK_THROWS_AS(NoiseSchedule::from_json("{\"kind\":\"exp\",\"T\":10}"),
                    std::invalid_argument);
}

}  // TEST_SUITE
