// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/schedule.hpp"

#include <cmath>

#include "geosynth/kernels.hpp"
#include "json.hpp"

namespace geosynth {

NoiseSchedule NoiseSchedule::make(Kind kind, int T, double beta_min,
                                  double beta_max) {
    if (T < 2) throw std::invalid_argument("NoiseSchedule: T must be >= 2");
    NoiseSchedule s;
    s.kind_ = kind;
    s.T_ = T;
    s.beta_min_ = beta_min;
    s.beta_max_ = beta_max;
    s.beta_.assign(T + 1, 0.0);
    s.alpha_bar_.assign(T + 1, 1.0);

    if (kind == Kind::linear) {
        if (!(beta_min > 0.0) || beta_min > beta_max || !(beta_max < 1.0))
            throw std::invalid_argument(
                "NoiseSchedule: need 0 < beta_min <= beta_max < 1");
        for (int t = 1; t <= T; ++t) {
            s.beta_[t] =
                beta_min + (beta_max - beta_min) * (t - 1) / static_cast<double>(T - 1);
            s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - s.beta_[t]);
        }
    } else {
        // Squared-cosine cumulative schedule with the usual 0.008 offset;
        // betas derived from the alpha_bar ratio and clipped at 0.999.
        const double offset = 0.008;
        const double pi_half = 1.5707963267948966;
        auto f = [&](double u) {
            const double c = std::cos((u + offset) / (1.0 + offset) * pi_half);
            return c * c;
        };
        const double f0 = f(0.0);
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double target = f(static_cast<double>(t) / T) / f0;
            double b = 1.0 - target / prev;
            if (b > 0.999) b = 0.999;
            if (b < 0.0) b = 0.0;
            s.beta_[t] = b;
            s.alpha_bar_[t] = prev * (1.0 - b);
            prev = s.alpha_bar_[t];
        }
    }
    return s;
}

void NoiseSchedule::check_t(int t, int lo, const char* who) const {
    if (t < lo || t > T_)
        throw std::invalid_argument(std::string(who) + ": t = " +
                                    std::to_string(t) + " outside [" +
                                    std::to_string(lo) + ", " +
                                    std::to_string(T_) + "]");
}

double NoiseSchedule::beta(int t) const {
    check_t(t, 1, "beta");
    return beta_[t];
}

double NoiseSchedule::alpha(int t) const {
    check_t(t, 1, "alpha");
    return 1.0 - beta_[t];
}

double NoiseSchedule::alpha_bar(int t) const {
    check_t(t, 0, "alpha_bar");
    return alpha_bar_[t];
}

double NoiseSchedule::sigma(int t) const {
    check_t(t, 1, "sigma");
    return std::sqrt((1.0 - alpha_bar_[t - 1]) / (1.0 - alpha_bar_[t]) * beta_[t]);
}

ImageF NoiseSchedule::forward_diffuse(const ImageF& z0, int t,
                                      const ImageF& noise) const {
    check_t(t, 0, "forward_diffuse");
    if (t == 0) return z0;
    if (!z0.same_shape(noise))
        throw std::invalid_argument("forward_diffuse: noise shape mismatch");
    ImageF out(z0.width, z0.height, z0.channels);
    const float a = static_cast<float>(std::sqrt(alpha_bar_[t]));
    const float b = static_cast<float>(std::sqrt(1.0 - alpha_bar_[t]));
    kern::ops().lincomb2(z0.data.data(), a, noise.data.data(), b,
                         out.data.data(), z0.size());
    return out;
}

ImageF NoiseSchedule::ddpm_step(const ImageF& z_t, const ImageF& eps_hat,
                                int t, const ImageF* noise) const {
    check_t(t, 1, "ddpm_step");
    if (!z_t.same_shape(eps_hat))
        throw std::invalid_argument("ddpm_step: eps_hat shape mismatch");
    const double alpha_t = 1.0 - beta_[t];
    const double m = 1.0 / std::sqrt(alpha_t);
    const double k = beta_[t] / std::sqrt(1.0 - alpha_bar_[t]);
    const double sig = sigma(t);
    ImageF out(z_t.width, z_t.height, z_t.channels);
    if (sig > 0.0) {
        if (!noise || !z_t.same_shape(*noise))
            throw std::invalid_argument("ddpm_step: sigma > 0 requires matching noise");
        kern::ops().lincomb3(z_t.data.data(), static_cast<float>(m),
                             eps_hat.data.data(), static_cast<float>(-m * k),
                             noise->data.data(), static_cast<float>(sig),
                             out.data.data(), z_t.size());
    } else {
        kern::ops().lincomb2(z_t.data.data(), static_cast<float>(m),
                             eps_hat.data.data(), static_cast<float>(-m * k),
                             out.data.data(), z_t.size());
    }
    return out;
}

ImageF NoiseSchedule::dpm_single_step(const ImageF& z_t, const ImageF& eps_hat,
                                      int t_from, int t_to) const {
    check_t(t_from, 1, "dpm_single_step");
    if (t_to < 0 || t_to >= t_from)
        throw std::invalid_argument("dpm_single_step: need 0 <= t_to < t_from");
    if (!z_t.same_shape(eps_hat))
        throw std::invalid_argument("dpm_single_step: eps_hat shape mismatch");

    const double ab_from = alpha_bar_[t_from];
    const double a_from = std::sqrt(ab_from);
    const double s_from = std::sqrt(1.0 - ab_from);
    ImageF out(z_t.width, z_t.height, z_t.channels);

    if (t_to == 0) {
        // lambda(t_to) -> +inf; the exponential-integrator step collapses to
        // the predicted clean signal (z - s*eps) / a.
        kern::ops().lincomb2(z_t.data.data(), static_cast<float>(1.0 / a_from),
                             eps_hat.data.data(),
                             static_cast<float>(-s_from / a_from),
                             out.data.data(), z_t.size());
        return out;
    }

    const double ab_to = alpha_bar_[t_to];
    const double a_to = std::sqrt(ab_to);
    const double s_to = std::sqrt(1.0 - ab_to);
    const double lam_from = std::log(a_from / s_from);
    const double lam_to = std::log(a_to / s_to);
    const double h = lam_to - lam_from;
    const double cz = a_to / a_from;
    const double ce = -s_to * std::expm1(h);
    kern::ops().lincomb2(z_t.data.data(), static_cast<float>(cz),
                         eps_hat.data.data(), static_cast<float>(ce),
                         out.data.data(), z_t.size());
    return out;
}

std::vector<int> NoiseSchedule::sampler_timesteps(int steps) const {
    if (steps < 1 || steps > T_)
        throw std::invalid_argument("sampler_timesteps: steps outside [1, T]");
    std::vector<int> ts(steps + 1);
    for (int i = 0; i <= steps; ++i) {
        const double u = static_cast<double>(steps - i) / steps;
        ts[i] = static_cast<int>(std::lround(u * T_));
    }
    ts.front() = T_;
    ts.back() = 0;
    for (size_t i = 1; i < ts.size(); ++i)
        if (ts[i] >= ts[i - 1])
            throw std::logic_error("sampler_timesteps: trajectory not strictly decreasing");
    return ts;
}

std::string NoiseSchedule::to_json() const {
    nlohmann::json j = {
        {"kind", kind_ == Kind::linear ? "linear" : "cosine"},
        {"T", T_},
        {"beta_min", beta_min_},
        {"beta_max", beta_max_},
    };
    return j.dump();
}

NoiseSchedule NoiseSchedule::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("NoiseSchedule::from_json: ") + e.what());
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind != "linear" && kind != "cosine")
        throw std::invalid_argument("NoiseSchedule::from_json: unknown kind " + kind);
    return make(kind == "linear" ? Kind::linear : Kind::cosine,
                j.at("T").get<int>(), j.value("beta_min", 1e-4),
                j.value("beta_max", 2e-2));
}

}  // namespace geosynth
