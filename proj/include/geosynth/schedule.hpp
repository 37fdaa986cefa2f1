// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "geosynth/image.hpp"

namespace geosynth {

/// Variance schedule of the forward noising process plus the two reverse
/// samplers built on it.
///
/// Timestep convention: t is 1-based; t = 0 is the clean signal. alpha_bar(0)
/// is exactly 1 and alpha_bar is strictly decreasing in t.
class NoiseSchedule {
public:
    enum class Kind { linear, cosine };

    /// Build a schedule. For `linear`, beta ramps from beta_min to beta_max
    /// over t = 1..T. For `cosine`, the squared-cosine cumulative schedule is
    /// used and per-step betas are clipped at 0.999 (beta_min/beta_max are
    /// ignored). Throws std::invalid_argument for T < 2 or a beta range
    /// outside 0 < beta_min <= beta_max < 1.
    static NoiseSchedule make(Kind kind, int T, double beta_min = 1e-4,
                              double beta_max = 2e-2);

    int T() const { return T_; }
    Kind kind() const { return kind_; }

    double beta(int t) const;       // t in [1, T]
    double alpha(int t) const;      // 1 - beta(t)
    double alpha_bar(int t) const;  // t in [0, T], prod of alpha
    /// Ancestral sampler noise scale: sqrt of the posterior variance
    /// (1 - alpha_bar(t-1)) / (1 - alpha_bar(t)) * beta(t). sigma(1) == 0,
    /// so the final ancestral step is deterministic.
    double sigma(int t) const;

    /// q(z_t | z_0): sqrt(alpha_bar(t)) * z0 + sqrt(1-alpha_bar(t)) * noise.
    /// t = 0 returns z0 unchanged; noise must match z0's shape.
    ImageF forward_diffuse(const ImageF& z0, int t, const ImageF& noise) const;

    /// One ancestral step t -> t-1 given the noise prediction eps_hat.
    /// `noise` supplies the stochastic term and may be null iff sigma(t) == 0.
    ImageF ddpm_step(const ImageF& z_t, const ImageF& eps_hat, int t,
                     const ImageF* noise) const;

    /// One deterministic first-order step t_from -> t_to (t_to < t_from,
    /// t_to >= 0), exponential-integrator form in log-SNR time. Algebraically
    /// identical to the deterministic ancestral limit for a single hop, but
    /// stable for long hops, which is what makes few-step sampling work.
    ImageF dpm_single_step(const ImageF& z_t, const ImageF& eps_hat,
                           int t_from, int t_to) const;

    /// Evenly spaced sampler trajectory: `steps`+1 timesteps descending from
    /// T to 0. steps must lie in [1, T].
    std::vector<int> sampler_timesteps(int steps) const;

    /// Serialization of the generating parameters (tables are rebuilt).
    std::string to_json() const;
    static NoiseSchedule from_json(const std::string& text);

private:
    NoiseSchedule() = default;
    void check_t(int t, int lo, const char* who) const;

    Kind kind_ = Kind::linear;
    int T_ = 0;
    double beta_min_ = 0.0, beta_max_ = 0.0;
    std::vector<double> beta_;       // [T+1], index 0 unused
    std::vector<double> alpha_bar_;  // [T+1], alpha_bar_[0] = 1
};

}  // namespace geosynth
