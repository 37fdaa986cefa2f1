// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "geosynth/denoise.hpp"
#include "geosynth/image.hpp"

namespace geosynth {

/// Push the prediction away from an unwanted mode:
///   out = eps + lambda * (eps - eps_neg)
/// lambda = 0 returns eps bit-for-bit (no arithmetic applied); lambda < 0 is
/// a domain error. Shapes must match.
ImageF negative_compose(const ImageF& eps, const ImageF& eps_neg, double lambda);

/// Classifier-free guidance: out = eps_uncond + w * (eps_cond - eps_uncond).
/// w = 1 returns eps_cond bit-for-bit.
ImageF cfg_compose(const ImageF& eps_uncond, const ImageF& eps_cond, double w);

struct GuidanceConfig {
    double lambda_neg = 0.0;  // negative-guidance strength, >= 0
    double cfg_weight = 1.0;  // positive-guidance strength
};

/// Denoiser decorator that applies guidance around a base model:
/// first positive guidance against `uncond` (if given and weight != 1),
/// then negative guidance against `negative` (if given and lambda > 0).
class ComposedDenoiser : public Denoiser {
public:
    ComposedDenoiser(const Denoiser* base, const Denoiser* negative,
                     const Denoiser* uncond, GuidanceConfig config);
    ImageF predict(const ImageF& z, int t,
                   const ConditioningBundle& cond) const override;
    bool needs_low_res() const override { return base_->needs_low_res(); }
    const char* name() const override { return "composed"; }

private:
    const Denoiser* base_;
    const Denoiser* negative_;
    const Denoiser* uncond_;
    GuidanceConfig config_;
};

}  // namespace geosynth
