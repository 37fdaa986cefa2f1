// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/compose.hpp"

#include "geosynth/kernels.hpp"

namespace geosynth {

ImageF negative_compose(const ImageF& eps, const ImageF& eps_neg, double lambda) {
    if (lambda < 0.0)
        throw std::invalid_argument("negative_compose: lambda must be >= 0");
    if (!eps.same_shape(eps_neg))
        throw std::invalid_argument("negative_compose: shape mismatch");
    if (lambda == 0.0) return eps;  // exact: no float round-trip
    ImageF out(eps.width, eps.height, eps.channels);
    // (1 + lambda) * eps - lambda * eps_neg
    kern::ops().lincomb2(eps.data.data(), static_cast<float>(1.0 + lambda),
                         eps_neg.data.data(), static_cast<float>(-lambda),
                         out.data.data(), eps.size());
    return out;
}

ImageF cfg_compose(const ImageF& eps_uncond, const ImageF& eps_cond, double w) {
    if (!eps_uncond.same_shape(eps_cond))
        throw std::invalid_argument("cfg_compose: shape mismatch");
    if (w == 1.0) return eps_cond;
    ImageF out(eps_cond.width, eps_cond.height, eps_cond.channels);
    // (1 - w) * eps_uncond + w * eps_cond
    kern::ops().lincomb2(eps_uncond.data.data(), static_cast<float>(1.0 - w),
                         eps_cond.data.data(), static_cast<float>(w),
                         out.data.data(), eps_cond.size());
    return out;
}

ComposedDenoiser::ComposedDenoiser(const Denoiser* base, const Denoiser* negative,
                                   const Denoiser* uncond, GuidanceConfig config)
    : base_(base), negative_(negative), uncond_(uncond), config_(config) {
    if (!base_) throw std::invalid_argument("ComposedDenoiser: base is required");
    if (config_.lambda_neg < 0.0)
        throw std::invalid_argument("ComposedDenoiser: lambda_neg must be >= 0");
    if (config_.lambda_neg > 0.0 && !negative_)
        throw std::invalid_argument(
            "ComposedDenoiser: lambda_neg > 0 needs a negative model");
    if (config_.cfg_weight != 1.0 && !uncond_)
        throw std::invalid_argument(
            "ComposedDenoiser: cfg_weight != 1 needs an unconditional model");
}

ImageF ComposedDenoiser::predict(const ImageF& z, int t,
                                 const ConditioningBundle& cond) const {
    ImageF eps = base_->predict(z, t, cond);
    if (uncond_ && config_.cfg_weight != 1.0)
        eps = cfg_compose(uncond_->predict(z, t, cond), eps, config_.cfg_weight);
    if (negative_ && config_.lambda_neg > 0.0)
        eps = negative_compose(eps, negative_->predict(z, t, cond),
                               config_.lambda_neg);
    return eps;
}

}  // namespace geosynth
