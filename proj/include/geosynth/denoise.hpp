// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "geosynth/codec.hpp"
#include "geosynth/image.hpp"
#include "geosynth/schedule.hpp"

namespace geosynth {

/// Side information for a prediction. `low_res` is the conditioning image of
/// a super-resolution stage, spatially aligned with the latent (one low-res
/// pixel per latent pixel). `label_embedding` carries class/prompt features
/// for models that use them.
struct ConditioningBundle {
    const ImageF* low_res = nullptr;
    const std::vector<float>* label_embedding = nullptr;
};

/// A noise predictor: given z_t and the timestep, estimate the noise that
/// the forward process mixed in. Implementations must be pure functions of
/// (z, t, cond) — samplers rely on replaying predictions bit-identically.
class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual ImageF predict(const ImageF& z, int t,
                           const ConditioningBundle& cond) const = 0;
    virtual bool needs_low_res() const { return false; }
    virtual const char* name() const = 0;
};

/// Exact noise posterior for a known per-pixel Gaussian prior
/// x0 ~ N(mu, diag(var)). With a = alpha_bar(t):
///   x0_hat = mu + sqrt(a) var / (a var + 1 - a) * (z - sqrt(a) mu)
///   eps_hat = (z - sqrt(a) x0_hat) / sqrt(1 - a)
/// Queries at t = 0 are a domain error (there is no noise to predict).
class AnalyticGaussianDenoiser : public Denoiser {
public:
    AnalyticGaussianDenoiser(std::shared_ptr<const NoiseSchedule> schedule,
                             ImageF mu, ImageF var);
    ImageF predict(const ImageF& z, int t,
                   const ConditioningBundle& cond) const override;
    const char* name() const override { return "analytic-gaussian"; }
    const ImageF& mu() const { return mu_; }
    const ImageF& var() const { return var_; }

private:
    std::shared_ptr<const NoiseSchedule> schedule_;
    ImageF mu_, var_;
};

/// Exact noise posterior for a mixture of isotropic Gaussians
/// x0 ~ sum_k pi_k N(mu_k, var_k I). Component responsibilities are computed
/// from the whole-image marginal likelihood of z_t in the log domain.
class GaussianMixtureDenoiser : public Denoiser {
public:
    struct Component {
        double weight = 1.0;
        ImageF mu;
        double var = 1.0;
    };
    GaussianMixtureDenoiser(std::shared_ptr<const NoiseSchedule> schedule,
                            std::vector<Component> components);
    ImageF predict(const ImageF& z, int t,
                   const ConditioningBundle& cond) const override;
    const char* name() const override { return "gaussian-mixture"; }
    /// Posterior component weights at (z, t); exposed for tests.
    std::vector<double> responsibilities(const ImageF& z, int t) const;

private:
    std::shared_ptr<const NoiseSchedule> schedule_;
    std::vector<Component> components_;
};

/// Pins the trajectory to the latent of the nearest-neighbour x4 upsample of
/// the conditioning image: eps_hat = (z - sqrt(a) target) / sqrt(1 - a),
/// where target(p) = encode of the constant patch cond(p). Strictly
/// per-pixel, so predictions are independent of any tiling of the canvas.
class ConsistencyDenoiser : public Denoiser {
public:
    ConsistencyDenoiser(std::shared_ptr<const NoiseSchedule> schedule,
                        std::shared_ptr<const LinearLatentCodec> codec);
    ImageF predict(const ImageF& z, int t,
                   const ConditioningBundle& cond) const override;
    bool needs_low_res() const override { return true; }
    const char* name() const override { return "consistency"; }
    /// target(p) for a conditioning image; also used by tests.
    ImageF target_latent(const ImageF& low_res) const;

private:
    std::shared_ptr<const NoiseSchedule> schedule_;
    std::shared_ptr<const LinearLatentCodec> codec_;
};

/// Learned affine noise predictor: per timestep-bucket, per output channel,
/// a ridge-regressed linear map from a WxW feature window of z_t (and, for
/// super-resolution models, the co-located conditioning window) plus an
/// unregularized bias.
class LinearDenoiser : public Denoiser {
public:
    struct Config {
        int buckets = 10;
        int window = 3;      // odd
        double ridge = 1e-4; // relative diagonal loading, bias excluded
        bool use_low_res = false;
    };

    LinearDenoiser() = default;

    ImageF predict(const ImageF& z, int t,
                   const ConditioningBundle& cond) const override;
    bool needs_low_res() const override { return use_low_res_; }
    const char* name() const override { return "linear"; }

    bool valid() const { return T_ > 0; }
    int T() const { return T_; }
    int buckets() const { return buckets_; }
    int window() const { return window_; }
    int channels() const { return channels_; }
    bool uses_low_res() const { return use_low_res_; }

    void save(const std::filesystem::path& path) const;
    static LinearDenoiser load(const std::filesystem::path& path);

private:
    friend LinearDenoiser train_linear_impl(const NoiseSchedule&,
                                            const std::vector<ImageF>&,
                                            const std::vector<ImageF>*,
                                            const LinearDenoiser::Config&,
                                            size_t, uint64_t);
    int T_ = 0;
    int buckets_ = 0;
    int window_ = 0;
    int channels_ = 0;
    int lr_channels_ = 0;
    bool use_low_res_ = false;
    // weights[(bucket * channels + c) * (featdim + 1) .. +featdim]: featdim
    // coefficients then the bias.
    std::vector<double> weights_;

    int feat_dim() const {
        return window_ * window_ * (channels_ + lr_channels_);
    }
    int bucket_of(int t) const;
};

/// Fit an unconditional model on clean latents: samples (pixel, t) pairs,
/// forms z_t with seeded noise and solves the per-bucket normal equations.
LinearDenoiser train_linear_denoiser(const NoiseSchedule& schedule,
                                     const std::vector<ImageF>& latents,
                                     const LinearDenoiser::Config& config,
                                     size_t samples, uint64_t seed);

/// Fit a super-resolution model: as above, with the co-located low-res
/// window (low_res[i] matches latents[i] pixel-for-pixel) as extra
/// features. config.use_low_res is implied.
LinearDenoiser train_sr_linear_denoiser(const NoiseSchedule& schedule,
                                        const std::vector<ImageF>& latents,
                                        const std::vector<ImageF>& low_res,
                                        const LinearDenoiser::Config& config,
                                        size_t samples, uint64_t seed);

/// Monte-Carlo E||eps_hat - eps||^2 per value over held-out latents; the
/// yardstick for comparing denoisers. Deterministic in `seed`.
double eval_denoiser_loss(const Denoiser& denoiser, const NoiseSchedule& schedule,
                          const std::vector<ImageF>& latents,
                          const std::vector<ImageF>* low_res, size_t samples,
                          uint64_t seed);

}  // namespace geosynth
