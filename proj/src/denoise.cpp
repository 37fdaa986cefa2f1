// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/denoise.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "geosynth/kernels.hpp"
#include "geosynth/png_io.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

namespace {

void check_t_range(const NoiseSchedule& s, int t, const char* who) {
    if (t < 1 || t > s.T())
        throw std::invalid_argument(std::string(who) + ": t = " + std::to_string(t) +
                                    " outside [1, T]; t = 0 carries no noise");
}

}  // namespace

// ---------------------------------------------------------------------------
// AnalyticGaussianDenoiser

AnalyticGaussianDenoiser::AnalyticGaussianDenoiser(
    std::shared_ptr<const NoiseSchedule> schedule, ImageF mu, ImageF var)
    : schedule_(std::move(schedule)), mu_(std::move(mu)), var_(std::move(var)) {
    if (!schedule_) throw std::invalid_argument("AnalyticGaussianDenoiser: no schedule");
    if (!mu_.same_shape(var_))
        throw std::invalid_argument("AnalyticGaussianDenoiser: mu/var shape mismatch");
    for (const float v : var_.data)
        if (!(v > 0.0f))
            throw std::invalid_argument("AnalyticGaussianDenoiser: var must be positive");
}

ImageF AnalyticGaussianDenoiser::predict(const ImageF& z, int t,
                                         const ConditioningBundle&) const {
    check_t_range(*schedule_, t, "AnalyticGaussianDenoiser::predict");
    if (!z.same_shape(mu_))
        throw std::invalid_argument(
            "AnalyticGaussianDenoiser::predict: z does not match the prior field");
    const double a = schedule_->alpha_bar(t);
    ImageF out(z.width, z.height, z.channels);
    kern::ops().posterior_eps(z.data.data(), mu_.data.data(), var_.data.data(),
                              static_cast<float>(a),
                              static_cast<float>(std::sqrt(a)),
                              static_cast<float>(std::sqrt(1.0 - a)),
                              out.data.data(), z.size());
    return out;
}

// ---------------------------------------------------------------------------
// GaussianMixtureDenoiser

GaussianMixtureDenoiser::GaussianMixtureDenoiser(
    std::shared_ptr<const NoiseSchedule> schedule, std::vector<Component> components)
    : schedule_(std::move(schedule)), components_(std::move(components)) {
    if (!schedule_) throw std::invalid_argument("GaussianMixtureDenoiser: no schedule");
    if (components_.empty())
        throw std::invalid_argument("GaussianMixtureDenoiser: no components");
    double total = 0.0;
    for (const auto& k : components_) {
        if (!(k.weight > 0.0))
            throw std::invalid_argument("GaussianMixtureDenoiser: weights must be positive");
        if (!(k.var > 0.0))
            throw std::invalid_argument("GaussianMixtureDenoiser: variances must be positive");
        if (!k.mu.same_shape(components_.front().mu))
            throw std::invalid_argument("GaussianMixtureDenoiser: mu shape mismatch");
        total += k.weight;
    }
    for (auto& k : components_) k.weight /= total;
}

std::vector<double> GaussianMixtureDenoiser::responsibilities(const ImageF& z,
                                                              int t) const {
    check_t_range(*schedule_, t, "GaussianMixtureDenoiser::responsibilities");
    if (!z.same_shape(components_.front().mu))
        throw std::invalid_argument("GaussianMixtureDenoiser: z shape mismatch");
    const double a = schedule_->alpha_bar(t);
    const double sa = std::sqrt(a);
    const size_t n = z.size();
    ImageF scaled_mu(z.width, z.height, z.channels);

    // log p(z | k) for the marginal z_t | k ~ N(sa mu_k, (a var_k + 1 - a) I).
    std::vector<double> logp(components_.size());
    for (size_t k = 0; k < components_.size(); ++k) {
        const auto& comp = components_[k];
        const double v = a * comp.var + (1.0 - a);
        kern::ops().affine(comp.mu.data.data(), static_cast<float>(sa), 0.0f,
                           scaled_mu.data.data(), n);
        const double ss = kern::ops().sumsq_diff(z.data.data(),
                                                 scaled_mu.data.data(), n);
        logp[k] = std::log(comp.weight) -
                  0.5 * (ss / v + static_cast<double>(n) *
                                      std::log(2.0 * 3.14159265358979323846 * v));
    }
    const double peak = *std::max_element(logp.begin(), logp.end());
    double norm = 0.0;
    for (double& lp : logp) {
        lp = std::exp(lp - peak);
        norm += lp;
    }
    for (double& lp : logp) lp /= norm;
    return logp;
}

ImageF GaussianMixtureDenoiser::predict(const ImageF& z, int t,
                                        const ConditioningBundle&) const {
    const std::vector<double> resp = responsibilities(z, t);
    const double a = schedule_->alpha_bar(t);
    const double sa = std::sqrt(a), s1 = std::sqrt(1.0 - a);
    const size_t n = z.size();

    // E[x0 | z] = sum_k r_k (mu_k + g_k (z - sa mu_k)), accumulated in double.
    ImageD acc(z.width, z.height, z.channels, 0.0);
    ImageF x0k(z.width, z.height, z.channels);
    for (size_t k = 0; k < components_.size(); ++k) {
        const auto& comp = components_[k];
        const double g = sa * comp.var / (a * comp.var + (1.0 - a));
        kern::ops().lincomb2(z.data.data(), static_cast<float>(g),
                             comp.mu.data.data(), static_cast<float>(1.0 - g * sa),
                             x0k.data.data(), n);
        kern::ops().accum_scaled(acc.data.data(), x0k.data.data(), resp[k], n);
    }
    ImageF x0(z.width, z.height, z.channels);
    kern::ops().narrow(acc.data.data(), x0.data.data(), n);
    ImageF out(z.width, z.height, z.channels);
    kern::ops().lincomb2(z.data.data(), static_cast<float>(1.0 / s1),
                         x0.data.data(), static_cast<float>(-sa / s1),
                         out.data.data(), n);
    return out;
}

// ---------------------------------------------------------------------------
// ConsistencyDenoiser

ConsistencyDenoiser::ConsistencyDenoiser(
    std::shared_ptr<const NoiseSchedule> schedule,
    std::shared_ptr<const LinearLatentCodec> codec)
    : schedule_(std::move(schedule)), codec_(std::move(codec)) {
    if (!schedule_) throw std::invalid_argument("ConsistencyDenoiser: no schedule");
    if (!codec_ || !codec_->valid())
        throw std::invalid_argument("ConsistencyDenoiser: no fitted codec");
}

ImageF ConsistencyDenoiser::target_latent(const ImageF& low_res) const {
    if (low_res.channels != 3)
        throw std::invalid_argument("ConsistencyDenoiser: conditioning must be RGB");
    const int C = codec_->channels();
    // encode(NN-up4(I)) per pixel: the patch is constant, so the projection
    // collapses to a 3 -> C matrix plus an offset.
    double S[48][3];  // C x 3 used
    double O[48];
    const auto& A = codec_->enc();
    const auto& mean = codec_->mean();
    for (int cc = 0; cc < C; ++cc) {
        double off = 0.0;
        double s[3] = {0.0, 0.0, 0.0};
        for (int k = 0; k < LinearLatentCodec::kPatchDim; ++k) {
            const double a = A[static_cast<size_t>(cc) * LinearLatentCodec::kPatchDim + k];
            s[k % 3] += a;
            off -= a * mean[k];
        }
        S[cc][0] = s[0];
        S[cc][1] = s[1];
        S[cc][2] = s[2];
        O[cc] = off;
    }
    ImageF target(low_res.width, low_res.height, C);
    for (int y = 0; y < low_res.height; ++y) {
        const float* src = low_res.row(y);
        float* dst = target.row(y);
        for (int x = 0; x < low_res.width; ++x) {
            const double r = src[x * 3 + 0], g = src[x * 3 + 1], b = src[x * 3 + 2];
            for (int cc = 0; cc < C; ++cc)
                dst[static_cast<size_t>(x) * C + cc] = static_cast<float>(
                    S[cc][0] * r + S[cc][1] * g + S[cc][2] * b + O[cc]);
        }
    }
    return target;
}

ImageF ConsistencyDenoiser::predict(const ImageF& z, int t,
                                    const ConditioningBundle& cond) const {
    check_t_range(*schedule_, t, "ConsistencyDenoiser::predict");
    if (!cond.low_res)
        throw std::invalid_argument("ConsistencyDenoiser::predict: low_res required");
    if (cond.low_res->width != z.width || cond.low_res->height != z.height)
        throw std::invalid_argument(
            "ConsistencyDenoiser::predict: conditioning must align with the latent");
    if (z.channels != codec_->channels())
        throw std::invalid_argument("ConsistencyDenoiser::predict: channel mismatch");
    const ImageF target = target_latent(*cond.low_res);
    const double a = schedule_->alpha_bar(t);
    const double sa = std::sqrt(a), s1 = std::sqrt(1.0 - a);
    ImageF out(z.width, z.height, z.channels);
    kern::ops().lincomb2(z.data.data(), static_cast<float>(1.0 / s1),
                         target.data.data(), static_cast<float>(-sa / s1),
                         out.data.data(), z.size());
    return out;
}

// ---------------------------------------------------------------------------
// LinearDenoiser

namespace {

constexpr uint32_t kLinearMagic = 0x444c5347;  // "GSLD"
constexpr uint32_t kLinearVersion = 1;

inline int clamp_idx(int v, int hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); }

// Feature layout: z window (dy, dx, c), then low-res window (dy, dx, c).
// Window coordinates clamp at image borders (replicated edges).
template <typename Fetch>
void gather_window(int cx, int cy, int w, int h, int window, int channels,
                   const Fetch& fetch, double* out) {
    const int r = window / 2;
    int i = 0;
    for (int dy = -r; dy <= r; ++dy) {
        const int yy = clamp_idx(cy + dy, h);
        for (int dx = -r; dx <= r; ++dx) {
            const int xx = clamp_idx(cx + dx, w);
            for (int c = 0; c < channels; ++c) out[i++] = fetch(xx, yy, c);
        }
    }
}

}  // namespace

int LinearDenoiser::bucket_of(int t) const {
    return static_cast<int>((static_cast<int64_t>(t) - 1) * buckets_ / T_);
}

ImageF LinearDenoiser::predict(const ImageF& z, int t,
                               const ConditioningBundle& cond) const {
    if (!valid()) throw std::logic_error("LinearDenoiser::predict: model not trained");
    if (t < 1 || t > T_)
        throw std::invalid_argument("LinearDenoiser::predict: t outside [1, T]");
    if (z.channels != channels_)
        throw std::invalid_argument("LinearDenoiser::predict: channel mismatch");
    const ImageF* lr = cond.low_res;
    if (use_low_res_) {
        if (!lr) throw std::invalid_argument("LinearDenoiser::predict: low_res required");
        if (lr->width != z.width || lr->height != z.height ||
            lr->channels != lr_channels_)
            throw std::invalid_argument(
                "LinearDenoiser::predict: conditioning must align with the latent");
    }

    const int F = feat_dim();
    const int zf = window_ * window_ * channels_;
    const double* wb =
        weights_.data() +
        static_cast<size_t>(bucket_of(t)) * channels_ * (F + 1);

    ImageF out(z.width, z.height, z.channels);
    std::vector<double> feat(F);
    for (int y = 0; y < z.height; ++y)
        for (int x = 0; x < z.width; ++x) {
            gather_window(x, y, z.width, z.height, window_, channels_,
                          [&](int xx, int yy, int c) {
                              return static_cast<double>(z.at(xx, yy, c));
                          },
                          feat.data());
            if (use_low_res_)
                gather_window(x, y, z.width, z.height, window_, lr_channels_,
                              [&](int xx, int yy, int c) {
                                  return static_cast<double>(lr->at(xx, yy, c));
                              },
                              feat.data() + zf);
            for (int c = 0; c < channels_; ++c) {
                const double* wc = wb + static_cast<size_t>(c) * (F + 1);
                double acc = wc[F];  // bias
                for (int k = 0; k < F; ++k) acc += wc[k] * feat[k];
                out.at(x, y, c) = static_cast<float>(acc);
            }
        }
    return out;
}

void LinearDenoiser::save(const std::filesystem::path& path) const {
    if (!valid()) throw std::logic_error("LinearDenoiser::save: model not trained");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("LinearDenoiser::save: cannot open " + path.string());
    const uint32_t header[8] = {kLinearMagic,
                                kLinearVersion,
                                static_cast<uint32_t>(T_),
                                static_cast<uint32_t>(buckets_),
                                static_cast<uint32_t>(window_),
                                static_cast<uint32_t>(channels_),
                                static_cast<uint32_t>(lr_channels_),
                                use_low_res_ ? 1u : 0u};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(weights_.data()),
              static_cast<std::streamsize>(weights_.size() * sizeof(double)));
    if (!out) throw io_error("LinearDenoiser::save: write failed");
}

LinearDenoiser LinearDenoiser::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("LinearDenoiser::load: cannot open " + path.string());
    uint32_t header[8];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || header[0] != kLinearMagic)
        throw io_error("LinearDenoiser::load: not a linear-denoiser file");
    if (header[1] != kLinearVersion)
        throw io_error("LinearDenoiser::load: unsupported version " +
                       std::to_string(header[1]));
    LinearDenoiser d;
    d.T_ = static_cast<int>(header[2]);
    d.buckets_ = static_cast<int>(header[3]);
    d.window_ = static_cast<int>(header[4]);
    d.channels_ = static_cast<int>(header[5]);
    d.lr_channels_ = static_cast<int>(header[6]);
    d.use_low_res_ = header[7] != 0;
    if (d.T_ < 2 || d.buckets_ < 1 || d.window_ < 1 || !(d.window_ & 1) ||
        d.channels_ < 1 || d.lr_channels_ < 0)
        throw io_error("LinearDenoiser::load: corrupt header");
    const size_t extent = static_cast<size_t>(d.buckets_) * d.channels_ *
                          (static_cast<size_t>(d.feat_dim()) + 1);
    d.weights_.resize(extent);
    in.read(reinterpret_cast<char*>(d.weights_.data()),
            static_cast<std::streamsize>(extent * sizeof(double)));
    if (!in) throw io_error("LinearDenoiser::load: truncated file");
    return d;
}

// ---------------------------------------------------------------------------
// Training

LinearDenoiser train_linear_impl(const NoiseSchedule& schedule,
                                 const std::vector<ImageF>& latents,
                                 const std::vector<ImageF>* low_res,
                                 const LinearDenoiser::Config& config,
                                 size_t samples, uint64_t seed) {
    if (latents.empty())
        throw std::invalid_argument("train_linear_denoiser: no training latents");
    if (config.window < 1 || !(config.window & 1))
        throw std::invalid_argument("train_linear_denoiser: window must be odd and >= 1");
    if (config.buckets < 1 || config.buckets > schedule.T())
        throw std::invalid_argument("train_linear_denoiser: buckets outside [1, T]");
    if (!(config.ridge >= 0.0))
        throw std::invalid_argument("train_linear_denoiser: ridge must be >= 0");
    const int C = latents.front().channels;
    for (const auto& z : latents)
        if (z.channels != C)
            throw std::invalid_argument("train_linear_denoiser: channel mismatch");
    int lrC = 0;
    if (low_res) {
        if (low_res->size() != latents.size())
            throw std::invalid_argument(
                "train_sr_linear_denoiser: latents/low_res count mismatch");
        lrC = low_res->front().channels;
        for (size_t i = 0; i < latents.size(); ++i) {
            const auto& lr = (*low_res)[i];
            if (lr.width != latents[i].width || lr.height != latents[i].height ||
                lr.channels != lrC)
                throw std::invalid_argument(
                    "train_sr_linear_denoiser: conditioning must align with latents");
        }
    }

    LinearDenoiser model;
    model.T_ = schedule.T();
    model.buckets_ = config.buckets;
    model.window_ = config.window;
    model.channels_ = C;
    model.lr_channels_ = lrC;
    model.use_low_res_ = low_res != nullptr;

    const int F = model.feat_dim();
    const int zf = config.window * config.window * C;
    const int dim = F + 1;  // + bias feature
    if (samples < static_cast<size_t>(dim) * config.buckets * 2)
        throw std::invalid_argument("train_linear_denoiser: too few samples for the model size");

    std::vector<Eigen::MatrixXd> xtx(config.buckets, Eigen::MatrixXd::Zero(dim, dim));
    std::vector<Eigen::MatrixXd> xty(config.buckets, Eigen::MatrixXd::Zero(dim, C));
    std::vector<int64_t> count(config.buckets, 0);

    Rng picker(stable_seed(seed, "linear-train-pick"));
    const uint64_t noise_base = stable_seed(seed, "linear-train-noise");
    std::vector<double> feat(dim);

    for (size_t s = 0; s < samples; ++s) {
        const size_t i = s % latents.size();
        const ImageF& z0 = latents[i];
        const int t = static_cast<int>(picker.uniform_int(1, schedule.T()));
        const int cx = static_cast<int>(picker.uniform_int(0, z0.width - 1));
        const int cy = static_cast<int>(picker.uniform_int(0, z0.height - 1));
        const double a = schedule.alpha_bar(t);
        const double sa = std::sqrt(a), s1 = std::sqrt(1.0 - a);
        const uint64_t sample_key = hash_combine(noise_base, s);

        // Noise is keyed by the clamped source pixel, exactly mirroring what
        // a materialized z_t field would give the predict-time gather.
        auto eps_at = [&](int xx, int yy, int c) {
            return static_cast<double>(keyed_gaussian(hash_combine(
                hash_combine(hash_combine(sample_key, static_cast<uint64_t>(xx)),
                             static_cast<uint64_t>(yy)),
                static_cast<uint64_t>(c))));
        };
        gather_window(cx, cy, z0.width, z0.height, config.window, C,
                      [&](int xx, int yy, int c) {
                          return sa * static_cast<double>(z0.at(xx, yy, c)) +
                                 s1 * eps_at(xx, yy, c);
                      },
                      feat.data());
        if (low_res)
            gather_window(cx, cy, z0.width, z0.height, config.window, lrC,
                          [&](int xx, int yy, int c) {
                              return static_cast<double>((*low_res)[i].at(xx, yy, c));
                          },
                          feat.data() + zf);
        feat[F] = 1.0;

        const int b = model.bucket_of(t);
        auto& X = xtx[b];
        auto& Y = xty[b];
        for (int p = 0; p < dim; ++p) {
            const double fp = feat[p];
            for (int q = p; q < dim; ++q) X(p, q) += fp * feat[q];
            for (int c = 0; c < C; ++c) Y(p, c) += fp * eps_at(cx, cy, c);
        }
        ++count[b];
    }

    model.weights_.assign(static_cast<size_t>(config.buckets) * C * dim, 0.0);
    for (int b = 0; b < config.buckets; ++b) {
        if (count[b] < dim)
            throw std::invalid_argument(
                "train_linear_denoiser: bucket " + std::to_string(b) +
                " has too few samples; increase samples or reduce buckets");
        Eigen::MatrixXd X = xtx[b].selfadjointView<Eigen::Upper>();
        // Relative ridge on the features; the bias row/col stays untouched.
        const double load = config.ridge * static_cast<double>(count[b]);
        for (int p = 0; p < F; ++p) X(p, p) += load;
        const Eigen::MatrixXd W = X.ldlt().solve(xty[b]);
        for (int c = 0; c < C; ++c)
            for (int p = 0; p < dim; ++p)
                model.weights_[(static_cast<size_t>(b) * C + c) * dim + p] = W(p, c);
    }
    return model;
}

LinearDenoiser train_linear_denoiser(const NoiseSchedule& schedule,
                                     const std::vector<ImageF>& latents,
                                     const LinearDenoiser::Config& config,
                                     size_t samples, uint64_t seed) {
    return train_linear_impl(schedule, latents, nullptr, config, samples, seed);
}

LinearDenoiser train_sr_linear_denoiser(const NoiseSchedule& schedule,
                                        const std::vector<ImageF>& latents,
                                        const std::vector<ImageF>& low_res,
                                        const LinearDenoiser::Config& config,
                                        size_t samples, uint64_t seed) {
    return train_linear_impl(schedule, latents, &low_res, config, samples, seed);
}

double eval_denoiser_loss(const Denoiser& denoiser, const NoiseSchedule& schedule,
                          const std::vector<ImageF>& latents,
                          const std::vector<ImageF>* low_res, size_t samples,
                          uint64_t seed) {
    if (latents.empty())
        throw std::invalid_argument("eval_denoiser_loss: no latents");
    if (low_res && low_res->size() != latents.size())
        throw std::invalid_argument("eval_denoiser_loss: latents/low_res count mismatch");
    Rng picker(stable_seed(seed, "eval-loss-pick"));
    const uint64_t noise_base = stable_seed(seed, "eval-loss-noise");
    double total = 0.0;
    size_t values = 0;
    ImageF noise;
    for (size_t s = 0; s < samples; ++s) {
        const size_t i = s % latents.size();
        const ImageF& z0 = latents[i];
        const int t = static_cast<int>(picker.uniform_int(1, schedule.T()));
        noise = ImageF(z0.width, z0.height, z0.channels);
        fill_gaussian(noise, hash_combine(noise_base, s));
        const ImageF zt = schedule.forward_diffuse(z0, t, noise);
        ConditioningBundle cond;
        if (low_res) cond.low_res = &(*low_res)[i];
        const ImageF eps_hat = denoiser.predict(zt, t, cond);
        total += kern::ops().sumsq_diff(eps_hat.data.data(), noise.data.data(),
                                        noise.size());
        values += noise.size();
    }
    return total / static_cast<double>(values);
}

}  // namespace geosynth
