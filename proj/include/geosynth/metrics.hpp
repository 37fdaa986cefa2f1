// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "geosynth/image.hpp"
#include "geosynth/tiling.hpp"

namespace geosynth {

/// Sample statistics of a feature set: count, mean and (n-1)-normalized
/// covariance.
struct FeatureStats {
    int64_t n = 0;
    std::vector<double> mean;  // d
    std::vector<double> cov;   // d x d, row-major, symmetric
    int dim() const { return static_cast<int>(mean.size()); }
};

/// Accumulate stats over a feature matrix (n rows of equal dimension, n >= 2).
FeatureStats compute_stats(const std::vector<std::vector<float>>& features);

/// Fréchet distance between the Gaussians summarized by two stats:
/// |mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}), with the matrix
/// square root taken on the symmetrized product S_a^{1/2} S_b S_a^{1/2}.
/// Eigenvalues below -1e-6 are an error; small negatives clamp to zero.
double frechet_distance(const FeatureStats& a, const FeatureStats& b);

/// Kernel two-sample estimate: mean and standard error of the unbiased
/// MMD^2 with polynomial kernel k(x, y) = (x.y / d + 1)^3 over `n_subsets`
/// subset pairs of size `subset_size`, each drawn without replacement.
struct KidResult {
    double mean = 0.0;
    double std_error = 0.0;
    int subset_size = 0;
    int n_subsets = 0;
};

KidResult kid(const std::vector<std::vector<float>>& a,
              const std::vector<std::vector<float>>& b, int subset_size = 1000,
              int n_subsets = 100, uint64_t seed = 0);

/// Null-calibrated kernel estimate for a single pool compared with itself.
/// Each subset pair is formed by drawing 2 * subset_size rows without
/// replacement and splitting them into two disjoint halves, so every draw
/// has expectation zero under exchangeability. Running `kid` on two copies
/// of the same pool instead lets identical rows meet in the cross-kernel
/// term, whose self-similarity biases the estimate below zero.
/// Requires features.size() >= 2 * subset_size.
KidResult kid_self(const std::vector<std::vector<float>>& features,
                   int subset_size = 1000, int n_subsets = 100,
                   uint64_t seed = 0);

/// Deterministic image -> feature-vector map.
class FeatureExtractor {
public:
    virtual ~FeatureExtractor() = default;
    virtual std::vector<float> extract(const ImageU8& image) const = 0;
    virtual int dim() const = 0;
};

/// Default extractor: bilinear-downsample to `down` x `down` RGB, flatten,
/// and project with a seeded random sign matrix (entries +-1/sqrt(in_dim))
/// to `out_dim` features. The numbers are internally comparable across runs
/// of this codebase only — they come from random projections, not from a
/// pretrained network, so they must never be compared against published
/// figure-of-merit tables.
class RandomProjectionExtractor : public FeatureExtractor {
public:
    explicit RandomProjectionExtractor(int out_dim = 2048, int down = 64,
                                       uint64_t seed = 17);
    std::vector<float> extract(const ImageU8& image) const override;
    int dim() const override { return out_dim_; }

private:
    int out_dim_, down_;
    std::vector<uint64_t> sign_bits_;  // row-major (input index, output index)
};

/// Extract features for a batch of images (parallel, order-preserving).
std::vector<std::vector<float>> extract_features(const FeatureExtractor& extractor,
                                                 const std::vector<ImageU8>& images);

/// Split a 2048x2048 evaluation image into the 7x7 grid of 512x512 tiles at
/// stride 256 (49 overlapping tiles), row-major.
std::vector<ImageU8> eval_split(const ImageU8& image);

/// Second-difference seam diagnostic: |I(p-1) - 2 I(p) + I(p+1)| along both
/// axes, averaged separately over stencils that straddle interior tile
/// boundaries of the layout and over all remaining (interior) stencils.
/// ratio = boundary / interior; a constant image reports ratio 1.
struct SeamReport {
    double boundary = 0.0;
    double interior = 0.0;
    double ratio = 1.0;
};

SeamReport seam_energy(const ImageF& image, const TileLayout& layout);

}  // namespace geosynth
