// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "geosynth/image.hpp"

namespace geosynth {

/// Decode-side window blending parameters. `window` is in output (image)
/// pixels and must be a multiple of the 4-px patch size; `overlap` is the
/// fraction of the window shared between neighbouring windows per axis
/// (stride = window * (1 - overlap)).
struct DecodeTiling {
    int window = 512;
    double overlap = 0.25;
};

/// Linear latent codec over non-overlapping 4x4 RGB patches (48-vectors).
///
/// encode: z = A (p - mean); decode: p = mean + B z. A's rows are the top-C
/// principal directions of the training patches scaled so each latent
/// channel has unit variance on the training set; B is the matching
/// pseudo-inverse, so decode(encode(x)) is the projection of x onto the
/// learned patch subspace regardless of that scaling. Because patches do not
/// overlap, both maps are local: any partition of the latent plane decodes
/// to exactly the same image patch-by-patch, which is what makes windowed
/// decoding equivalent to whole-image decoding.
class LinearLatentCodec {
public:
    static constexpr int kPatch = 4;
    static constexpr int kPatchDim = kPatch * kPatch * 3;  // 48

    LinearLatentCodec() = default;

    int channels() const { return channels_; }
    bool valid() const { return channels_ > 0; }

    /// Image (H, W, 3) -> latent (H/4, W/4, C). H and W must be multiples
    /// of 4.
    ImageF encode(const ImageF& img) const;

    /// Latent (h, w, C) -> image (4h, 4w, 3).
    ImageF decode(const ImageF& latent) const;

    /// Windowed decode with triangular ramp blending in the overlaps,
    /// normalized per pixel. Bounded memory per window; equal to decode()
    /// within float blending error.
    ImageF tiled_decode(const ImageF& latent, const DecodeTiling& tiling) const;

    /// Versioned binary model file.
    void save(const std::filesystem::path& path) const;
    static LinearLatentCodec load(const std::filesystem::path& path);

    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& enc() const { return A_; }   // C x 48, row-major
    const std::vector<double>& dec() const { return B_; }   // 48 x C, row-major

private:
    friend LinearLatentCodec fit_codec(const std::vector<ImageF>&, int, size_t,
                                       uint64_t);
    int channels_ = 0;
    std::vector<double> mean_;  // 48
    std::vector<double> A_;     // C*48
    std::vector<double> B_;     // 48*C
};

/// Fit a codec by PCA over 4x4 patches drawn from the images (RGB, dims
/// divisible by 4). At most max_patches patches are used, subsampled
/// deterministically from `seed`. Throws std::invalid_argument for C outside
/// [1, 48] or too little data.
LinearLatentCodec fit_codec(const std::vector<ImageF>& images, int latent_channels,
                            size_t max_patches = 200000, uint64_t seed = 0);

}  // namespace geosynth
