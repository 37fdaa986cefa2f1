// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/codec.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <fstream>

#include "geosynth/png_io.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

namespace {

constexpr uint32_t kMagic = 0x434c5347;  // "GSLC"
constexpr uint32_t kVersion = 1;

// Patch layout: k = (dy*4 + dx)*3 + c.
inline void gather_patch(const ImageF& img, int px, int py, double* out) {
    int k = 0;
    for (int dy = 0; dy < LinearLatentCodec::kPatch; ++dy) {
        const float* row = img.row(py * 4 + dy) +
                           static_cast<size_t>(px) * 4 * img.channels;
        for (int dx = 0; dx < LinearLatentCodec::kPatch; ++dx)
            for (int c = 0; c < 3; ++c)
                out[k++] = static_cast<double>(row[dx * 3 + c]);
    }
}

void check_encodable(const ImageF& img, const char* who) {
    if (img.channels != 3)
        throw std::invalid_argument(std::string(who) + ": image must be RGB");
    if (img.width % 4 || img.height % 4 || img.width == 0 || img.height == 0)
        throw std::invalid_argument(std::string(who) +
                                    ": dimensions must be positive multiples of 4");
}

}  // namespace

ImageF LinearLatentCodec::encode(const ImageF& img) const {
    if (!valid()) throw std::logic_error("encode: codec not fitted");
    check_encodable(img, "encode");
    const int w = img.width / 4, h = img.height / 4;
    ImageF latent(w, h, channels_);
    double patch[kPatchDim];
    for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) {
            gather_patch(img, px, py, patch);
            float* out = latent.row(py) + static_cast<size_t>(px) * channels_;
            for (int c = 0; c < channels_; ++c) {
                const double* a = A_.data() + static_cast<size_t>(c) * kPatchDim;
                double acc = 0.0;
                for (int k = 0; k < kPatchDim; ++k)
                    acc += a[k] * (patch[k] - mean_[k]);
                out[c] = static_cast<float>(acc);
            }
        }
    return latent;
}

ImageF LinearLatentCodec::decode(const ImageF& latent) const {
    if (!valid()) throw std::logic_error("decode: codec not fitted");
    if (latent.channels != channels_)
        throw std::invalid_argument("decode: latent channel mismatch");
    ImageF img(latent.width * 4, latent.height * 4, 3);
    for (int py = 0; py < latent.height; ++py)
        for (int px = 0; px < latent.width; ++px) {
            const float* z = latent.row(py) + static_cast<size_t>(px) * channels_;
            int k = 0;
            for (int dy = 0; dy < kPatch; ++dy) {
                float* row = img.row(py * 4 + dy) + static_cast<size_t>(px) * 4 * 3;
                for (int dx = 0; dx < kPatch; ++dx)
                    for (int c = 0; c < 3; ++c) {
                        const double* b = B_.data() + static_cast<size_t>(k) * channels_;
                        double acc = mean_[k];
                        for (int j = 0; j < channels_; ++j)
                            acc += b[j] * static_cast<double>(z[j]);
                        row[dx * 3 + c] = static_cast<float>(acc);
                        ++k;
                    }
            }
        }
    return img;
}

ImageF LinearLatentCodec::tiled_decode(const ImageF& latent,
                                       const DecodeTiling& tiling) const {
    if (!valid()) throw std::logic_error("tiled_decode: codec not fitted");
    if (latent.channels != channels_)
        throw std::invalid_argument("tiled_decode: latent channel mismatch");
    if (tiling.window < 4 || tiling.window % 4)
        throw std::invalid_argument("tiled_decode: window must be a positive multiple of 4");
    if (!(tiling.overlap >= 0.0 && tiling.overlap <= 0.9))
        throw std::invalid_argument("tiled_decode: overlap outside [0, 0.9]");

    // Work in latent pixels (1 latent px = 4 output px).
    const int wlat = tiling.window / 4;
    int slat = static_cast<int>(std::lround(wlat * (1.0 - tiling.overlap)));
    if (slat < 1) slat = 1;

    auto starts = [&](int extent) {
        std::vector<int> v;
        if (extent <= wlat) {
            v.push_back(0);
            return v;
        }
        for (int o = 0;; o += slat) {
            if (o + wlat >= extent) {
                v.push_back(extent - wlat);
                break;
            }
            v.push_back(o);
        }
        return v;
    };
    const auto xs = starts(latent.width);
    const auto ys = starts(latent.height);

    // Triangular ramp over the per-axis overlap length, in output pixels.
    const int ramp = tiling.window - slat * 4;
    auto profile = [&](int u, int extent_px) {
        double w = 1.0;
        if (ramp > 0) {
            if (u < ramp) w = (u + 1.0) / (ramp + 1.0);
            const int from_end = extent_px - 1 - u;
            if (from_end < ramp) w = std::min(w, (from_end + 1.0) / (ramp + 1.0));
        }
        return w;
    };

    const int out_w = latent.width * 4, out_h = latent.height * 4;
    ImageD acc(out_w, out_h, 3, 0.0);
    ImageD wsum(out_w, out_h, 1, 0.0);

    for (const int oy : ys)
        for (const int ox : xs) {
            const int cw = std::min(wlat, latent.width - ox);
            const int ch = std::min(wlat, latent.height - oy);
            const ImageF piece = decode(crop(latent, ox, oy, cw, ch));
            for (int y = 0; y < piece.height; ++y) {
                const double wy = profile(y, piece.height);
                const float* src = piece.row(y);
                double* dst = acc.row(oy * 4 + y) + static_cast<size_t>(ox) * 4 * 3;
                double* wrow = wsum.row(oy * 4 + y) + static_cast<size_t>(ox) * 4;
                for (int x = 0; x < piece.width; ++x) {
                    const double w = wy * profile(x, piece.width);
                    wrow[x] += w;
                    for (int c = 0; c < 3; ++c)
                        dst[x * 3 + c] += w * static_cast<double>(src[x * 3 + c]);
                }
            }
        }

    ImageF out(out_w, out_h, 3);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const double w = wsum.at(x, y, 0);
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = static_cast<float>(acc.at(x, y, c) / w);
        }
    return out;
}

void LinearLatentCodec::save(const std::filesystem::path& path) const {
    if (!valid()) throw std::logic_error("save: codec not fitted");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("codec save: cannot open " + path.string());
    const uint32_t header[3] = {kMagic, kVersion, static_cast<uint32_t>(channels_)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    auto write_vec = [&](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    write_vec(mean_);
    write_vec(A_);
    write_vec(B_);
    if (!out) throw io_error("codec save: write failed for " + path.string());
}

LinearLatentCodec LinearLatentCodec::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("codec load: cannot open " + path.string());
    uint32_t header[3];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || header[0] != kMagic)
        throw io_error("codec load: not a codec file: " + path.string());
    if (header[1] != kVersion)
        throw io_error("codec load: unsupported version " + std::to_string(header[1]));
    const int C = static_cast<int>(header[2]);
    if (C < 1 || C > kPatchDim)
        throw io_error("codec load: corrupt channel count");
    LinearLatentCodec codec;
    codec.channels_ = C;
    codec.mean_.resize(kPatchDim);
    codec.A_.resize(static_cast<size_t>(C) * kPatchDim);
    codec.B_.resize(static_cast<size_t>(kPatchDim) * C);
    auto read_vec = [&](std::vector<double>& v) {
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    read_vec(codec.mean_);
    read_vec(codec.A_);
    read_vec(codec.B_);
    if (!in) throw io_error("codec load: truncated file " + path.string());
    return codec;
}

LinearLatentCodec fit_codec(const std::vector<ImageF>& images, int latent_channels,
                            size_t max_patches, uint64_t seed) {
    constexpr int D = LinearLatentCodec::kPatchDim;
    if (latent_channels < 1 || latent_channels > D)
        throw std::invalid_argument("fit_codec: latent_channels outside [1, 48]");
    if (images.empty()) throw std::invalid_argument("fit_codec: no images");

    // Count available patches, then take all or a deterministic subsample.
    size_t total = 0;
    for (const auto& img : images) {
        check_encodable(img, "fit_codec");
        total += static_cast<size_t>(img.width / 4) * (img.height / 4);
    }
    if (total < static_cast<size_t>(latent_channels) + 1)
        throw std::invalid_argument("fit_codec: not enough patches");

    const size_t take = std::min(total, max_patches);
    // Bernoulli thinning with a safety margin, then exact trim.
    Rng rng(stable_seed(seed, "codec-fit"));
    const double keep = total == take ? 1.1 : static_cast<double>(take) * 1.05 / total;

    Eigen::MatrixXd X(take, D);
    size_t row = 0;
    double patch[D];
    for (const auto& img : images) {
        const int w = img.width / 4, h = img.height / 4;
        for (int py = 0; py < h && row < take; ++py)
            for (int px = 0; px < w && row < take; ++px) {
                if (keep < 1.0 && rng.uniform() > keep) continue;
                gather_patch(img, px, py, patch);
                for (int k = 0; k < D; ++k) X(row, k) = patch[k];
                ++row;
            }
    }
    X.conservativeResize(row, D);
    if (row < static_cast<size_t>(latent_channels) + 1)
        throw std::invalid_argument("fit_codec: subsample too small");

    const Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;
    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(X.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("fit_codec: eigendecomposition failed");

    LinearLatentCodec codec;
    codec.channels_ = latent_channels;
    codec.mean_.assign(mean.data(), mean.data() + D);
    codec.A_.resize(static_cast<size_t>(latent_channels) * D);
    codec.B_.resize(static_cast<size_t>(D) * latent_channels);

    const double lam_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    const double lam_floor = std::max(lam_max, 1.0) * 1e-12;
    for (int c = 0; c < latent_channels; ++c) {
        // Eigenvalues come out ascending; component c is the c-th largest.
        const int src = D - 1 - c;
        Eigen::VectorXd v = eig.eigenvectors().col(src);
        // Deterministic sign: largest-magnitude entry positive.
        int arg = 0;
        for (int k = 1; k < D; ++k)
            if (std::abs(v[k]) > std::abs(v[arg])) arg = k;
        if (v[arg] < 0.0) v = -v;
        // Whiten: unit latent variance on the training set. The decoder
        // applies the inverse scale, so reconstruction is scale-free.
        const double s = std::sqrt(std::max(eig.eigenvalues()[src], lam_floor));
        for (int k = 0; k < D; ++k) {
            codec.A_[static_cast<size_t>(c) * D + k] = v[k] / s;
            codec.B_[static_cast<size_t>(k) * latent_channels + c] = v[k] * s;
        }
    }
    return codec;
}

}  // namespace geosynth
