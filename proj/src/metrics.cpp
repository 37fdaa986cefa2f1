// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/metrics.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>

#include "geosynth/kernels.hpp"
#include "geosynth/parallel.hpp"
#include "geosynth/rng.hpp"

namespace geosynth {

FeatureStats compute_stats(const std::vector<std::vector<float>>& features) {
    if (features.size() < 2)
        throw std::invalid_argument("compute_stats: need at least 2 samples");
    const size_t d = features.front().size();
    if (d == 0) throw std::invalid_argument("compute_stats: empty feature vectors");
    for (const auto& f : features)
        if (f.size() != d)
            throw std::invalid_argument("compute_stats: ragged feature matrix");

    FeatureStats stats;
    stats.n = static_cast<int64_t>(features.size());
    stats.mean.assign(d, 0.0);
    for (const auto& f : features)
        for (size_t j = 0; j < d; ++j) stats.mean[j] += f[j];
    for (double& m : stats.mean) m /= static_cast<double>(stats.n);

    stats.cov.assign(d * d, 0.0);
    std::vector<double> centered(d);
    for (const auto& f : features) {
        for (size_t j = 0; j < d; ++j) centered[j] = f[j] - stats.mean[j];
        for (size_t p = 0; p < d; ++p) {
            const double cp = centered[p];
            double* row = stats.cov.data() + p * d;
            for (size_t q = p; q < d; ++q) row[q] += cp * centered[q];
        }
    }
    const double denom = static_cast<double>(stats.n - 1);
    for (size_t p = 0; p < d; ++p)
        for (size_t q = p; q < d; ++q) {
            const double v = stats.cov[p * d + q] / denom;
            stats.cov[p * d + q] = v;
            stats.cov[q * d + p] = v;
        }
    return stats;
}

namespace {

Eigen::MatrixXd as_matrix(const FeatureStats& s) {
    const int d = s.dim();
    Eigen::MatrixXd m(d, d);
    for (int p = 0; p < d; ++p)
        for (int q = 0; q < d; ++q) m(p, q) = s.cov[static_cast<size_t>(p) * d + q];
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-9)
        throw std::invalid_argument("frechet_distance: covariance not symmetric");
    return m;
}

// Positive-semidefinite square root; eigenvalues below -1e-6 are an error.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error(std::string("frechet_distance: eigendecomposition "
                                             "failed for ") +
                                 what);
    Eigen::VectorXd ev = eig.eigenvalues();
    for (int i = 0; i < ev.size(); ++i) {
        if (ev[i] < -1e-6)
            throw std::invalid_argument(
                std::string("frechet_distance: covariance not positive "
                            "semidefinite (") +
                what + ")");
        ev[i] = std::sqrt(std::max(ev[i], 0.0));
    }
    return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

double frechet_distance(const FeatureStats& a, const FeatureStats& b) {
    if (a.dim() != b.dim() || a.dim() == 0)
        throw std::invalid_argument("frechet_distance: dimension mismatch");
    const int d = a.dim();
    double mean_term = 0.0;
    for (int j = 0; j < d; ++j) {
        const double diff = a.mean[j] - b.mean[j];
        mean_term += diff * diff;
    }
    const Eigen::MatrixXd sa = as_matrix(a);
    const Eigen::MatrixXd sb = as_matrix(b);
    const Eigen::MatrixXd ra = psd_sqrt(sa, "first argument");
    // Symmetrized product: eigenvalues of ra sb ra equal those of sa sb but
    // the symmetric form keeps the solver stable.
    const Eigen::MatrixXd cross = psd_sqrt(ra * sb * ra, "cross term");
    const double value =
        mean_term + sa.trace() + sb.trace() - 2.0 * cross.trace();
    // The exact value is >= 0; numerical cancellation may leave a tiny
    // negative residue.
    return std::max(value, 0.0);
}

namespace {

double poly_kernel(const float* x, const float* y, size_t d) {
    const double base = kern::ops().dot(x, y, d) / static_cast<double>(d) + 1.0;
    return base * base * base;
}

// Unbiased MMD^2 between the selected rows of a and b.
double mmd2_subset(const std::vector<std::vector<float>>& a,
                   const std::vector<std::vector<float>>& b,
                   const std::vector<uint32_t>& ia, const std::vector<uint32_t>& ib,
                   size_t d) {
    const size_t m = ia.size();
    double kaa = 0.0, kbb = 0.0, kab = 0.0;
    for (size_t i = 0; i < m; ++i) {
        const float* xa = a[ia[i]].data();
        const float* xb = b[ib[i]].data();
        for (size_t j = i + 1; j < m; ++j) {
            kaa += poly_kernel(xa, a[ia[j]].data(), d);
            kbb += poly_kernel(xb, b[ib[j]].data(), d);
        }
        for (size_t j = 0; j < m; ++j) kab += poly_kernel(xa, b[ib[j]].data(), d);
    }
    const double mm = static_cast<double>(m);
    return (2.0 * kaa) / (mm * (mm - 1.0)) + (2.0 * kbb) / (mm * (mm - 1.0)) -
           (2.0 * kab) / (mm * mm);
}

std::vector<uint32_t> sample_without_replacement(size_t n, size_t k, Rng& rng) {
    // Partial Fisher-Yates over an index pool.
    std::vector<uint32_t> pool(n);
    for (size_t i = 0; i < n; ++i) pool[i] = static_cast<uint32_t>(i);
    for (size_t i = 0; i < k; ++i) {
        const size_t j =
            i + static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(n - i - 1)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

}  // namespace

KidResult kid(const std::vector<std::vector<float>>& a,
              const std::vector<std::vector<float>>& b, int subset_size,
              int n_subsets, uint64_t seed) {
    if (subset_size < 2) throw std::invalid_argument("kid: subset_size must be >= 2");
    if (n_subsets < 2) throw std::invalid_argument("kid: n_subsets must be >= 2");
    if (a.size() < static_cast<size_t>(subset_size) ||
        b.size() < static_cast<size_t>(subset_size))
        throw std::invalid_argument("kid: fewer samples than subset_size");
    const size_t d = a.front().size();
    for (const auto& f : a)
        if (f.size() != d) throw std::invalid_argument("kid: ragged feature matrix");
    for (const auto& f : b)
        if (f.size() != d) throw std::invalid_argument("kid: ragged feature matrix");

    std::vector<double> estimates(n_subsets);
    parallel_for(static_cast<size_t>(n_subsets), [&](size_t s) {
        Rng rng(stable_seed(seed, "kid-subset", s));
        const auto ia = sample_without_replacement(a.size(), subset_size, rng);
        const auto ib = sample_without_replacement(b.size(), subset_size, rng);
        estimates[s] = mmd2_subset(a, b, ia, ib, d);
    });

    KidResult result;
    result.subset_size = subset_size;
    result.n_subsets = n_subsets;
    for (const double e : estimates) result.mean += e;
    result.mean /= n_subsets;
    double var = 0.0;
    for (const double e : estimates) var += (e - result.mean) * (e - result.mean);
    var /= (n_subsets - 1);
    result.std_error = std::sqrt(var / n_subsets);
    return result;
}

KidResult kid_self(const std::vector<std::vector<float>>& features,
                   int subset_size, int n_subsets, uint64_t seed) {
    if (subset_size < 2)
        throw std::invalid_argument("kid_self: subset_size must be >= 2");
    if (n_subsets < 2)
        throw std::invalid_argument("kid_self: n_subsets must be >= 2");
    if (features.size() < 2 * static_cast<size_t>(subset_size))
        throw std::invalid_argument(
            "kid_self: need at least 2 * subset_size samples");
    const size_t d = features.front().size();
    for (const auto& f : features)
        if (f.size() != d)
            throw std::invalid_argument("kid_self: ragged feature matrix");

    std::vector<double> estimates(n_subsets);
    parallel_for(static_cast<size_t>(n_subsets), [&](size_t s) {
        Rng rng(stable_seed(seed, "kid-self-subset", s));
        const auto pick = sample_without_replacement(
            features.size(), 2 * static_cast<size_t>(subset_size), rng);
        std::vector<uint32_t> ia(pick.begin(), pick.begin() + subset_size);
        std::vector<uint32_t> ib(pick.begin() + subset_size, pick.end());
        estimates[s] = mmd2_subset(features, features, ia, ib, d);
    });

    KidResult result;
    result.subset_size = subset_size;
    result.n_subsets = n_subsets;
    for (const double e : estimates) result.mean += e;
    result.mean /= n_subsets;
    double var = 0.0;
    for (const double e : estimates) var += (e - result.mean) * (e - result.mean);
    var /= (n_subsets - 1);
    result.std_error = std::sqrt(var / n_subsets);
    return result;
}

RandomProjectionExtractor::RandomProjectionExtractor(int out_dim, int down,
                                                     uint64_t seed)
    : out_dim_(out_dim), down_(down) {
    if (out_dim < 1 || down < 1)
        throw std::invalid_argument("RandomProjectionExtractor: bad dimensions");
    const size_t in_dim = static_cast<size_t>(down) * down * 3;
    const size_t bits = in_dim * static_cast<size_t>(out_dim);
    const size_t words = (bits + 63) / 64;
    sign_bits_.resize(words);
    const uint64_t base = stable_seed(seed, "random-projection");
    for (size_t w = 0; w < words; ++w) sign_bits_[w] = mix64(hash_combine(base, w));
}

std::vector<float> RandomProjectionExtractor::extract(const ImageU8& image) const {
    if (image.channels != 3)
        throw std::invalid_argument("RandomProjectionExtractor: expects RGB input");
    if (image.width < 1 || image.height < 1)
        throw std::invalid_argument("RandomProjectionExtractor: empty image");
    const ImageF small = resize_bilinear(dequantize(image), down_, down_);
    const size_t in_dim = static_cast<size_t>(down_) * down_ * 3;
    const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));

    std::vector<double> acc(out_dim_, 0.0);
    for (size_t i = 0; i < in_dim; ++i) {
        const double x = small.data[i];
        if (x == 0.0) continue;
        const size_t bit0 = i * static_cast<size_t>(out_dim_);
        for (int j = 0; j < out_dim_; ++j) {
            const size_t bit = bit0 + j;
            const bool neg = (sign_bits_[bit >> 6] >> (bit & 63)) & 1u;
            acc[j] += neg ? -x : x;
        }
    }
    std::vector<float> out(out_dim_);
    for (int j = 0; j < out_dim_; ++j)
        out[j] = static_cast<float>(acc[j] * scale);
    return out;
}

std::vector<std::vector<float>> extract_features(const FeatureExtractor& extractor,
                                                 const std::vector<ImageU8>& images) {
    std::vector<std::vector<float>> features(images.size());
    parallel_for(images.size(),
                 [&](size_t i) { features[i] = extractor.extract(images[i]); });
    return features;
}

std::vector<ImageU8> eval_split(const ImageU8& image) {
    if (image.width != 2048 || image.height != 2048)
        throw std::invalid_argument("eval_split: expects a 2048 x 2048 image");
    std::vector<ImageU8> tiles;
    tiles.reserve(49);
    for (int y0 = 0; y0 + 512 <= 2048; y0 += 256)
        for (int x0 = 0; x0 + 512 <= 2048; x0 += 256)
            tiles.push_back(crop(image, x0, y0, 512, 512));
    return tiles;
}

SeamReport seam_energy(const ImageF& image, const TileLayout& layout) {
    if (image.width != layout.canvas_w || image.height != layout.canvas_h)
        throw std::invalid_argument("seam_energy: image does not match the layout");
    if (image.width < 3 || image.height < 3)
        throw std::invalid_argument("seam_energy: image too small for the stencil");

    // Interior cut lines: tile edges that are not canvas edges. A cut at
    // coordinate v separates v-1 from v; the straddling stencil centers are
    // v-1 and v.
    std::set<int> xcuts, ycuts;
    for (const auto& t : layout.tiles) {
        if (t.x0 > 0) xcuts.insert(t.x0);
        if (t.x0 + t.w < layout.canvas_w) xcuts.insert(t.x0 + t.w);
        if (t.y0 > 0) ycuts.insert(t.y0);
        if (t.y0 + t.h < layout.canvas_h) ycuts.insert(t.y0 + t.h);
    }
    std::vector<char> xb(image.width, 0), yb(image.height, 0);
    for (const int c : xcuts) {
        if (c - 1 >= 0) xb[c - 1] = 1;
        if (c < image.width) xb[c] = 1;
    }
    for (const int c : ycuts) {
        if (c - 1 >= 0) yb[c - 1] = 1;
        if (c < image.height) yb[c] = 1;
    }

    double sum_b = 0.0, sum_i = 0.0;
    int64_t n_b = 0, n_i = 0;
    const int C = image.channels;
    for (int y = 0; y < image.height; ++y)
        for (int x = 1; x + 1 < image.width; ++x)
            for (int c = 0; c < C; ++c) {
                const double v = std::abs(static_cast<double>(image.at(x - 1, y, c)) -
                                          2.0 * image.at(x, y, c) +
                                          image.at(x + 1, y, c));
                if (xb[x]) {
                    sum_b += v;
                    ++n_b;
                } else {
                    sum_i += v;
                    ++n_i;
                }
            }
    for (int y = 1; y + 1 < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < C; ++c) {
                const double v = std::abs(static_cast<double>(image.at(x, y - 1, c)) -
                                          2.0 * image.at(x, y, c) +
                                          image.at(x, y + 1, c));
                if (yb[y]) {
                    sum_b += v;
                    ++n_b;
                } else {
                    sum_i += v;
                    ++n_i;
                }
            }
    if (n_b == 0)
        throw std::invalid_argument("seam_energy: layout has no interior boundaries");

    SeamReport report;
    report.boundary = sum_b / static_cast<double>(n_b);
    report.interior = n_i > 0 ? sum_i / static_cast<double>(n_i) : 0.0;
    if (report.boundary == 0.0 && report.interior == 0.0)
        report.ratio = 1.0;
    else if (report.interior == 0.0)
        report.ratio = std::numeric_limits<double>::infinity();
    else
        report.ratio = report.boundary / report.interior;
    return report;
}

}  // namespace geosynth
