// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels. Every SIMD variant is tested for bit-identical
// output against these, so the exact operation order here is normative:
// do not "simplify" float expressions (the compiler is held to IEEE
// semantics by -ffp-contract=off).

#include "geosynth/kernels.hpp"

#include <cmath>

namespace geosynth::kern {
namespace {

void lincomb2_scalar(const float* x, float a, const float* y, float b,
                     float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void lincomb3_scalar(const float* x, float a, const float* y, float b,
                     const float* z, float c, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

void affine_scalar(const float* x, float a, float b, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a * x[i] + b;
}

void accum_scaled_scalar(double* acc, const float* x, double w, size_t n) {
    for (size_t i = 0; i < n; ++i) acc[i] += w * static_cast<double>(x[i]);
}

void accum_weighted_scalar(double* acc, const float* x, const double* w,
                           size_t n) {
    for (size_t i = 0; i < n; ++i) acc[i] += w[i] * static_cast<double>(x[i]);
}

void narrow_scalar(const double* acc, float* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = static_cast<float>(acc[i]);
}

// Reductions: 4 double lanes by index % 4, folded (l0+l1)+(l2+l3).
double sum_scalar(const float* x, size_t n) {
    double p[4] = {0.0, 0.0, 0.0, 0.0};
    for (size_t i = 0; i < n; ++i) p[i & 3] += static_cast<double>(x[i]);
    return (p[0] + p[1]) + (p[2] + p[3]);
}

double dot_scalar(const float* x, const float* y, size_t n) {
    double p[4] = {0.0, 0.0, 0.0, 0.0};
    for (size_t i = 0; i < n; ++i)
        p[i & 3] += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return (p[0] + p[1]) + (p[2] + p[3]);
}

double sumsq_diff_scalar(const float* x, const float* y, size_t n) {
    double p[4] = {0.0, 0.0, 0.0, 0.0};
    for (size_t i = 0; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        p[i & 3] += d * d;
    }
    return (p[0] + p[1]) + (p[2] + p[3]);
}

void posterior_eps_scalar(const float* z, const float* mu, const float* var,
                          float abar, float sa, float s1, float* out,
                          size_t n) {
    const float om = 1.0f - abar;
    for (size_t i = 0; i < n; ++i) {
        const float t = z[i] - sa * mu[i];
        const float g = (sa * var[i]) / (abar * var[i] + om);
        const float x0 = mu[i] + g * t;
        out[i] = (z[i] - sa * x0) / s1;
    }
}

void quantize_u8_scalar(const float* x, uint8_t* out, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        float v = std::floor(x[i] * 255.0f + 0.5f);
        // Written as selects (not clamps) so NaN maps to 0 exactly like the
        // SIMD max/min sequence does.
        v = (v > 0.0f) ? v : 0.0f;
        v = (v < 255.0f) ? v : 255.0f;
        out[i] = static_cast<uint8_t>(v);
    }
}

void dequantize_u8_scalar(const uint8_t* x, float* out, size_t n) {
    constexpr float kInv = 1.0f / 255.0f;
    for (size_t i = 0; i < n; ++i) out[i] = static_cast<float>(x[i]) * kInv;
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        "scalar",
        lincomb2_scalar,
        lincomb3_scalar,
        affine_scalar,
        accum_scaled_scalar,
        accum_weighted_scalar,
        narrow_scalar,
        sum_scalar,
        dot_scalar,
        sumsq_diff_scalar,
        posterior_eps_scalar,
        quantize_u8_scalar,
        dequantize_u8_scalar,
    };
    return table;
}

}  // namespace geosynth::kern
