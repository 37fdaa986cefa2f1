// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
//
// NEON kernel variants (aarch64). Same normative operation order as the
// scalar reference; selects (vbsl) instead of vmax/vmin where NaN
// propagation would differ from the reference's comparison-based clamps.

#if defined(__aarch64__)

#include <arm_neon.h>

#include <cmath>

#include "geosynth/kernels.hpp"

namespace geosynth::kern {
namespace {

void lincomb2_neon(const float* x, float a, const float* y, float b,
                   float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vx = vld1q_f32(x + i), vy = vld1q_f32(y + i);
        vst1q_f32(out + i, vaddq_f32(vmulq_n_f32(vx, a), vmulq_n_f32(vy, b)));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void lincomb3_neon(const float* x, float a, const float* y, float b,
                   const float* z, float c, float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t t = vaddq_f32(vmulq_n_f32(vld1q_f32(x + i), a),
                                        vmulq_n_f32(vld1q_f32(y + i), b));
        vst1q_f32(out + i, vaddq_f32(t, vmulq_n_f32(vld1q_f32(z + i), c)));
    }
    for (; i < n; ++i) out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

void affine_neon(const float* x, float a, float b, float* out, size_t n) {
    const float32x4_t vb = vdupq_n_f32(b);
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        vst1q_f32(out + i, vaddq_f32(vmulq_n_f32(vld1q_f32(x + i), a), vb));
    for (; i < n; ++i) out[i] = a * x[i] + b;
}

inline float64x2_t widen_lo(float32x4_t v) { return vcvt_f64_f32(vget_low_f32(v)); }
inline float64x2_t widen_hi(float32x4_t v) { return vcvt_f64_f32(vget_high_f32(v)); }

void accum_scaled_neon(double* acc, const float* x, double w, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vx = vld1q_f32(x + i);
        vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i),
                                     vmulq_n_f64(widen_lo(vx), w)));
        vst1q_f64(acc + i + 2, vaddq_f64(vld1q_f64(acc + i + 2),
                                         vmulq_n_f64(widen_hi(vx), w)));
    }
    for (; i < n; ++i) acc[i] += w * static_cast<double>(x[i]);
}

void accum_weighted_neon(double* acc, const float* x, const double* w,
                         size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vx = vld1q_f32(x + i);
        vst1q_f64(acc + i, vaddq_f64(vld1q_f64(acc + i),
                                     vmulq_f64(vld1q_f64(w + i), widen_lo(vx))));
        vst1q_f64(acc + i + 2,
                  vaddq_f64(vld1q_f64(acc + i + 2),
                            vmulq_f64(vld1q_f64(w + i + 2), widen_hi(vx))));
    }
    for (; i < n; ++i) acc[i] += w[i] * static_cast<double>(x[i]);
}

void narrow_neon(const double* acc, float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x2_t lo = vcvt_f32_f64(vld1q_f64(acc + i));
        const float32x2_t hi = vcvt_f32_f64(vld1q_f64(acc + i + 2));
        vst1q_f32(out + i, vcombine_f32(lo, hi));
    }
    for (; i < n; ++i) out[i] = static_cast<float>(acc[i]);
}

// Reductions: acc01 carries scalar lanes p[0], p[1]; acc23 carries p[2], p[3].
inline double fold4(float64x2_t acc01, float64x2_t acc23, const float* x,
                    size_t tail_start, size_t n) {
    double p[4] = {vgetq_lane_f64(acc01, 0), vgetq_lane_f64(acc01, 1),
                   vgetq_lane_f64(acc23, 0), vgetq_lane_f64(acc23, 1)};
    for (size_t i = tail_start; i < n; ++i)
        p[i & 3] += static_cast<double>(x[i]);
    return (p[0] + p[1]) + (p[2] + p[3]);
}

double sum_neon(const float* x, size_t n) {
    float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vx = vld1q_f32(x + i);
        a01 = vaddq_f64(a01, widen_lo(vx));
        a23 = vaddq_f64(a23, widen_hi(vx));
    }
    return fold4(a01, a23, x, i, n);
}

double dot_neon(const float* x, const float* y, size_t n) {
    float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vx = vld1q_f32(x + i), vy = vld1q_f32(y + i);
        a01 = vaddq_f64(a01, vmulq_f64(widen_lo(vx), widen_lo(vy)));
        a23 = vaddq_f64(a23, vmulq_f64(widen_hi(vx), widen_hi(vy)));
    }
    double p[4] = {vgetq_lane_f64(a01, 0), vgetq_lane_f64(a01, 1),
                   vgetq_lane_f64(a23, 0), vgetq_lane_f64(a23, 1)};
    for (; i < n; ++i)
        p[i & 3] += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return (p[0] + p[1]) + (p[2] + p[3]);
}

double sumsq_diff_neon(const float* x, const float* y, size_t n) {
    float64x2_t a01 = vdupq_n_f64(0.0), a23 = vdupq_n_f64(0.0);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vx = vld1q_f32(x + i), vy = vld1q_f32(y + i);
        const float64x2_t dlo = vsubq_f64(widen_lo(vx), widen_lo(vy));
        const float64x2_t dhi = vsubq_f64(widen_hi(vx), widen_hi(vy));
        a01 = vaddq_f64(a01, vmulq_f64(dlo, dlo));
        a23 = vaddq_f64(a23, vmulq_f64(dhi, dhi));
    }
    double p[4] = {vgetq_lane_f64(a01, 0), vgetq_lane_f64(a01, 1),
                   vgetq_lane_f64(a23, 0), vgetq_lane_f64(a23, 1)};
    for (; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        p[i & 3] += d * d;
    }
    return (p[0] + p[1]) + (p[2] + p[3]);
}

void posterior_eps_neon(const float* z, const float* mu, const float* var,
                        float abar, float sa, float s1, float* out, size_t n) {
    const float om = 1.0f - abar;
    const float32x4_t vom = vdupq_n_f32(om);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const float32x4_t vz = vld1q_f32(z + i);
        const float32x4_t vm = vld1q_f32(mu + i);
        const float32x4_t vv = vld1q_f32(var + i);
        const float32x4_t t = vsubq_f32(vz, vmulq_n_f32(vm, sa));
        const float32x4_t g = vdivq_f32(
            vmulq_n_f32(vv, sa), vaddq_f32(vmulq_n_f32(vv, abar), vom));
        const float32x4_t x0 = vaddq_f32(vm, vmulq_f32(g, t));
        vst1q_f32(out + i,
                  vdivq_f32(vsubq_f32(vz, vmulq_n_f32(x0, sa)),
                            vdupq_n_f32(s1)));
    }
    for (; i < n; ++i) {
        const float t = z[i] - sa * mu[i];
        const float g = (sa * var[i]) / (abar * var[i] + om);
        const float x0 = mu[i] + g * t;
        out[i] = (z[i] - sa * x0) / s1;
    }
}

void quantize_u8_neon(const float* x, uint8_t* out, size_t n) {
    const float32x4_t zero = vdupq_n_f32(0.0f), k255 = vdupq_n_f32(255.0f),
                      half = vdupq_n_f32(0.5f);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        uint16x4_t half16[2];
        for (int b = 0; b < 2; ++b) {
            float32x4_t v = vaddq_f32(vmulq_n_f32(vld1q_f32(x + i + 4 * b), 255.0f), half);
            v = vrndmq_f32(v);  // floor
            // select(v > 0, v, 0): NaN compares false, so NaN -> 0
            v = vbslq_f32(vcgtq_f32(v, zero), v, zero);
            v = vbslq_f32(vcltq_f32(v, k255), v, k255);
            half16[b] = vmovn_u32(vcvtq_u32_f32(v));
        }
        vst1_u8(out + i, vmovn_u16(vcombine_u16(half16[0], half16[1])));
    }
    for (; i < n; ++i) {
        float v = std::floor(x[i] * 255.0f + 0.5f);
        v = (v > 0.0f) ? v : 0.0f;
        v = (v < 255.0f) ? v : 255.0f;
        out[i] = static_cast<uint8_t>(v);
    }
}

void dequantize_u8_neon(const uint8_t* x, float* out, size_t n) {
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const uint16x8_t u16 = vmovl_u8(vld1_u8(x + i));
        const float32x4_t lo = vcvtq_f32_u32(vmovl_u16(vget_low_u16(u16)));
        const float32x4_t hi = vcvtq_f32_u32(vmovl_u16(vget_high_u16(u16)));
        vst1q_f32(out + i, vmulq_n_f32(lo, 1.0f / 255.0f));
        vst1q_f32(out + i + 4, vmulq_n_f32(hi, 1.0f / 255.0f));
    }
    for (; i < n; ++i) out[i] = static_cast<float>(x[i]) * (1.0f / 255.0f);
}

}  // namespace

const Ops& neon_ops() {
    static const Ops table = {
        "neon",
        lincomb2_neon,
        lincomb3_neon,
        affine_neon,
        accum_scaled_neon,
        accum_weighted_neon,
        narrow_neon,
        sum_neon,
        dot_neon,
        sumsq_diff_neon,
        posterior_eps_neon,
        quantize_u8_neon,
        dequantize_u8_neon,
    };
    return table;
}

}  // namespace geosynth::kern

#endif  // __aarch64__
