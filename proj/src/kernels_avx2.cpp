// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2 kernel variants. This translation unit is compiled with -mavx2 (and
// nothing stronger); dispatch happens at runtime. No FMA: bit-equality with
// the scalar reference requires the same separate mul/add roundings.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cmath>

#include "geosynth/kernels.hpp"

namespace geosynth::kern {
namespace {

inline __m128 load4(const float* p) { return _mm_loadu_ps(p); }

void lincomb2_avx2(const float* x, float a, const float* y, float b,
                   float* out, size_t n) {
    const __m256 va = _mm256_set1_ps(a), vb = _mm256_set1_ps(b);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vx = _mm256_loadu_ps(x + i), vy = _mm256_loadu_ps(y + i);
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_mul_ps(va, vx),
                                                _mm256_mul_ps(vb, vy)));
    }
    for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void lincomb3_avx2(const float* x, float a, const float* y, float b,
                   const float* z, float c, float* out, size_t n) {
    const __m256 va = _mm256_set1_ps(a), vb = _mm256_set1_ps(b),
                 vc = _mm256_set1_ps(c);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vx = _mm256_loadu_ps(x + i), vy = _mm256_loadu_ps(y + i),
                     vz = _mm256_loadu_ps(z + i);
        const __m256 t = _mm256_add_ps(_mm256_mul_ps(va, vx),
                                       _mm256_mul_ps(vb, vy));
        _mm256_storeu_ps(out + i, _mm256_add_ps(t, _mm256_mul_ps(vc, vz)));
    }
    for (; i < n; ++i) out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

void affine_avx2(const float* x, float a, float b, float* out, size_t n) {
    const __m256 va = _mm256_set1_ps(a), vb = _mm256_set1_ps(b);
    size_t i = 0;
    for (; i + 8 <= n; i += 8)
        _mm256_storeu_ps(out + i,
                         _mm256_add_ps(_mm256_mul_ps(va, _mm256_loadu_ps(x + i)), vb));
    for (; i < n; ++i) out[i] = a * x[i] + b;
}

void accum_scaled_avx2(double* acc, const float* x, double w, size_t n) {
    const __m256d vw = _mm256_set1_pd(w);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_cvtps_pd(load4(x + i));
        const __m256d va = _mm256_loadu_pd(acc + i);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(va, _mm256_mul_pd(vw, vx)));
    }
    for (; i < n; ++i) acc[i] += w * static_cast<double>(x[i]);
}

void accum_weighted_avx2(double* acc, const float* x, const double* w,
                         size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_cvtps_pd(load4(x + i));
        const __m256d vw = _mm256_loadu_pd(w + i);
        const __m256d va = _mm256_loadu_pd(acc + i);
        _mm256_storeu_pd(acc + i, _mm256_add_pd(va, _mm256_mul_pd(vw, vx)));
    }
    for (; i < n; ++i) acc[i] += w[i] * static_cast<double>(x[i]);
}

void narrow_avx2(const double* acc, float* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm_storeu_ps(out + i, _mm256_cvtpd_ps(_mm256_loadu_pd(acc + i)));
    for (; i < n; ++i) out[i] = static_cast<float>(acc[i]);
}

// Reductions: lane j of the vector accumulator holds exactly the scalar
// reference's partial p[j]; the tail and the final fold reproduce its order.
inline double fold4(__m256d acc, const float* x, size_t tail_start, size_t n) {
    alignas(32) double p[4];
    _mm256_storeu_pd(p, acc);
    for (size_t i = tail_start; i < n; ++i)
        p[i & 3] += static_cast<double>(x[i]);
    return (p[0] + p[1]) + (p[2] + p[3]);
}

double sum_avx2(const float* x, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_cvtps_pd(load4(x + i)));
    return fold4(acc, x, i, n);
}

double dot_avx2(const float* x, const float* y, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d vx = _mm256_cvtps_pd(load4(x + i));
        const __m256d vy = _mm256_cvtps_pd(load4(y + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(vx, vy));
    }
    alignas(32) double p[4];
    _mm256_storeu_pd(p, acc);
    for (; i < n; ++i)
        p[i & 3] += static_cast<double>(x[i]) * static_cast<double>(y[i]);
    return (p[0] + p[1]) + (p[2] + p[3]);
}

double sumsq_diff_avx2(const float* x, const float* y, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_cvtps_pd(load4(x + i)),
                                        _mm256_cvtps_pd(load4(y + i)));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    alignas(32) double p[4];
    _mm256_storeu_pd(p, acc);
    for (; i < n; ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        p[i & 3] += d * d;
    }
    return (p[0] + p[1]) + (p[2] + p[3]);
}

void posterior_eps_avx2(const float* z, const float* mu, const float* var,
                        float abar, float sa, float s1, float* out, size_t n) {
    const float om = 1.0f - abar;
    const __m256 vab = _mm256_set1_ps(abar), vsa = _mm256_set1_ps(sa),
                 vs1 = _mm256_set1_ps(s1), vom = _mm256_set1_ps(om);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 vz = _mm256_loadu_ps(z + i);
        const __m256 vm = _mm256_loadu_ps(mu + i);
        const __m256 vv = _mm256_loadu_ps(var + i);
        const __m256 t = _mm256_sub_ps(vz, _mm256_mul_ps(vsa, vm));
        const __m256 g = _mm256_div_ps(
            _mm256_mul_ps(vsa, vv),
            _mm256_add_ps(_mm256_mul_ps(vab, vv), vom));
        const __m256 x0 = _mm256_add_ps(vm, _mm256_mul_ps(g, t));
        _mm256_storeu_ps(out + i,
                         _mm256_div_ps(_mm256_sub_ps(vz, _mm256_mul_ps(vsa, x0)), vs1));
    }
    for (; i < n; ++i) {
        const float t = z[i] - sa * mu[i];
        const float g = (sa * var[i]) / (abar * var[i] + om);
        const float x0 = mu[i] + g * t;
        out[i] = (z[i] - sa * x0) / s1;
    }
}

void quantize_u8_avx2(const float* x, uint8_t* out, size_t n) {
    const __m256 k255 = _mm256_set1_ps(255.0f), half = _mm256_set1_ps(0.5f),
                 zero = _mm256_setzero_ps();
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        __m256 v = _mm256_add_ps(_mm256_mul_ps(_mm256_loadu_ps(x + i), k255), half);
        v = _mm256_floor_ps(v);
        v = _mm256_max_ps(v, zero);   // maxps returns the 2nd operand on NaN
        v = _mm256_min_ps(v, k255);
        const __m256i i32 = _mm256_cvttps_epi32(v);
        const __m128i lo = _mm256_castsi256_si128(i32);
        const __m128i hi = _mm256_extracti128_si256(i32, 1);
        const __m128i u16 = _mm_packus_epi32(lo, hi);
        const __m128i u8 = _mm_packus_epi16(u16, u16);
        _mm_storel_epi64(reinterpret_cast<__m128i*>(out + i), u8);
    }
    for (; i < n; ++i) {
        float v = std::floor(x[i] * 255.0f + 0.5f);
        v = (v > 0.0f) ? v : 0.0f;
        v = (v < 255.0f) ? v : 255.0f;
        out[i] = static_cast<uint8_t>(v);
    }
}

void dequantize_u8_avx2(const uint8_t* x, float* out, size_t n) {
    const __m256 kInv = _mm256_set1_ps(1.0f / 255.0f);
    size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m128i bytes = _mm_loadl_epi64(reinterpret_cast<const __m128i*>(x + i));
        const __m256i i32 = _mm256_cvtepu8_epi32(bytes);
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_cvtepi32_ps(i32), kInv));
    }
    for (; i < n; ++i) out[i] = static_cast<float>(x[i]) * (1.0f / 255.0f);
}

}  // namespace

const Ops& avx2_ops() {
    static const Ops table = {
        "avx2",
        lincomb2_avx2,
        lincomb3_avx2,
        affine_avx2,
        accum_scaled_avx2,
        accum_weighted_avx2,
        narrow_avx2,
        sum_avx2,
        dot_avx2,
        sumsq_diff_avx2,
        posterior_eps_avx2,
        quantize_u8_avx2,
        dequantize_u8_avx2,
    };
    return table;
}

}  // namespace geosynth::kern

#endif  // x86_64
