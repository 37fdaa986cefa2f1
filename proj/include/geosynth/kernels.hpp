// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace geosynth::kern {

// Hot inner loops of the samplers and blenders, provided as a scalar
// reference implementation plus SIMD variants selected at runtime.
//
// Contract: every variant must produce bit-identical results to the scalar
// reference. For the elementwise kernels this holds because the project is
// compiled with -ffp-contract=off and the vector code uses the same
// mul/add/div sequence per element. The reductions are defined with a fixed
// 4-lane blocked accumulation in double (lane j sums elements with
// index % 4 == j, folded as (l0+l1)+(l2+l3)), which the scalar reference
// reproduces exactly.

enum class Isa { scalar, avx2, neon };

struct Ops {
    const char* name;

    // out[i] = a*x[i] + b*y[i]
    void (*lincomb2)(const float* x, float a, const float* y, float b,
                     float* out, size_t n);
    // out[i] = a*x[i] + b*y[i] + c*z[i]
    void (*lincomb3)(const float* x, float a, const float* y, float b,
                     const float* z, float c, float* out, size_t n);
    // out[i] = a*x[i] + b
    void (*affine)(const float* x, float a, float b, float* out, size_t n);
    // acc[i] += w * x[i]           (double accumulator)
    void (*accum_scaled)(double* acc, const float* x, double w, size_t n);
    // acc[i] += w[i] * x[i]        (double accumulator, per-element weight)
    void (*accum_weighted)(double* acc, const float* x, const double* w,
                           size_t n);
    // out[i] = (float)acc[i]
    void (*narrow)(const double* acc, float* out, size_t n);
    // Blocked-double reductions (see header comment for the exact order).
    double (*sum)(const float* x, size_t n);
    double (*dot)(const float* x, const float* y, size_t n);
    double (*sumsq_diff)(const float* x, const float* y, size_t n);
    // Exact posterior noise estimate for a per-pixel Gaussian prior:
    //   g      = sa*var[i] / (abar*var[i] + (1-abar))
    //   x0     = mu[i] + g*(z[i] - sa*mu[i])
    //   out[i] = (z[i] - sa*x0) / s1
    // with sa = sqrt(abar), s1 = sqrt(1-abar) precomputed by the caller.
    void (*posterior_eps)(const float* z, const float* mu, const float* var,
                          float abar, float sa, float s1, float* out, size_t n);
    // u8 = clamp(floor(x*255 + 0.5), 0, 255)
    void (*quantize_u8)(const float* x, uint8_t* out, size_t n);
    // f = u8 * (1/255)
    void (*dequantize_u8)(const uint8_t* x, float* out, size_t n);
};

/// Active kernel table (selected once at startup, highest supported ISA).
const Ops& ops();

/// The scalar reference table, always available.
const Ops& scalar_ops();

/// Force a specific variant; returns false (leaving selection unchanged)
/// if the host does not support it. Used by the equivalence tests.
bool select(Isa isa);

Isa active_isa();
std::vector<Isa> available_isas();
std::string isa_name(Isa isa);

}  // namespace geosynth::kern
