// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0

#include "geosynth/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace geosynth::kern {

#if defined(__x86_64__) || defined(_M_X64)
const Ops& avx2_ops();  // kernels_avx2.cpp
#endif
#if defined(__aarch64__)
const Ops& neon_ops();  // kernels_neon.cpp
#endif

namespace {

bool isa_supported(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") != 0;
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const Ops& table_for(Isa isa) {
    switch (isa) {
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::avx2:
            return avx2_ops();
#endif
#if defined(__aarch64__)
        case Isa::neon:
            return neon_ops();
#endif
        default:
            return scalar_ops();
    }
}

Isa default_isa() {
    // GEOSYNTH_ISA=scalar|avx2|neon overrides auto-detection (useful for
    // cross-checking results between variants).
    if (const char* env = std::getenv("GEOSYNTH_ISA")) {
        if (std::strcmp(env, "scalar") == 0) return Isa::scalar;
        if (std::strcmp(env, "avx2") == 0 && isa_supported(Isa::avx2))
            return Isa::avx2;
        if (std::strcmp(env, "neon") == 0 && isa_supported(Isa::neon))
            return Isa::neon;
        return Isa::scalar;
    }
    if (isa_supported(Isa::avx2)) return Isa::avx2;
    if (isa_supported(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

std::atomic<const Ops*> g_active{nullptr};
std::atomic<Isa> g_isa{Isa::scalar};

const Ops* init_active() {
    const Isa isa = default_isa();
    g_isa.store(isa, std::memory_order_relaxed);
    const Ops* t = &table_for(isa);
    g_active.store(t, std::memory_order_release);
    return t;
}

}  // namespace

const Ops& ops() {
    const Ops* t = g_active.load(std::memory_order_acquire);
    if (!t) t = init_active();
    return *t;
}

bool select(Isa isa) {
    if (!isa_supported(isa)) return false;
    g_isa.store(isa, std::memory_order_relaxed);
    g_active.store(&table_for(isa), std::memory_order_release);
    return true;
}

Isa active_isa() {
    ops();  // ensure initialized
    return g_isa.load(std::memory_order_relaxed);
}

std::vector<Isa> available_isas() {
    std::vector<Isa> out{Isa::scalar};
    if (isa_supported(Isa::avx2)) out.push_back(Isa::avx2);
    if (isa_supported(Isa::neon)) out.push_back(Isa::neon);
    return out;
}

std::string isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "?";
}

}  // namespace geosynth::kern
