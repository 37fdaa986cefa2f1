// Copyright (C) 2026 The geosynth authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>

namespace geosynth {

/// Global worker-count cap (default 1). Thread-safe to read; set once at
/// startup from the CLI.
void set_max_threads(int n);
int max_threads();

/// Run fn(i) for i in [0, n). Work is split into fixed contiguous blocks
/// assigned to workers by index, so the partition — and therefore any
/// per-item output — is identical for every thread count. fn must write only
/// item-local state; exceptions are rethrown on the caller thread.
void parallel_for(size_t n, const std::function<void(size_t)>& fn);

}  // namespace geosynth
