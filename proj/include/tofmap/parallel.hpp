#pragma once

#include <cstddef>
#include <functional>

namespace tofmap {

/// Worker count: TOFMAP_THREADS when set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
unsigned worker_count();

/// Runs fn(i) for i in [0, n) on up to `workers` threads (0: worker_count()).
/// Indices are handed out dynamically; callers write results by index so the
/// output order never depends on scheduling. The first exception thrown by any
/// task is rethrown after all workers have joined.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned workers = 0);

}  // namespace tofmap
