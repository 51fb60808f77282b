#pragma once

#include <cstddef>
#include <functional>

namespace recten {

/// Worker cap: RECTEN_THREADS if set to a positive integer, otherwise the
/// hardware concurrency (at least 1).
std::size_t worker_count();

/// Run body(0..n-1) on up to worker_count() threads. Each index runs exactly
/// once; callers write results into per-index slots so output order never
/// depends on scheduling. If bodies throw, the exception from the smallest
/// failing index is rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace recten
