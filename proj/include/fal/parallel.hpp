#pragma once

#include <cstddef>
#include <functional>

namespace fal {

/// Worker cap: FAL_THREADS when set to a positive integer, otherwise the
/// number of hardware threads (at least 1).
std::size_t worker_count();

/// Runs fn(0) .. fn(n-1) on up to worker_count() threads. Each index runs
/// exactly once; the first exception thrown by any task is rethrown after all
/// workers have joined. Callers write results into per-index slots, so output
/// never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fal
