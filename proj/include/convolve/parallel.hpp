#pragma once

#include <cstddef>
#include <functional>

namespace convolve {

// 0 means one worker per hardware thread.
unsigned resolve_workers(unsigned requested);

/// Calls fn(index, worker) for every index in [0, count) on a bounded pool.
/// Callers store results by index, so output order never depends on timing.
/// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t index, unsigned worker)>& fn);

}  // namespace convolve
