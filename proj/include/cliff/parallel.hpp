#pragma once

#include <cstddef>
#include <functional>

namespace cliff {

/// Number of workers used when a caller passes threads = 0.
unsigned default_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is processed
/// exactly once; callers write results by index so output never depends on scheduling.
/// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace cliff
