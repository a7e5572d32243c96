#pragma once

#include <cstddef>
#include <functional>

namespace magceptor {

// Worker count from MAGCEPTOR_THREADS, else the hardware concurrency.
unsigned default_threads();

// Calls fn(i) for i in [0, n) on up to `threads` workers (0 = default).
// Results must be written to per-index slots; the first exception thrown by
// any call is rethrown after all workers finish.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace magceptor
