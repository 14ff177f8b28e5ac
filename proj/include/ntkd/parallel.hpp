#pragma once

#include <cstddef>
#include <functional>

namespace ntkd {

/// Runs body(i) for i in [0, count) on up to `threads` workers. Work items are
/// claimed from a shared counter, so the assignment of items to threads varies
/// between runs; callers must make each item depend only on its index. The
/// first exception thrown by any item is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

/// Clamps a requested thread count to [1, hardware threads] (0 means all).
unsigned resolve_threads(unsigned requested);

}  // namespace ntkd
