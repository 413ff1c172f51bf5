#pragma once

#include <cstddef>
#include <functional>

namespace topostir {

/// Number of worker threads used by parallel_for (0 selects hardware concurrency).
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks so the
/// result never depends on the schedule; the first exception thrown by any
/// worker is rethrown on the calling thread.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace topostir
