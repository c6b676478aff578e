#pragma once

#include <cstddef>
#include <functional>

namespace multida {

// 0 means "use every hardware thread".
unsigned resolve_threads(unsigned requested);

// Splits [0, count) into contiguous chunks and runs body(begin, end) on up to
// `threads` workers. Chunk boundaries depend only on count and thread count,
// and each index is visited exactly once, so bodies that write disjoint
// slices give schedule-independent results. The first exception thrown by
// any worker is rethrown on the caller.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace multida
