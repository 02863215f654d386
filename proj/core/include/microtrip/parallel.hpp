#pragma once

#include <cstddef>
#include <functional>

namespace microtrip {

/// Worker count: MICROTRIP_THREADS if set (>= 1), else hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n). Work is split into contiguous blocks; each
/// index is handled exactly once, so callers that write only to slot i get
/// results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace microtrip
