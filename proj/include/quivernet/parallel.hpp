#pragma once

#include <cstddef>
#include <functional>

namespace quivernet {

// Worker count: hardware concurrency capped by QUIVERNET_THREADS.
unsigned thread_budget();

// Runs body(i) for i in [0, n). Each index is handled exactly once; callers
// write results into per-index slots so the merge order is deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace quivernet
