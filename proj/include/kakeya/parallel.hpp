#pragma once

#include <cstddef>
#include <functional>

namespace kakeya {

// Global worker cap. 0 means hardware concurrency; the KKY_THREADS
// environment variable is consulted when no explicit cap has been set.
void set_thread_cap(int n);
int thread_count();

// Runs fn(i) for i in [0, n). Work items are handed out dynamically, so fn
// must not care about assignment order. Results must be written to distinct
// slots; reductions with order-dependent rounding belong inside one item.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace kakeya
