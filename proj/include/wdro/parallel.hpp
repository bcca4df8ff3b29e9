#pragma once

#include <cstddef>
#include <functional>

namespace wdro {

// Number of worker threads: min(hardware_concurrency, WDRO_THREADS if set).
// WDRO_THREADS=1 forces serial execution.
unsigned thread_budget();

// Runs fn(i) for i in [0, count). Work is split into contiguous index blocks;
// each fn(i) must write only to its own slot so results are independent of
// the thread count. Reductions belong to the caller, in index order.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn);

}  // namespace wdro
