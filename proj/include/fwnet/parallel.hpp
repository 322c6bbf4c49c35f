#pragma once

#include <cstdint>
#include <functional>

namespace fwnet {

/// Worker count: FWNET_THREADS env override, else hardware concurrency.
int thread_count();

/// Splits [0,n) into contiguous ranges, one per worker, and runs
/// fn(begin,end) on each. Each index is processed by exactly one worker, so
/// results are bitwise independent of the thread count as long as fn writes
/// only to locations derived from its own indices. Runs inline when n is
/// small or a parallel region is already active.
void parallel_for(int64_t n, int64_t grain, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace fwnet
