#pragma once

#include <cstddef>
#include <functional>

namespace cdr {

// Worker count: CDR_WORKERS if set, else `requested`, else hardware threads.
int resolve_workers(int requested);

// Runs fn(i) for i in [0, count) on up to `workers` threads. Each index is
// processed exactly once; the first exception thrown is rethrown here.
void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

}  // namespace cdr
