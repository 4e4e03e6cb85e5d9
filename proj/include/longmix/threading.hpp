#pragma once

#include <cstddef>
#include <functional>

namespace longmix {

// Worker count: LONGMIX_THREADS if set, else hardware concurrency.
int max_threads();
void set_max_threads(int n);

// Runs fn(begin, end) over a contiguous partition of [0, n).  Work items
// must be independent (results land in disjoint slots); the partition is the
// same for every thread count, and per-item random streams make the output
// identical whether this runs inline or on several threads.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace longmix
