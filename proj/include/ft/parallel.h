// include/ft/parallel.h

#ifndef FT_PARALLEL_H_
#define FT_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace ft {

// Worker count from FT_THREADS, defaulting to the hardware concurrency.
std::size_t worker_threads();

// Calls fn(i) for i in [0, n) on up to `threads` workers. Each index runs
// exactly once; callers write results into slot i, so output order does not
// depend on scheduling. The exception from the lowest failing index is rethrown.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace ft

#endif  // FT_PARALLEL_H_
