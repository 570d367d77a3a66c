#ifndef MPRT_PARALLEL_H_
#define MPRT_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace mprt {

// Calls body(i) for i in [0, n) on up to `threads` workers. Callers write
// results into slot i, so output order never depends on scheduling. If
// bodies throw, the exception of the lowest index is rethrown after all
// workers finish.
void ParallelFor(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

}  // namespace mprt

#endif  // MPRT_PARALLEL_H_
