#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace tracelr {

// requested == 0 picks the hardware thread count.
int effective_threads(int requested);

// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries do
// not depend on the thread count, so work that writes into per-index slots
// is bit-identical to a sequential run. The first exception thrown by any
// chunk is rethrown.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t chunk = 1024);

// Runs fn(task) for task in [0, n_tasks), each task executed once, in
// parallel across threads. Used for stripe-structured reductions where each
// task owns its accumulator and processes its inputs in a fixed order.
void parallel_tasks(std::size_t n_tasks, int threads,
                    const std::function<void(std::size_t)>& fn);

} // namespace tracelr
