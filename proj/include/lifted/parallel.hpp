#pragma once

#include <algorithm>
#include <thread>
#include <vector>

namespace lifted {

// Worker cap shared by all parallel loops. 0 = pick from LIFTED_THREADS or
// hardware concurrency.
int max_threads();
void set_max_threads(int n);

/// Calls fn(i) for i in [begin, end), partitioned into contiguous chunks.
/// Callers must write only to slot i; results are then independent of the
/// thread count.
template <typename Fn>
void parallel_for(int begin, int end, Fn&& fn) {
  const int count = end - begin;
  if (count <= 0) return;
  const int workers = std::min(max_threads(), count);
  if (workers <= 1) {
    for (int i = begin; i < end; ++i) fn(i);
    return;
  }
  const int chunk = (count + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + w * chunk;
    const int hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (std::thread& t : pool) t.join();
}

}  // namespace lifted
