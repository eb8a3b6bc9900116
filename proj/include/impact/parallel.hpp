#pragma once

#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace impact {

// Resolve a thread-count request: n >= 1 is taken literally, n <= 0 means
// use the hardware concurrency. The IMPACT_HEDGE_THREADS environment
// variable, when set, wins over the argument.
inline int resolve_threads(int requested) {
  if (const char* env = std::getenv("IMPACT_HEDGE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
    if (n == 0) requested = 0;
  }
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Run body(begin, end) over [0, n) split into contiguous chunks. Workers
// write to disjoint slots only; callers do any floating-point reduction
// serially in index order so results do not depend on the thread count.
template <class Body>
void parallel_chunks(std::ptrdiff_t n, int threads, Body&& body) {
  threads = std::max(1, threads);
  if (threads == 1 || n <= 1) {
    if (n > 0) body(std::ptrdiff_t{0}, n);
    return;
  }
  const int workers = static_cast<int>(std::min<std::ptrdiff_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::ptrdiff_t chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const std::ptrdiff_t begin = w * chunk;
    const std::ptrdiff_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, begin, end] { body(begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace impact
