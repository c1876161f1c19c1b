#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace pik {

/// Default worker count: PIK_WORKERS env var, else hardware concurrency.
inline int default_workers() {
  if (const char* env = std::getenv("PIK_WORKERS")) {
    int w = std::atoi(env);
    if (w > 0) return w;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? (int)hw : 1;
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads.  Results must be
/// written to per-index slots by the caller; reduction order is then
/// deterministic regardless of scheduling.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                         int workers = 0) {
  if (workers <= 0) workers = default_workers();
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t nthreads = std::min<std::size_t>(workers, n);
  for (std::size_t t = 0; t < nthreads; ++t) {
    pool.emplace_back([&, t]() {
      for (std::size_t i = t; i < n; i += nthreads) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

/// Kahan-compensated accumulator; order-independent results require the
/// caller to feed values in a fixed order.
struct KahanSum {
  double sum = 0.0, c = 0.0;
  void add(double x) {
    double y = x - c;
    double t = sum + y;
    c = (t - sum) - y;
    sum = t;
  }
};

}  // namespace pik
