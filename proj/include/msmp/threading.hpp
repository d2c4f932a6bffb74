#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace msmp {

inline int default_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

// Static-partition parallel loop. Worker t handles a contiguous index block,
// so callers that write into per-index slots get deterministic results for
// any thread count.
inline void parallel_for(int64_t n, int n_threads, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  if (n_threads <= 0) n_threads = default_threads();
  if (n_threads > n) n_threads = static_cast<int>(n);
  if (n_threads == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(n_threads));
  std::exception_ptr err;
  std::mutex err_mu;
  for (int t = 0; t < n_threads; ++t) {
    int64_t lo = n * t / n_threads;
    int64_t hi = n * (t + 1) / n_threads;
    workers.emplace_back([&, lo, hi] {
      try {
        for (int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> g(err_mu);
        if (!err) err = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace msmp
