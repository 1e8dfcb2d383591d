#pragma once

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace empc {

namespace detail {
inline std::atomic<int>& thread_count_slot() {
  static std::atomic<int> n{0};
  return n;
}
}  // namespace detail

// Default thread count: EMPC_THREADS environment variable, else 1.
inline int resolve_default_threads() {
  if (const char* env = std::getenv("EMPC_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

inline int thread_count() {
  int n = detail::thread_count_slot().load(std::memory_order_relaxed);
  return n > 0 ? n : resolve_default_threads();
}

inline void set_thread_count(int n) {
  detail::thread_count_slot().store(n, std::memory_order_relaxed);
}

// Deterministic chunked parallel loop; results must not depend on the chunking.
template <typename F>
void parallel_for(int n, F&& body) {
  const int workers = thread_count();
  if (workers <= 1 || n < 2 * workers) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const int chunk = (n + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    const int lo = w * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &body] {
      for (int i = lo; i < hi; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace empc
