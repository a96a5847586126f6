#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace spintest {

/// Run fn(i) for i in [0, n) across up to n_threads workers (striped
/// assignment). Each work item must write only to its own output slot, so
/// results are identical to the sequential order. n_threads <= 1 runs
/// inline. The first exception thrown by any item is rethrown.
template <typename Fn>
inline void parallel_for(std::size_t n, int n_threads, Fn&& fn) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(n_threads), n);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace spintest
