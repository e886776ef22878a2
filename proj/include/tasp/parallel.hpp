#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace tasp {

/// Worker count: TASP_THREADS when set to a positive integer, otherwise the
/// hardware concurrency. Results never depend on this value.
inline int worker_count() {
  if (const char* env = std::getenv("TASP_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (const std::exception&) {
    }
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count). Work items are handed out in contiguous
/// chunks; fn must only write to state owned by item i.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn, int workers = worker_count()) {
  if (count == 0) return;
  const std::size_t n_workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
  if (n_workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) {
    const std::size_t begin = count * w / n_workers;
    const std::size_t end = count * (w + 1) / n_workers;
    threads.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace tasp
