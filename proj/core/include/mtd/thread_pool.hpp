#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace mtd {

inline std::size_t worker_count(std::size_t jobs, int workers) {
  return std::min<std::size_t>(std::max(jobs, std::size_t{1}),
                               static_cast<std::size_t>(std::max(workers, 1)));
}

/// Runs fn(worker, job) for job in [0, count) across worker_count threads.
/// Job indices are handed out from an atomic counter; `worker` identifies
/// the executing thread slot so callers can give each worker its own
/// mutable state (e.g. a model clone). Results become deterministic by
/// writing into job-indexed slots.
inline void parallel_for(std::size_t count, int workers,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t n_threads = worker_count(count, workers);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(0, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) {
    threads.emplace_back([&, t] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(t, i);
      }
    });
  }
  for (std::thread& t : threads) t.join();
}

}  // namespace mtd
