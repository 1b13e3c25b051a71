#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace replay_td {

/// Runs fn(i) for i in [0, n) on up to `jobs` worker threads. Tasks must
/// write only to their own index slot; callers aggregate in index order
/// afterwards, so results never depend on the schedule. The first exception
/// thrown by a task is rethrown after all workers join.
template <class Fn>
void parallel_for(std::int64_t n, int jobs, Fn&& fn) {
  if (n <= 0) return;
  if (jobs < 1) jobs = 1;
  if (jobs == 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed.load(std::memory_order_relaxed)) {
      const std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) break;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true, std::memory_order_relaxed);
      }
    }
  };
  std::vector<std::thread> threads;
  const int nthreads = static_cast<int>(std::min<std::int64_t>(jobs, n));
  threads.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Job-count resolution: REPLAY_TD_JOBS overrides the requested value;
/// 0 or negative falls back to hardware concurrency.
int resolve_jobs(int requested);

}  // namespace replay_td
