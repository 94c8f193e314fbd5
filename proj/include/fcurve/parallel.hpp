#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fcurve {

// Work is cut into chunks whose boundaries depend only on the problem size,
// never on the worker count. Callers reduce per-chunk results in chunk
// order, which keeps floating-point sums identical for any `workers`.
inline constexpr std::size_t kReductionChunk = 256;

inline std::size_t num_chunks(std::size_t n, std::size_t chunk = kReductionChunk) {
  return (n + chunk - 1) / chunk;
}

// Calls fn(chunk_index) for every chunk in [0, chunks). The first exception
// thrown by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_chunks(std::size_t chunks, int workers, Fn&& fn) {
  const auto threads = static_cast<std::size_t>(std::max(1, workers));
  if (threads == 1 || chunks <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) fn(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto run = [&] {
    for (std::size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
      try {
        fn(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    pool.reserve(std::min(threads, chunks) - 1);
    for (std::size_t t = 1; t < std::min(threads, chunks); ++t) pool.emplace_back(run);
    run();
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace fcurve
