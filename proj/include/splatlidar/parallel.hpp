// Copyright Contributors to the splatlidar Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace splatlidar {

/// Number of workers used when a caller passes 0.
inline unsigned hardware_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1u : n;
}

/// Runs `fn(begin, end)` over contiguous chunks of [0, count) on up to
/// `workers` threads (0 = hardware concurrency). Callers write disjoint output
/// slots per index, so the result never depends on the chunking.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  if (count == 0) return;
  if (workers == 0) workers = hardware_workers();
  const std::size_t n_threads = std::min<std::size_t>(workers, count);
  if (n_threads <= 1) {
    fn(std::size_t{0}, count);
    return;
  }
  // Over-partition a little so uneven work items balance.
  const std::size_t n_chunks = std::min<std::size_t>(count, n_threads * 4);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  std::mutex mutex;
  std::size_t next = 0;
  std::exception_ptr error;
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t chunk;
        {
          std::lock_guard<std::mutex> lock(mutex);
          if (next >= n_chunks || error) return;
          chunk = next++;
        }
        const std::size_t begin = count * chunk / n_chunks;
        const std::size_t end = count * (chunk + 1) / n_chunks;
        try {
          fn(begin, end);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace splatlidar
