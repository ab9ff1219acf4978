#pragma once

// Chunked parallel map with deterministic assembly. Records are split into
// fixed-size chunks; workers pull chunk ids from a shared counter and write
// results into disjoint, pre-sized slots (or per-chunk partials merged in
// chunk order). The worker count therefore affects scheduling only, never
// output bytes.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <mutex>
#include <thread>
#include <vector>

namespace kdaudit {

constexpr std::size_t kParallelChunk = 4096;

// Invoke fn(begin, end) over consecutive chunks of [0, n).
template <class Fn>
void parallel_chunks(std::size_t n, int workers, Fn&& fn) {
  if (n == 0) return;
  const std::size_t n_chunks = (n + kParallelChunk - 1) / kParallelChunk;
  if (workers <= 1 || n_chunks == 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      fn(c * kParallelChunk, std::min(n, (c + 1) * kParallelChunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), n_chunks);
  pool.reserve(n_threads);
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= n_chunks || failed.load()) return;
        try {
          fn(c * kParallelChunk, std::min(n, (c + 1) * kParallelChunk));
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Map fn(index) -> T into a vector, one slot per record.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t n, int workers, Fn&& fn) {
  std::vector<T> out(n);
  parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = fn(i);
  });
  return out;
}

}  // namespace kdaudit
