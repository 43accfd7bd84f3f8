#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace beamsplit {

/// Fixed number of work chunks used by the rasterizer, independent of the
/// machine's thread count. Outputs are bit-identical for any worker count
/// because chunk boundaries never move and reductions run in chunk order.
inline constexpr int kRenderChunks = 8;

/// Runs fn(chunk) for chunk in [0, n_chunks) on up to n_chunks workers.
/// fn must write only to chunk-exclusive state.
inline void parallel_chunks(int n_chunks, const std::function<void(int)>& fn) {
  int workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers < 1) workers = 1;
  if (workers > n_chunks) workers = n_chunks;
  if (workers == 1) {
    for (int c = 0; c < n_chunks; ++c) fn(c);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
        fn(c);
      }
    });
  }
  for (auto& t : pool) t.join();
}

/// Half-open row range of chunk `chunk` when `rows` rows are split into
/// `n_chunks` near-equal pieces.
inline std::pair<int, int> chunk_rows(int rows, int chunk, int n_chunks) {
  const std::int64_t lo = static_cast<std::int64_t>(rows) * chunk / n_chunks;
  const std::int64_t hi = static_cast<std::int64_t>(rows) * (chunk + 1) / n_chunks;
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

}  // namespace beamsplit
