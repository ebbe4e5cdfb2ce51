#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace sli {

/// 0 means "one per hardware thread".
inline int resolve_workers(int requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(begin, end, chunk) over `chunks` contiguous slices of [0, count).
/// The slicing depends only on `chunks`, never on scheduling, so callers that
/// reduce per-chunk results in chunk order get identical answers for any
/// worker count. The first exception (by chunk index) is rethrown.
inline void parallel_chunks(long count, int workers, int chunks,
                            const std::function<void(long, long, int)>& body) {
  workers = std::max(1, std::min(workers, chunks));
  std::vector<std::exception_ptr> errors(chunks);
  auto run = [&](int c) {
    const long begin = count * c / chunks, end = count * (c + 1) / chunks;
    try {
      body(begin, end, c);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  };
  if (workers == 1) {
    for (int c = 0; c < chunks; ++c) run(c);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int c = w; c < chunks; c += workers) run(c);
      });
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Element-wise parallel loop; body(i) must only write slot i of its output.
inline void parallel_for(long count, int workers, const std::function<void(long)>& body) {
  workers = resolve_workers(workers);
  const int chunks = static_cast<int>(std::max(1L, std::min<long>(count, 4L * workers)));
  parallel_chunks(count, workers, chunks, [&](long b, long e, int) {
    for (long i = b; i < e; ++i) body(i);
  });
}

}  // namespace sli
