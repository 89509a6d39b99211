#pragma once

#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace overlapq {

// Worker pool size: hardware concurrency, capped by OVERLAPQ_THREADS.
inline unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("OVERLAPQ_THREADS")) {
    char* end = nullptr;
    const long parsed = std::strtol(env, &end, 10);
    if (end != env && parsed >= 1 && parsed < 1024) n = static_cast<unsigned>(parsed);
  }
  return n;
}

// Maps [begin, end) chunks of size chunk on a worker pool, then folds the
// per-chunk partials in chunk order. Results are independent of the worker
// count because each chunk is self-contained and the fold is sequential.
template <typename Partial, typename MapFn, typename FoldFn>
Partial parallel_chunked(std::size_t n, std::size_t chunk, MapFn&& map, Partial init,
                         FoldFn&& fold) {
  if (n == 0) return init;
  if (chunk == 0) chunk = 1;
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(worker_count(), nchunks));

  std::vector<Partial> partials(nchunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      partials[c] = map(c * chunk, std::min(n, (c + 1) * chunk));
  } else {
    std::atomic<std::size_t> next{0};
    auto run = [&] {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= nchunks) return;
        partials[c] = map(c * chunk, std::min(n, (c + 1) * chunk));
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
  }

  Partial acc = std::move(init);
  for (std::size_t c = 0; c < nchunks; ++c) acc = fold(std::move(acc), std::move(partials[c]));
  return acc;
}

}  // namespace overlapq
