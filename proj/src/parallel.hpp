#ifndef AUCTIONMATCH_PARALLEL_HPP
#define AUCTIONMATCH_PARALLEL_HPP

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace am {

// Runs fn(chunk_index, row_lo, row_hi) over fixed-size row chunks. Chunk
// boundaries depend only on `total` and `chunk`, never on the thread count,
// so any writer that keys its output by chunk_index produces identical
// results for every `threads` value. The first exception thrown by a worker
// is rethrown on the calling thread.
template <class Fn>
void parallel_chunks(std::size_t total, std::size_t chunk, int threads, Fn&& fn) {
  const std::size_t nchunks = total == 0 ? 0 : (total + chunk - 1) / chunk;
  if (nchunks == 0) return;
  if (threads <= 1 || nchunks == 1) {
    for (std::size_t c = 0; c < nchunks; ++c)
      fn(c, c * chunk, std::min(total, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1);
      if (c >= nchunks || failed.load()) return;
      try {
        fn(c, c * chunk, std::min(total, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!error) error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(threads), nchunks);
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace am

#endif
