#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace dysuse {

inline unsigned default_workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

// Splits [0, n) into contiguous ranges, one per worker. fn(begin, end, worker)
// runs on its own thread; workers == 0 means use all hardware threads.
template <class Fn>
void parallel_ranges(std::size_t n, unsigned workers, Fn&& fn) {
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    fn(std::size_t{0}, n, 0u);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  const std::size_t q = n / workers, r = n % workers;
  std::size_t begin = 0;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t len = q + (w < r ? 1 : 0);
    const std::size_t end = begin + len;
    threads.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
    begin = end;
  }
  for (auto& t : threads) t.join();
}

}  // namespace dysuse
