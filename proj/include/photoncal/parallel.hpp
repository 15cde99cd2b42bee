#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace photoncal {

/// Number of workers to use when the caller asks for "all cores".
inline unsigned default_workers() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, rows) into `workers` contiguous ranges and calls fn(begin, end)
/// for each one on its own thread. Ranges are disjoint, so callers writing
/// only to their own rows need no synchronization. The first exception thrown
/// by any worker is rethrown on the calling thread.
template <class Fn>
void parallel_rows(std::size_t rows, unsigned workers, Fn&& fn) {
  workers = std::max(1u, workers);
  if (workers == 1 || rows < 2) {
    fn(std::size_t{0}, rows);
    return;
  }
  const std::size_t n = std::min<std::size_t>(workers, rows);
  std::vector<std::exception_ptr> errors(n);
  {
    std::vector<std::jthread> pool;
    pool.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
      const std::size_t begin = rows * w / n;
      const std::size_t end = rows * (w + 1) / n;
      pool.emplace_back([&fn, &errors, w, begin, end] {
        try {
          fn(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace photoncal
