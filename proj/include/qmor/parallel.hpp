#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace qmor::detail {

/// Runs fn(i) for i in [begin, end) across a small thread pool.  Each index is
/// processed by exactly one thread and writes only its own output slot, so the
/// result is bit-identical to the serial loop regardless of thread count.
template <typename Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Fn&& fn,
                  unsigned max_threads = 0) {
  const std::ptrdiff_t count = end - begin;
  if (count <= 0) return;
  unsigned hw = max_threads ? max_threads : std::thread::hardware_concurrency();
  hw = std::max(1u, std::min<unsigned>(hw, static_cast<unsigned>(count)));
  if (hw == 1) {
    for (std::ptrdiff_t i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(hw);
  const std::ptrdiff_t chunk = (count + hw - 1) / hw;
  for (unsigned t = 0; t < hw; ++t) {
    const std::ptrdiff_t lo = begin + static_cast<std::ptrdiff_t>(t) * chunk;
    const std::ptrdiff_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::ptrdiff_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace qmor::detail
