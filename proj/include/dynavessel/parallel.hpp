#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

namespace dv {

/// Caps internal parallelism. n <= 0 restores the default (all cores).
void set_thread_count(int n);
int thread_count();

/// Runs fn(begin..end) over [0, n) in contiguous chunks. Each index is
/// visited once; callers must only write outputs owned by that index.
void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& fn);

/// Ordered reduction: per-index partial values combined in index order, so
/// the result does not depend on the thread count.
template <typename T, typename Fn>
T ordered_sum(std::ptrdiff_t n, Fn&& partial) {
  std::vector<T> parts(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::ptrdiff_t i) { parts[static_cast<std::size_t>(i)] = partial(i); });
  T total{};
  for (const T& p : parts) total += p;
  return total;
}

}  // namespace dv
