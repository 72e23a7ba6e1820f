#include "dynavessel/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dv {

namespace {
int g_threads = 0;
}

void set_thread_count(int n) { g_threads = n > 0 ? n : 0; }

int thread_count() {
#ifdef _OPENMP
  return g_threads > 0 ? g_threads : omp_get_num_procs();
#else
  return 1;
#endif
}

void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& fn) {
#ifdef _OPENMP
  const int threads = thread_count();
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
}

}  // namespace dv
