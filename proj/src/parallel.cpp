#include "cas/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cas::parallel {

namespace {
int g_threads = 0;  // 0 = library default
}

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }

int threads() {
#ifdef _OPENMP
  return g_threads == 0 ? omp_get_max_threads() : g_threads;
#else
  return 1;
#endif
}

bool enabled() {
#ifdef _OPENMP
  return threads() > 1;
#else
  return false;
#endif
}

namespace detail {

void run_static(std::size_t n, void (*trampoline)(std::size_t, void*), void* ctx) {
#ifdef _OPENMP
  const int nt = threads();
#pragma omp parallel for schedule(static) num_threads(nt)
  for (long long i = 0; i < static_cast<long long>(n); ++i)
    trampoline(static_cast<std::size_t>(i), ctx);
#else
  for (std::size_t i = 0; i < n; ++i) trampoline(i, ctx);
#endif
}

}  // namespace detail

}  // namespace cas::parallel
