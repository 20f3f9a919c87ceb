#pragma once

#include <cstddef>

namespace cas::parallel {

/// Process-wide worker count for the data-parallel kernels (stats collection,
/// per-session experiment scans, simulation cells, trial sweeps). 1 selects
/// the plain serial loop, which is the reference path the tests compare
/// against. 0 means "use the OpenMP default".
void set_threads(int n);
int threads();

/// True when the build has OpenMP and more than one worker is configured.
bool enabled();

namespace detail {
void run_static(std::size_t n, void (*trampoline)(std::size_t, void*), void* ctx);
}

/// Static partition of [0, n). Bodies must write only to index-owned slots;
/// results are then independent of the schedule and equal to the serial run.
template <typename F>
void parallel_for(std::size_t n, F&& fn) {
  if (!enabled() || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  auto trampoline = [](std::size_t i, void* ctx) { (*static_cast<F*>(ctx))(i); };
  detail::run_static(n, trampoline, &fn);
}

}  // namespace cas::parallel
