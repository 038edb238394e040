#pragma once

#include <cstddef>
#include <exception>

#ifdef RIDGECI_HAVE_OPENMP
#include <omp.h>
#endif

namespace ridgeci {

/// Caps the number of worker threads used by grid and bootstrap loops
/// (0 keeps the runtime default).
void set_max_threads(int threads);
int max_threads();

/// Runs fn(i) for i in [0, count). Each index writes only its own outputs, so
/// results do not depend on the thread count. The first exception thrown by
/// any iteration is rethrown after the loop.
template <typename Fn>
void parallel_for(std::ptrdiff_t count, Fn&& fn) {
  std::exception_ptr error;
#ifdef RIDGECI_HAVE_OPENMP
#pragma omp parallel for schedule(dynamic, 8) num_threads(max_threads())
#endif
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(i);
    } catch (...) {
#ifdef RIDGECI_HAVE_OPENMP
#pragma omp critical(ridgeci_parallel_error)
#endif
      {
        if (!error) error = std::current_exception();
      }
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace ridgeci
