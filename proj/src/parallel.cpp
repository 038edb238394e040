#include "ridgeci/parallel.hpp"

#include <algorithm>
#include <thread>

namespace ridgeci {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int threads) { g_max_threads = std::max(0, threads); }

int max_threads() {
  if (g_max_threads > 0) return g_max_threads;
#ifdef RIDGECI_HAVE_OPENMP
  return omp_get_max_threads();
#else
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
#endif
}

}  // namespace ridgeci
