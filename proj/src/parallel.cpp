#include "f2f/parallel.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace f2f::par {

static int read_thread_cap() {
#ifdef _OPENMP
  int hw = omp_get_max_threads();
#else
  int hw = 1;
#endif
  const char* env = std::getenv("F2F_THREADS");
  if (env == nullptr) return hw;
  try {
    int n = std::stoi(env);
    if (n >= 1) return n < hw ? n : hw;
  } catch (...) {
  }
  return hw;
}

int threads() {
  static const int cap = read_thread_cap();
  return cap;
}

}  // namespace f2f::par
