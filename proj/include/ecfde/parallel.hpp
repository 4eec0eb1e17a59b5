#pragma once

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ecfde {

//! Worker count used by parallel loops. Honors ECFDE_THREADS when set,
//! otherwise the OpenMP default (available hardware parallelism).
inline int default_thread_count()
{
  if (const char* env = std::getenv("ECFDE_THREADS")) {
    try {
      int k = std::stoi(env);
      if (k > 0)
        return k;
    } catch (...) {
    }
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_thread_count(int k)
{
#ifdef _OPENMP
  if (k > 0)
    omp_set_num_threads(k);
#else
  (void)k;
#endif
}

inline int current_thread_count()
{
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

} // namespace ecfde
