#pragma once

#if defined(_OPENMP)
#include <omp.h>
#else
static inline int omp_get_max_threads() { return 1; }
static inline int omp_get_thread_num() { return 0; }
#endif

// Every parallel loop in the kernels partitions output elements statically and
// never accumulates across threads, so results are bit-identical to the serial
// references at any thread count.
