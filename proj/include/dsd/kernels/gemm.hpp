#pragma once

#include <cstdint>

namespace dsd::kernels {

// Single-precision matrix products in the three layouts the network needs.
// All matrices are dense row-major. With accumulate=false the output is
// overwritten, otherwise added to. The OpenMP versions partition output rows
// statically; per-element accumulation order matches the blocked loop, so
// repeated runs are bit-identical at any thread count.

/// C(M,N) = A(M,K) * B(K,N)
void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate = false);

/// C(M,N) = A(M,K) * B(N,K)^T   (rows of B are dotted with rows of A)
void gemm_nt(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate = false);

/// C(M,N) = A(K,M)^T * B(K,N)
void gemm_tn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate = false);

// Naive triple-loop references. Kept for correctness tests and the kernel
// benchmark; never called from the training path.
void gemm_nn_serial(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
                    bool accumulate = false);
void gemm_nt_serial(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
                    bool accumulate = false);
void gemm_tn_serial(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
                    bool accumulate = false);

}  // namespace dsd::kernels
