#include "dsd/kernels/gemm.hpp"

#include <algorithm>

#include "dsd/core/parallel.hpp"

namespace dsd::kernels {

namespace {

// Row-panel height for the blocked kernels. Four output rows share one pass
// over B, which keeps the inner loop at four FMA streams per load.
constexpr int64_t kRowBlock = 4;
// Column tile so the active C panel and one B row stay in L1.
constexpr int64_t kColBlock = 1024;

inline void zero_rows(float* c, int64_t rows, int64_t n) {
  for (int64_t r = 0; r < rows; ++r) {
    float* cr = c + r * n;
    for (int64_t j = 0; j < n; ++j) cr[j] = 0.0f;
  }
}

// One (row panel, column tile) of C = A*B. Handles panels shorter than
// kRowBlock at the bottom edge.
inline void nn_panel(int64_t rows, int64_t jn, int64_t k, int64_t lda, int64_t ldc,
                     const float* a, const float* b, int64_t ldb, float* c) {
  if (rows == kRowBlock) {
    float* c0 = c;
    float* c1 = c + ldc;
    float* c2 = c + 2 * ldc;
    float* c3 = c + 3 * ldc;
    for (int64_t p = 0; p < k; ++p) {
      const float a0 = a[p];
      const float a1 = a[lda + p];
      const float a2 = a[2 * lda + p];
      const float a3 = a[3 * lda + p];
      const float* bp = b + p * ldb;
#pragma omp simd
      for (int64_t j = 0; j < jn; ++j) {
        c0[j] += a0 * bp[j];
        c1[j] += a1 * bp[j];
        c2[j] += a2 * bp[j];
        c3[j] += a3 * bp[j];
      }
    }
    return;
  }
  for (int64_t r = 0; r < rows; ++r) {
    float* cr = c + r * ldc;
    const float* ar = a + r * lda;
    for (int64_t p = 0; p < k; ++p) {
      const float av = ar[p];
      const float* bp = b + p * ldb;
#pragma omp simd
      for (int64_t j = 0; j < jn; ++j) cr[j] += av * bp[j];
    }
  }
}

}  // namespace

void gemm_nn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  const int64_t panels = (m + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (int64_t ib = 0; ib < panels; ++ib) {
    const int64_t i0 = ib * kRowBlock;
    const int64_t rows = std::min(kRowBlock, m - i0);
    if (!accumulate) zero_rows(c + i0 * n, rows, n);
    for (int64_t j0 = 0; j0 < n; j0 += kColBlock) {
      const int64_t jn = std::min(kColBlock, n - j0);
      nn_panel(rows, jn, k, k, n, a + i0 * k, b + j0, n, c + i0 * n + j0);
    }
  }
}

void gemm_nt(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  const int64_t panels = (m + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (int64_t ib = 0; ib < panels; ++ib) {
    const int64_t i0 = ib * kRowBlock;
    const int64_t rows = std::min(kRowBlock, m - i0);
    for (int64_t j0 = 0; j0 < n; j0 += kRowBlock) {
      const int64_t cols = std::min(kRowBlock, n - j0);
      if (rows == kRowBlock && cols == kRowBlock) {
        const float* a0 = a + i0 * k;
        const float* a1 = a0 + k;
        const float* a2 = a1 + k;
        const float* a3 = a2 + k;
        const float* b0 = b + j0 * k;
        const float* b1 = b0 + k;
        const float* b2 = b1 + k;
        const float* b3 = b2 + k;
        float s00 = 0.0f, s01 = 0.0f, s02 = 0.0f, s03 = 0.0f;
        float s10 = 0.0f, s11 = 0.0f, s12 = 0.0f, s13 = 0.0f;
        float s20 = 0.0f, s21 = 0.0f, s22 = 0.0f, s23 = 0.0f;
        float s30 = 0.0f, s31 = 0.0f, s32 = 0.0f, s33 = 0.0f;
#pragma omp simd reduction(+ : s00, s01, s02, s03, s10, s11, s12, s13, s20, s21, s22, s23, s30, \
                               s31, s32, s33)
        for (int64_t p = 0; p < k; ++p) {
          const float x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
          const float y0 = b0[p], y1 = b1[p], y2 = b2[p], y3 = b3[p];
          s00 += x0 * y0;
          s01 += x0 * y1;
          s02 += x0 * y2;
          s03 += x0 * y3;
          s10 += x1 * y0;
          s11 += x1 * y1;
          s12 += x1 * y2;
          s13 += x1 * y3;
          s20 += x2 * y0;
          s21 += x2 * y1;
          s22 += x2 * y2;
          s23 += x2 * y3;
          s30 += x3 * y0;
          s31 += x3 * y1;
          s32 += x3 * y2;
          s33 += x3 * y3;
        }
        float vals[kRowBlock][kRowBlock] = {
            {s00, s01, s02, s03}, {s10, s11, s12, s13}, {s20, s21, s22, s23}, {s30, s31, s32, s33}};
        for (int64_t r = 0; r < kRowBlock; ++r) {
          float* cr = c + (i0 + r) * n + j0;
          for (int64_t q = 0; q < kRowBlock; ++q) {
            cr[q] = accumulate ? cr[q] + vals[r][q] : vals[r][q];
          }
        }
      } else {
        for (int64_t r = 0; r < rows; ++r) {
          const float* ar = a + (i0 + r) * k;
          for (int64_t q = 0; q < cols; ++q) {
            const float* bq = b + (j0 + q) * k;
            float s = 0.0f;
#pragma omp simd reduction(+ : s)
            for (int64_t p = 0; p < k; ++p) s += ar[p] * bq[p];
            float* cv = c + (i0 + r) * n + (j0 + q);
            *cv = accumulate ? *cv + s : s;
          }
        }
      }
    }
  }
}

void gemm_tn(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
             bool accumulate) {
  const int64_t panels = (m + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (int64_t ib = 0; ib < panels; ++ib) {
    const int64_t i0 = ib * kRowBlock;
    const int64_t rows = std::min(kRowBlock, m - i0);
    if (!accumulate) zero_rows(c + i0 * n, rows, n);
    for (int64_t j0 = 0; j0 < n; j0 += kColBlock) {
      const int64_t jn = std::min(kColBlock, n - j0);
      if (rows == kRowBlock) {
        float* c0 = c + i0 * n + j0;
        float* c1 = c0 + n;
        float* c2 = c1 + n;
        float* c3 = c2 + n;
        for (int64_t p = 0; p < k; ++p) {
          const float* ap = a + p * m + i0;
          const float a0 = ap[0], a1 = ap[1], a2 = ap[2], a3 = ap[3];
          const float* bp = b + p * n + j0;
#pragma omp simd
          for (int64_t j = 0; j < jn; ++j) {
            c0[j] += a0 * bp[j];
            c1[j] += a1 * bp[j];
            c2[j] += a2 * bp[j];
            c3[j] += a3 * bp[j];
          }
        }
      } else {
        for (int64_t r = 0; r < rows; ++r) {
          float* cr = c + (i0 + r) * n + j0;
          for (int64_t p = 0; p < k; ++p) {
            const float av = a[p * m + i0 + r];
            const float* bp = b + p * n + j0;
#pragma omp simd
            for (int64_t j = 0; j < jn; ++j) cr[j] += av * bp[j];
          }
        }
      }
    }
  }
}

void gemm_nn_serial(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
                    bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      float s = accumulate ? c[i * n + j] : 0.0f;
      for (int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

void gemm_nt_serial(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
                    bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      float s = accumulate ? c[i * n + j] : 0.0f;
      for (int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[j * k + p];
      c[i * n + j] = s;
    }
  }
}

void gemm_tn_serial(int64_t m, int64_t n, int64_t k, const float* a, const float* b, float* c,
                    bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      float s = accumulate ? c[i * n + j] : 0.0f;
      for (int64_t p = 0; p < k; ++p) s += a[p * m + i] * b[p * n + j];
      c[i * n + j] = s;
    }
  }
}

}  // namespace dsd::kernels
