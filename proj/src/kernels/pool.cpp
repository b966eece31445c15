#include "dsd/kernels/pool.hpp"

#include <algorithm>
#include <limits>

#include "dsd/core/parallel.hpp"
#include "dsd/kernels/conv.hpp"

namespace dsd::kernels {

void maxpool2d_forward(const float* x, int64_t b, int64_t c, int64_t h, int64_t w, int64_t kernel,
                       int64_t stride, int64_t pad, float* y, int32_t* argmax) {
  const int64_t oh = conv_out_extent(h, kernel, stride, pad);
  const int64_t ow = conv_out_extent(w, kernel, stride, pad);
  const int64_t planes = b * c;
#pragma omp parallel for schedule(static)
  for (int64_t pl = 0; pl < planes; ++pl) {
    const float* xp = x + pl * h * w;
    float* yp = y + pl * oh * ow;
    int32_t* ap = argmax + pl * oh * ow;
    for (int64_t oi = 0; oi < oh; ++oi) {
      const int64_t i0 = std::max<int64_t>(0, oi * stride - pad);
      const int64_t i1 = std::min(h, oi * stride - pad + kernel);
      for (int64_t oj = 0; oj < ow; ++oj) {
        const int64_t j0 = std::max<int64_t>(0, oj * stride - pad);
        const int64_t j1 = std::min(w, oj * stride - pad + kernel);
        float best = -std::numeric_limits<float>::infinity();
        int32_t idx = -1;
        for (int64_t ii = i0; ii < i1; ++ii) {
          for (int64_t jj = j0; jj < j1; ++jj) {
            const float v = xp[ii * w + jj];
            if (v > best) {
              best = v;
              idx = static_cast<int32_t>(ii * w + jj);
            }
          }
        }
        yp[oi * ow + oj] = best;
        ap[oi * ow + oj] = idx;
      }
    }
  }
}

void maxpool2d_backward(const float* dy, const int32_t* argmax, int64_t b, int64_t c, int64_t h,
                        int64_t w, int64_t oh, int64_t ow, float* dx) {
  const int64_t planes = b * c;
// Indices point inside each plane, so planes never touch each other.
#pragma omp parallel for schedule(static)
  for (int64_t pl = 0; pl < planes; ++pl) {
    float* dxp = dx + pl * h * w;
    std::fill(dxp, dxp + h * w, 0.0f);
    const float* dyp = dy + pl * oh * ow;
    const int32_t* ap = argmax + pl * oh * ow;
    for (int64_t o = 0; o < oh * ow; ++o) dxp[ap[o]] += dyp[o];
  }
}

void global_avg_pool_forward(const float* x, int64_t b, int64_t c, int64_t h, int64_t w, float* y) {
  const int64_t planes = b * c;
  const double inv = 1.0 / static_cast<double>(h * w);
#pragma omp parallel for schedule(static)
  for (int64_t pl = 0; pl < planes; ++pl) {
    const float* xp = x + pl * h * w;
    double s = 0.0;
    for (int64_t i = 0; i < h * w; ++i) s += xp[i];
    y[pl] = static_cast<float>(s * inv);
  }
}

void global_avg_pool_backward(const float* dy, int64_t b, int64_t c, int64_t h, int64_t w,
                              float* dx) {
  const int64_t planes = b * c;
  const float inv = 1.0f / static_cast<float>(h * w);
#pragma omp parallel for schedule(static)
  for (int64_t pl = 0; pl < planes; ++pl) {
    const float g = dy[pl] * inv;
    float* dxp = dx + pl * h * w;
    for (int64_t i = 0; i < h * w; ++i) dxp[i] = g;
  }
}

}  // namespace dsd::kernels
