#include "dsd/kernels/conv.hpp"

#include <algorithm>
#include <vector>

#include "dsd/core/parallel.hpp"
#include "dsd/kernels/gemm.hpp"

namespace dsd::kernels {

int64_t conv_out_extent(int64_t extent, int64_t kernel, int64_t stride, int64_t pad) {
  return (extent + 2 * pad - kernel) / stride + 1;
}

void im2col(const float* x, int64_t c, int64_t h, int64_t w, int64_t kernel, int64_t stride,
            int64_t pad, float* col) {
  const int64_t oh = conv_out_extent(h, kernel, stride, pad);
  const int64_t ow = conv_out_extent(w, kernel, stride, pad);
  const int64_t plane = oh * ow;
// Each channel fills its own k*k block of rows.
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch) {
    const float* xc = x + ch * h * w;
    float* colc = col + ch * kernel * kernel * plane;
    for (int64_t ki = 0; ki < kernel; ++ki) {
      for (int64_t kj = 0; kj < kernel; ++kj) {
        float* row = colc + (ki * kernel + kj) * plane;
        for (int64_t oi = 0; oi < oh; ++oi) {
          const int64_t ii = oi * stride - pad + ki;
          float* out = row + oi * ow;
          if (ii < 0 || ii >= h) {
            for (int64_t oj = 0; oj < ow; ++oj) out[oj] = 0.0f;
            continue;
          }
          const float* xrow = xc + ii * w;
          for (int64_t oj = 0; oj < ow; ++oj) {
            const int64_t jj = oj * stride - pad + kj;
            out[oj] = (jj >= 0 && jj < w) ? xrow[jj] : 0.0f;
          }
        }
      }
    }
  }
}

void col2im_add(const float* col, int64_t c, int64_t h, int64_t w, int64_t kernel, int64_t stride,
                int64_t pad, float* dx) {
  const int64_t oh = conv_out_extent(h, kernel, stride, pad);
  const int64_t ow = conv_out_extent(w, kernel, stride, pad);
  const int64_t plane = oh * ow;
// Each channel accumulates only into its own plane, so the channel loop is
// safe to split across threads.
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch) {
    float* dxc = dx + ch * h * w;
    const float* colc = col + ch * kernel * kernel * plane;
    for (int64_t ki = 0; ki < kernel; ++ki) {
      for (int64_t kj = 0; kj < kernel; ++kj) {
        const float* row = colc + (ki * kernel + kj) * plane;
        for (int64_t oi = 0; oi < oh; ++oi) {
          const int64_t ii = oi * stride - pad + ki;
          if (ii < 0 || ii >= h) continue;
          float* dxrow = dxc + ii * w;
          const float* in = row + oi * ow;
          for (int64_t oj = 0; oj < ow; ++oj) {
            const int64_t jj = oj * stride - pad + kj;
            if (jj >= 0 && jj < w) dxrow[jj] += in[oj];
          }
        }
      }
    }
  }
}

void conv2d_forward(const float* x, int64_t b, int64_t c, int64_t h, int64_t w, const float* weight,
                    int64_t out_c, int64_t kernel, int64_t stride, int64_t pad, float* y) {
  const int64_t oh = conv_out_extent(h, kernel, stride, pad);
  const int64_t ow = conv_out_extent(w, kernel, stride, pad);
  const int64_t plane = oh * ow;
  const int64_t patch = c * kernel * kernel;
  std::vector<float> col(static_cast<size_t>(patch) * plane);
  for (int64_t s = 0; s < b; ++s) {
    im2col(x + s * c * h * w, c, h, w, kernel, stride, pad, col.data());
    gemm_nn(out_c, plane, patch, weight, col.data(), y + s * out_c * plane);
  }
}

void conv2d_backward(const float* x, const float* dy, const float* weight, int64_t b, int64_t c,
                     int64_t h, int64_t w, int64_t out_c, int64_t kernel, int64_t stride,
                     int64_t pad, float* dx, float* dw) {
  const int64_t oh = conv_out_extent(h, kernel, stride, pad);
  const int64_t ow = conv_out_extent(w, kernel, stride, pad);
  const int64_t plane = oh * ow;
  const int64_t patch = c * kernel * kernel;
  std::vector<float> col(static_cast<size_t>(patch) * plane);
  std::vector<float> dcol;
  if (dx) dcol.resize(static_cast<size_t>(patch) * plane);
  for (int64_t s = 0; s < b; ++s) {
    const float* dys = dy + s * out_c * plane;
    if (dw) {
      im2col(x + s * c * h * w, c, h, w, kernel, stride, pad, col.data());
      // Samples accumulate in batch order, keeping the weight gradient
      // independent of the thread count.
      gemm_nt(out_c, patch, plane, dys, col.data(), dw, true);
    }
    if (dx) {
      gemm_tn(patch, plane, out_c, weight, dys, dcol.data());
      float* dxs = dx + s * c * h * w;
      std::fill(dxs, dxs + c * h * w, 0.0f);
      col2im_add(dcol.data(), c, h, w, kernel, stride, pad, dxs);
    }
  }
}

void conv2d_forward_serial(const float* x, int64_t b, int64_t c, int64_t h, int64_t w,
                           const float* weight, int64_t out_c, int64_t kernel, int64_t stride,
                           int64_t pad, float* y) {
  const int64_t oh = conv_out_extent(h, kernel, stride, pad);
  const int64_t ow = conv_out_extent(w, kernel, stride, pad);
  for (int64_t s = 0; s < b; ++s) {
    for (int64_t oc = 0; oc < out_c; ++oc) {
      for (int64_t oi = 0; oi < oh; ++oi) {
        for (int64_t oj = 0; oj < ow; ++oj) {
          float acc = 0.0f;
          for (int64_t ch = 0; ch < c; ++ch) {
            for (int64_t ki = 0; ki < kernel; ++ki) {
              const int64_t ii = oi * stride - pad + ki;
              if (ii < 0 || ii >= h) continue;
              for (int64_t kj = 0; kj < kernel; ++kj) {
                const int64_t jj = oj * stride - pad + kj;
                if (jj < 0 || jj >= w) continue;
                acc += x[((s * c + ch) * h + ii) * w + jj] *
                       weight[(oc * c + ch) * kernel * kernel + ki * kernel + kj];
              }
            }
          }
          y[((s * out_c + oc) * oh + oi) * ow + oj] = acc;
        }
      }
    }
  }
}

}  // namespace dsd::kernels
