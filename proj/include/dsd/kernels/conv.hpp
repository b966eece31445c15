#pragma once

#include <cstdint>

namespace dsd::kernels {

/// Output extent of a strided convolution or pooling window.
int64_t conv_out_extent(int64_t extent, int64_t kernel, int64_t stride, int64_t pad);

/// Expand one (C,H,W) plane into the (C*k*k, OH*OW) patch matrix.
void im2col(const float* x, int64_t c, int64_t h, int64_t w, int64_t kernel, int64_t stride,
            int64_t pad, float* col);

/// Scatter-add a patch matrix back into a (C,H,W) gradient plane.
void col2im_add(const float* col, int64_t c, int64_t h, int64_t w, int64_t kernel, int64_t stride,
                int64_t pad, float* dx);

// Batched convolution, weights laid out (out_c, in_c*k*k), no bias. The
// forward path is im2col plus gemm_nn per sample; backward reuses the same
// patch matrix for the weight gradient and scatters the input gradient
// through col2im. dx and dw may be null to skip either gradient; dw is
// accumulated into, dx is overwritten.
void conv2d_forward(const float* x, int64_t b, int64_t c, int64_t h, int64_t w, const float* weight,
                    int64_t out_c, int64_t kernel, int64_t stride, int64_t pad, float* y);

void conv2d_backward(const float* x, const float* dy, const float* weight, int64_t b, int64_t c,
                     int64_t h, int64_t w, int64_t out_c, int64_t kernel, int64_t stride,
                     int64_t pad, float* dx, float* dw);

// Direct seven-loop convolution kept as the test reference for the im2col
// route.
void conv2d_forward_serial(const float* x, int64_t b, int64_t c, int64_t h, int64_t w,
                           const float* weight, int64_t out_c, int64_t kernel, int64_t stride,
                           int64_t pad, float* y);

}  // namespace dsd::kernels
