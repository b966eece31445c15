#pragma once

#include <cstdint>

namespace dsd::kernels {

// Max pooling with implicit negative-infinity padding. argmax stores the flat
// (h*w) position of each window maximum within its own plane, which is all the
// backward pass needs. Ties resolve to the first position in row-major scan
// order.
void maxpool2d_forward(const float* x, int64_t b, int64_t c, int64_t h, int64_t w, int64_t kernel,
                       int64_t stride, int64_t pad, float* y, int32_t* argmax);

void maxpool2d_backward(const float* dy, const int32_t* argmax, int64_t b, int64_t c, int64_t h,
                        int64_t w, int64_t oh, int64_t ow, float* dx);

/// (B,C,H,W) -> (B,C) spatial mean.
void global_avg_pool_forward(const float* x, int64_t b, int64_t c, int64_t h, int64_t w, float* y);

void global_avg_pool_backward(const float* dy, int64_t b, int64_t c, int64_t h, int64_t w,
                              float* dx);

}  // namespace dsd::kernels
