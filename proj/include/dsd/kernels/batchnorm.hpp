#pragma once

#include <cstdint>

namespace dsd::kernels {

// Per-channel batch normalization over (B,C,H,W). Channel statistics are
// summed in double in a fixed order, then every channel normalizes
// independently, so the parallel split over channels is deterministic.
//
// Training forward normalizes with the biased batch variance and advances the
// running statistics with the unbiased one:
//   running = (1 - momentum) * running + momentum * batch_stat
// save_mean / save_invstd keep what backward needs.
void batchnorm_forward_train(const float* x, int64_t b, int64_t c, int64_t h, int64_t w,
                             const float* gamma, const float* beta, float eps, float momentum,
                             float* running_mean, float* running_var, float* y, float* save_mean,
                             float* save_invstd);

void batchnorm_forward_eval(const float* x, int64_t b, int64_t c, int64_t h, int64_t w,
                            const float* gamma, const float* beta, const float* running_mean,
                            const float* running_var, float eps, float* y);

/// dx is overwritten; dgamma and dbeta are accumulated into.
void batchnorm_backward(const float* x, const float* dy, int64_t b, int64_t c, int64_t h, int64_t w,
                        const float* gamma, const float* save_mean, const float* save_invstd,
                        float* dx, float* dgamma, float* dbeta);

/// Plain reference for the training forward, used only by tests.
void batchnorm_forward_train_serial(const float* x, int64_t b, int64_t c, int64_t h, int64_t w,
                                    const float* gamma, const float* beta, float eps,
                                    float momentum, float* running_mean, float* running_var,
                                    float* y, float* save_mean, float* save_invstd);

}  // namespace dsd::kernels
