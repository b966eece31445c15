#include "dsd/kernels/batchnorm.hpp"

#include <cmath>

#include "dsd/core/parallel.hpp"

namespace dsd::kernels {

void batchnorm_forward_train(const float* x, int64_t b, int64_t c, int64_t h, int64_t w,
                             const float* gamma, const float* beta, float eps, float momentum,
                             float* running_mean, float* running_var, float* y, float* save_mean,
                             float* save_invstd) {
  const int64_t plane = h * w;
  const int64_t n = b * plane;
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    double sumsq = 0.0;
    for (int64_t s = 0; s < b; ++s) {
      const float* xp = x + (s * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const double v = xp[i];
        sum += v;
        sumsq += v * v;
      }
    }
    const double mean = sum / static_cast<double>(n);
    double var = sumsq / static_cast<double>(n) - mean * mean;
    if (var < 0.0) var = 0.0;
    const double invstd = 1.0 / std::sqrt(var + static_cast<double>(eps));
    save_mean[ch] = static_cast<float>(mean);
    save_invstd[ch] = static_cast<float>(invstd);
    const double unbiased = n > 1 ? var * static_cast<double>(n) / static_cast<double>(n - 1) : var;
    running_mean[ch] =
        static_cast<float>((1.0 - momentum) * running_mean[ch] + momentum * mean);
    running_var[ch] =
        static_cast<float>((1.0 - momentum) * running_var[ch] + momentum * unbiased);
    const float scale = gamma[ch] * static_cast<float>(invstd);
    const float shift = beta[ch] - static_cast<float>(mean) * scale;
    for (int64_t s = 0; s < b; ++s) {
      const float* xp = x + (s * c + ch) * plane;
      float* yp = y + (s * c + ch) * plane;
#pragma omp simd
      for (int64_t i = 0; i < plane; ++i) yp[i] = xp[i] * scale + shift;
    }
  }
}

void batchnorm_forward_eval(const float* x, int64_t b, int64_t c, int64_t h, int64_t w,
                            const float* gamma, const float* beta, const float* running_mean,
                            const float* running_var, float eps, float* y) {
  const int64_t plane = h * w;
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch) {
    const float invstd = 1.0f / std::sqrt(running_var[ch] + eps);
    const float scale = gamma[ch] * invstd;
    const float shift = beta[ch] - running_mean[ch] * scale;
    for (int64_t s = 0; s < b; ++s) {
      const float* xp = x + (s * c + ch) * plane;
      float* yp = y + (s * c + ch) * plane;
#pragma omp simd
      for (int64_t i = 0; i < plane; ++i) yp[i] = xp[i] * scale + shift;
    }
  }
}

void batchnorm_backward(const float* x, const float* dy, int64_t b, int64_t c, int64_t h, int64_t w,
                        const float* gamma, const float* save_mean, const float* save_invstd,
                        float* dx, float* dgamma, float* dbeta) {
  const int64_t plane = h * w;
  const int64_t n = b * plane;
#pragma omp parallel for schedule(static)
  for (int64_t ch = 0; ch < c; ++ch) {
    const double mean = save_mean[ch];
    const double invstd = save_invstd[ch];
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (int64_t s = 0; s < b; ++s) {
      const float* xp = x + (s * c + ch) * plane;
      const float* gp = dy + (s * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const double g = gp[i];
        sum_dy += g;
        sum_dy_xhat += g * (xp[i] - mean) * invstd;
      }
    }
    dbeta[ch] += static_cast<float>(sum_dy);
    dgamma[ch] += static_cast<float>(sum_dy_xhat);
    const double k = gamma[ch] * invstd;
    const double mg = sum_dy / static_cast<double>(n);
    const double mgx = sum_dy_xhat / static_cast<double>(n);
    for (int64_t s = 0; s < b; ++s) {
      const float* xp = x + (s * c + ch) * plane;
      const float* gp = dy + (s * c + ch) * plane;
      float* dp = dx + (s * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const double xhat = (xp[i] - mean) * invstd;
        dp[i] = static_cast<float>(k * (gp[i] - mg - xhat * mgx));
      }
    }
  }
}

void batchnorm_forward_train_serial(const float* x, int64_t b, int64_t c, int64_t h, int64_t w,
                                    const float* gamma, const float* beta, float eps,
                                    float momentum, float* running_mean, float* running_var,
                                    float* y, float* save_mean, float* save_invstd) {
  const int64_t plane = h * w;
  const int64_t n = b * plane;
  for (int64_t ch = 0; ch < c; ++ch) {
    double sum = 0.0;
    for (int64_t s = 0; s < b; ++s) {
      const float* xp = x + (s * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) sum += xp[i];
    }
    const double mean = sum / static_cast<double>(n);
    double varsum = 0.0;
    for (int64_t s = 0; s < b; ++s) {
      const float* xp = x + (s * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        const double d = xp[i] - mean;
        varsum += d * d;
      }
    }
    const double var = varsum / static_cast<double>(n);
    const double invstd = 1.0 / std::sqrt(var + static_cast<double>(eps));
    save_mean[ch] = static_cast<float>(mean);
    save_invstd[ch] = static_cast<float>(invstd);
    const double unbiased = n > 1 ? varsum / static_cast<double>(n - 1) : var;
    running_mean[ch] =
        static_cast<float>((1.0 - momentum) * running_mean[ch] + momentum * mean);
    running_var[ch] =
        static_cast<float>((1.0 - momentum) * running_var[ch] + momentum * unbiased);
    for (int64_t s = 0; s < b; ++s) {
      const float* xp = x + (s * c + ch) * plane;
      float* yp = y + (s * c + ch) * plane;
      for (int64_t i = 0; i < plane; ++i) {
        yp[i] = static_cast<float>((xp[i] - mean) * invstd) * gamma[ch] + beta[ch];
      }
    }
  }
}

}  // namespace dsd::kernels
