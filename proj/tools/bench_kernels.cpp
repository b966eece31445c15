#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "dsd/core/rng.hpp"
#include "dsd/core/tensor.hpp"
#include "dsd/kernels/conv.hpp"
#include "dsd/kernels/gemm.hpp"

namespace {

using dsd::Rng;
using dsd::Tensor;

double time_best_of(int reps, const std::function<void()>& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void fill_random(std::vector<float>& v, Rng& rng) {
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
}

void bench_gemm(int64_t m, int64_t n, int64_t k) {
  Rng rng(42);
  std::vector<float> a(static_cast<size_t>(m * k));
  std::vector<float> b(static_cast<size_t>(k * n));
  std::vector<float> c(static_cast<size_t>(m * n));
  fill_random(a, rng);
  fill_random(b, rng);

  const double flops = 2.0 * static_cast<double>(m) * n * k;
  const double t_par =
      time_best_of(5, [&] { dsd::kernels::gemm_nn(m, n, k, a.data(), b.data(), c.data()); });
  const double t_ser = time_best_of(
      3, [&] { dsd::kernels::gemm_nn_serial(m, n, k, a.data(), b.data(), c.data()); });
  std::printf("gemm_nn  %4lld x %4lld x %4lld   blocked %8.2f ms (%6.2f GFLOP/s)   naive %8.2f ms   speedup %.2fx\n",
              static_cast<long long>(m), static_cast<long long>(n), static_cast<long long>(k),
              t_par * 1e3, flops / t_par * 1e-9, t_ser * 1e3, t_ser / t_par);
}

void bench_conv(int64_t batch, int64_t cin, int64_t cout, int64_t hw, int64_t kernel,
                int64_t stride) {
  Rng rng(43);
  Tensor x({batch, cin, hw, hw});
  Tensor w({cout, cin * kernel * kernel});
  const int64_t out_hw = dsd::kernels::conv_out_extent(hw, kernel, stride, kernel / 2);
  Tensor y({batch, cout, out_hw, out_hw});
  for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(rng.uniform(-1.0, 1.0));

  const double flops = 2.0 * static_cast<double>(batch) * cout * out_hw * out_hw * cin * kernel *
                       kernel;
  const double t_fast = time_best_of(5, [&] {
    dsd::kernels::conv2d_forward(x.data(), batch, cin, hw, hw, w.data(), cout, kernel, stride,
                                 kernel / 2, y.data());
  });
  const double t_ser = time_best_of(2, [&] {
    dsd::kernels::conv2d_forward_serial(x.data(), batch, cin, hw, hw, w.data(), cout, kernel,
                                        stride, kernel / 2, y.data());
  });
  std::printf("conv3x3  b%lld %3lldc -> %3lldc @%3lld   im2col %8.2f ms (%6.2f GFLOP/s)   direct %8.2f ms   speedup %.2fx\n",
              static_cast<long long>(batch), static_cast<long long>(cin),
              static_cast<long long>(cout), static_cast<long long>(hw), t_fast * 1e3,
              flops / t_fast * 1e-9, t_ser * 1e3, t_ser / t_fast);
}

}  // namespace

int main() {
  std::printf("matrix multiply, blocked/parallel vs naive serial\n");
  bench_gemm(256, 256, 256);
  bench_gemm(512, 512, 512);
  bench_gemm(144, 1089, 1152);  // the shape conv lowers to at stage 3

  std::printf("\nconvolution, im2col+gemm vs direct loops\n");
  bench_conv(4, 64, 64, 33, 3, 1);
  bench_conv(2, 128, 128, 17, 3, 1);
  return 0;
}
