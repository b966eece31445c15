#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dsd/core/rng.hpp"
#include "dsd/kernels/batchnorm.hpp"
#include "dsd/kernels/conv.hpp"
#include "dsd/kernels/gemm.hpp"
#include "dsd/kernels/pool.hpp"

using namespace dsd;
using namespace dsd::kernels;

namespace {

std::vector<float> random_vec(size_t n, Rng& rng, double scale = 1.0) {
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-scale, scale));
  return v;
}

double max_abs_diff(const std::vector<float>& a, const std::vector<float>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

}  // namespace

TEST_CASE("gemm variants match the serial references") {
  Rng rng(1);
  // Deliberately awkward sizes around the blocking factors.
  const int64_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 4, 4}, {5, 1027, 9},
                               {17, 33, 129}, {64, 64, 64}, {9, 2050, 3}};
  for (const auto& s : shapes) {
    const int64_t m = s[0], n = s[1], k = s[2];
    const auto a = random_vec(size_t(m * k), rng);
    const auto b_nn = random_vec(size_t(k * n), rng);
    const auto b_nt = random_vec(size_t(n * k), rng);
    const auto a_tn = random_vec(size_t(k * m), rng);

    std::vector<float> c1(size_t(m * n)), c2(size_t(m * n));
    gemm_nn(m, n, k, a.data(), b_nn.data(), c1.data());
    gemm_nn_serial(m, n, k, a.data(), b_nn.data(), c2.data());
    CHECK(max_abs_diff(c1, c2) < 1e-4);

    gemm_nt(m, n, k, a.data(), b_nt.data(), c1.data());
    gemm_nt_serial(m, n, k, a.data(), b_nt.data(), c2.data());
    CHECK(max_abs_diff(c1, c2) < 1e-4);

    gemm_tn(m, n, k, a_tn.data(), b_nn.data(), c1.data());
    gemm_tn_serial(m, n, k, a_tn.data(), b_nn.data(), c2.data());
    CHECK(max_abs_diff(c1, c2) < 1e-4);
  }
}

TEST_CASE("gemm accumulate adds onto the output") {
  Rng rng(2);
  const int64_t m = 6, n = 10, k = 8;
  const auto a = random_vec(size_t(m * k), rng);
  const auto b = random_vec(size_t(k * n), rng);
  std::vector<float> base(size_t(m * n), 0.5f);
  std::vector<float> c = base;
  gemm_nn(m, n, k, a.data(), b.data(), c.data(), true);
  std::vector<float> prod(size_t(m * n));
  gemm_nn_serial(m, n, k, a.data(), b.data(), prod.data());
  for (size_t i = 0; i < c.size(); ++i) {
    CHECK(std::abs(c[i] - (base[i] + prod[i])) < 1e-4f);
  }
}

TEST_CASE("conv forward equals the direct loops") {
  Rng rng(3);
  struct Shape {
    int64_t b, c, h, w, oc, k, s, p;
  };
  const Shape shapes[] = {
      {2, 3, 9, 11, 4, 3, 1, 1}, {1, 2, 8, 8, 3, 3, 2, 1}, {2, 1, 13, 13, 2, 7, 2, 3},
      {1, 4, 5, 5, 4, 1, 1, 0},
  };
  for (const Shape& s : shapes) {
    const auto x = random_vec(size_t(s.b * s.c * s.h * s.w), rng);
    const auto w = random_vec(size_t(s.oc * s.c * s.k * s.k), rng);
    const int64_t oh = conv_out_extent(s.h, s.k, s.s, s.p);
    const int64_t ow = conv_out_extent(s.w, s.k, s.s, s.p);
    std::vector<float> y1(size_t(s.b * s.oc * oh * ow)), y2 = y1;
    conv2d_forward(x.data(), s.b, s.c, s.h, s.w, w.data(), s.oc, s.k, s.s, s.p, y1.data());
    conv2d_forward_serial(x.data(), s.b, s.c, s.h, s.w, w.data(), s.oc, s.k, s.s, s.p, y2.data());
    CHECK(max_abs_diff(y1, y2) < 1e-4);
  }
}

TEST_CASE("conv backward passes finite differences") {
  Rng rng(4);
  const int64_t b = 2, c = 2, h = 6, w = 5, oc = 3, k = 3, stride = 2, pad = 1;
  const int64_t oh = conv_out_extent(h, k, stride, pad);
  const int64_t ow = conv_out_extent(w, k, stride, pad);
  auto x = random_vec(size_t(b * c * h * w), rng);
  auto wt = random_vec(size_t(oc * c * k * k), rng);
  const auto dy = random_vec(size_t(b * oc * oh * ow), rng);

  std::vector<float> dx(x.size()), dw(wt.size(), 0.0f);
  conv2d_backward(x.data(), dy.data(), wt.data(), b, c, h, w, oc, k, stride, pad, dx.data(),
                  dw.data());

  auto loss = [&](const std::vector<float>& xs, const std::vector<float>& ws) {
    std::vector<float> y(size_t(b * oc * oh * ow));
    conv2d_forward(xs.data(), b, c, h, w, ws.data(), oc, k, stride, pad, y.data());
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) acc += double(y[i]) * double(dy[i]);
    return acc;
  };

  const float eps = 1e-2f;
  Rng pick(5);
  for (int trial = 0; trial < 12; ++trial) {
    const size_t i = size_t(pick.uniform_index(x.size()));
    auto xp = x;
    auto xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    const double num = (loss(xp, wt) - loss(xm, wt)) / (2.0 * eps);
    CHECK(std::abs(num - double(dx[i])) < 2e-2);

    const size_t j = size_t(pick.uniform_index(wt.size()));
    auto wp = wt;
    auto wm = wt;
    wp[j] += eps;
    wm[j] -= eps;
    const double numw = (loss(x, wp) - loss(x, wm)) / (2.0 * eps);
    CHECK(std::abs(numw - double(dw[j])) < 2e-2);
  }
}

TEST_CASE("conv backward accumulates dw") {
  Rng rng(6);
  const int64_t b = 1, c = 1, h = 4, w = 4, oc = 2, k = 3, stride = 1, pad = 1;
  const auto x = random_vec(size_t(b * c * h * w), rng);
  const auto wt = random_vec(size_t(oc * c * k * k), rng);
  const auto dy = random_vec(size_t(b * oc * h * w), rng);
  std::vector<float> dx(x.size());
  std::vector<float> dw1(wt.size(), 0.0f);
  conv2d_backward(x.data(), dy.data(), wt.data(), b, c, h, w, oc, k, stride, pad, dx.data(),
                  dw1.data());
  std::vector<float> dw2 = dw1;  // run again on top: should double
  conv2d_backward(x.data(), dy.data(), wt.data(), b, c, h, w, oc, k, stride, pad, dx.data(),
                  dw2.data());
  for (size_t i = 0; i < dw1.size(); ++i) CHECK(std::abs(dw2[i] - 2 * dw1[i]) < 1e-4f);
}

TEST_CASE("maxpool forward and backward") {
  // 1x1x4x4 plane with a known max layout.
  const std::vector<float> x = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16};
  const int64_t oh = conv_out_extent(4, 3, 2, 1);
  const int64_t ow = oh;
  std::vector<float> y(size_t(oh * ow));
  std::vector<int32_t> argmax(y.size());
  maxpool2d_forward(x.data(), 1, 1, 4, 4, 3, 2, 1, y.data(), argmax.data());
  // Windows centered on the stride-2 grid with -inf padding.
  CHECK(y[0] == 6);
  CHECK(y[1] == 8);
  CHECK(y[2] == 14);
  CHECK(y[3] == 16);

  std::vector<float> dy = {1, 2, 3, 4};
  std::vector<float> dx(16, 0.0f);
  maxpool2d_backward(dy.data(), argmax.data(), 1, 1, 4, 4, oh, ow, dx.data());
  CHECK(dx[5] == 1);
  CHECK(dx[7] == 2);
  CHECK(dx[13] == 3);
  CHECK(dx[15] == 4);
  double sum = 0;
  for (float v : dx) sum += v;
  CHECK(sum == 10.0);
}

TEST_CASE("maxpool ties pick the first position scanned") {
  const std::vector<float> x = {5, 5, 5, 5};
  std::vector<float> y(1);
  std::vector<int32_t> argmax(1);
  maxpool2d_forward(x.data(), 1, 1, 2, 2, 2, 2, 0, y.data(), argmax.data());
  CHECK(y[0] == 5);
  CHECK(argmax[0] == 0);
}

TEST_CASE("global average pool round trip") {
  Rng rng(7);
  const int64_t b = 2, c = 3, h = 4, w = 5;
  const auto x = random_vec(size_t(b * c * h * w), rng);
  std::vector<float> y(size_t(b * c));
  global_avg_pool_forward(x.data(), b, c, h, w, y.data());
  double acc = 0.0;
  for (int64_t i = 0; i < h * w; ++i) acc += x[size_t(i)];
  CHECK(std::abs(y[0] - acc / double(h * w)) < 1e-6);

  std::vector<float> dy(size_t(b * c), 1.0f);
  std::vector<float> dx(x.size());
  global_avg_pool_backward(dy.data(), b, c, h, w, dx.data());
  for (float v : dx) CHECK(std::abs(v - 1.0 / double(h * w)) < 1e-7);
}

TEST_CASE("batchnorm train matches the serial reference and updates running stats") {
  Rng rng(8);
  const int64_t b = 3, c = 4, h = 5, w = 2;
  const auto x = random_vec(size_t(b * c * h * w), rng, 2.0);
  const auto gamma = random_vec(size_t(c), rng);
  const auto beta = random_vec(size_t(c), rng);

  std::vector<float> rm1(size_t(c), 0.1f), rv1(size_t(c), 1.2f);
  std::vector<float> rm2 = rm1, rv2 = rv1;
  std::vector<float> y1(x.size()), y2(x.size());
  std::vector<float> sm1(size_t(c), 0.0f), si1(size_t(c), 0.0f);
  std::vector<float> sm2(size_t(c), 0.0f), si2(size_t(c), 0.0f);

  batchnorm_forward_train(x.data(), b, c, h, w, gamma.data(), beta.data(), 1e-5f, 0.1f,
                          rm1.data(), rv1.data(), y1.data(), sm1.data(), si1.data());
  batchnorm_forward_train_serial(x.data(), b, c, h, w, gamma.data(), beta.data(), 1e-5f, 0.1f,
                                 rm2.data(), rv2.data(), y2.data(), sm2.data(), si2.data());
  CHECK(max_abs_diff(y1, y2) < 1e-5);
  CHECK(max_abs_diff(rm1, rm2) < 1e-6);
  CHECK(max_abs_diff(rv1, rv2) < 1e-6);

  // Normalized output has zero mean and unit variance per channel before the
  // affine part; undo it and check.
  for (int64_t ch = 0; ch < c; ++ch) {
    double mean = 0.0, var = 0.0;
    const int64_t n = b * h * w;
    for (int64_t bi = 0; bi < b; ++bi) {
      for (int64_t i = 0; i < h * w; ++i) {
        const double xhat =
            (double(y1[size_t(((bi * c) + ch) * h * w + i)]) - beta[size_t(ch)]) /
            gamma[size_t(ch)];
        mean += xhat;
        var += xhat * xhat;
      }
    }
    mean /= double(n);
    var = var / double(n) - mean * mean;
    CHECK(std::abs(mean) < 1e-4);
    CHECK(std::abs(var - 1.0) < 1e-2);
  }
}

TEST_CASE("batchnorm eval uses the running statistics") {
  const int64_t b = 1, c = 1, h = 1, w = 3;
  const std::vector<float> x = {1.0f, 2.0f, 3.0f};
  const std::vector<float> gamma = {2.0f}, beta = {1.0f};
  const std::vector<float> rm = {2.0f}, rv = {4.0f};
  std::vector<float> y(3);
  batchnorm_forward_eval(x.data(), b, c, h, w, gamma.data(), beta.data(), rm.data(), rv.data(),
                         0.0f, y.data());
  CHECK(std::abs(y[0] - 0.0f) < 1e-5f);
  CHECK(std::abs(y[1] - 1.0f) < 1e-5f);
  CHECK(std::abs(y[2] - 2.0f) < 1e-5f);
}

TEST_CASE("batchnorm backward passes finite differences") {
  Rng rng(9);
  const int64_t b = 2, c = 2, h = 3, w = 3;
  auto x = random_vec(size_t(b * c * h * w), rng);
  auto gamma = random_vec(size_t(c), rng);
  for (float& g : gamma) g += 1.5f;  // keep away from zero
  const auto beta = random_vec(size_t(c), rng);
  const auto dy = random_vec(size_t(b * c * h * w), rng);

  auto forward = [&](const std::vector<float>& xs, const std::vector<float>& gs,
                     const std::vector<float>& bs) {
    std::vector<float> rm(size_t(c), 0.0f), rv(size_t(c), 1.0f);
    std::vector<float> y(xs.size()), sm(size_t(c), 0.0f), si(size_t(c), 0.0f);
    batchnorm_forward_train(xs.data(), b, c, h, w, gs.data(), bs.data(), 1e-5f, 0.1f, rm.data(),
                            rv.data(), y.data(), sm.data(), si.data());
    double acc = 0.0;
    for (size_t i = 0; i < y.size(); ++i) acc += double(y[i]) * double(dy[i]);
    return acc;
  };

  std::vector<float> rm(size_t(c), 0.0f), rv(size_t(c), 1.0f);
  std::vector<float> y(x.size()), sm(size_t(c), 0.0f), si(size_t(c), 0.0f);
  batchnorm_forward_train(x.data(), b, c, h, w, gamma.data(), beta.data(), 1e-5f, 0.1f, rm.data(),
                          rv.data(), y.data(), sm.data(), si.data());
  std::vector<float> dx(x.size()), dgamma(size_t(c), 0.0f), dbeta(size_t(c), 0.0f);
  batchnorm_backward(x.data(), dy.data(), b, c, h, w, gamma.data(), sm.data(), si.data(),
                     dx.data(), dgamma.data(), dbeta.data());

  const float eps = 1e-2f;
  Rng pick(10);
  for (int trial = 0; trial < 10; ++trial) {
    const size_t i = size_t(pick.uniform_index(x.size()));
    auto xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    const double num = (forward(xp, gamma, beta) - forward(xm, gamma, beta)) / (2.0 * eps);
    CHECK(std::abs(num - double(dx[i])) < 5e-2);
  }
  for (int64_t ch = 0; ch < c; ++ch) {
    auto gp = gamma, gm = gamma;
    gp[size_t(ch)] += eps;
    gm[size_t(ch)] -= eps;
    const double num = (forward(x, gp, beta) - forward(x, gm, beta)) / (2.0 * eps);
    CHECK(std::abs(num - double(dgamma[size_t(ch)])) < 5e-2);

    auto bp = beta, bm = beta;
    bp[size_t(ch)] += eps;
    bm[size_t(ch)] -= eps;
    const double numb = (forward(x, gamma, bp) - forward(x, gamma, bm)) / (2.0 * eps);
    CHECK(std::abs(numb - double(dbeta[size_t(ch)])) < 5e-2);
  }
}
