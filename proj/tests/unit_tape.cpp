#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "dsd/core/rng.hpp"
#include "dsd/core/tensor.hpp"
#include "dsd/nn/model.hpp"
#include "dsd/nn/param.hpp"
#include "dsd/nn/tape.hpp"

using namespace dsd;
using namespace dsd::nn;

namespace {

Tensor random_tensor(std::vector<int64_t> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i)
    t[i] = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

// Scalar loss <coef, x>: turns any node into a single number with a known,
// fixed upstream gradient.
Var dot_loss(Tape& t, Var x, const Tensor& coef) {
  const Tensor& xv = t.value(x);
  REQUIRE(xv.numel() == coef.numel());
  double acc = 0.0;
  for (int64_t i = 0; i < xv.numel(); ++i) acc += double(xv[i]) * double(coef[i]);
  Tensor c = coef;
  return t.custom(Tensor::scalar(float(acc)), {x}, [c, x](Tape& tp, int32_t self) {
    const float g = tp.grad_buffer(self)[0];
    if (!tp.requires_grad(x)) return;
    Tensor& dx = tp.grad_buffer(x.id);
    for (int64_t i = 0; i < c.numel(); ++i) dx[i] += g * c[i];
  });
}

// Central finite differences of loss(theta) against the analytic gradient
// banked in each parameter, spot-checking a handful of coordinates.
void check_param_gradients(const std::vector<Parameter*>& params,
                           const std::function<double()>& loss, int probes_per_param,
                           double eps, double tol, Rng& pick) {
  for (Parameter* p : params) {
    for (int t = 0; t < probes_per_param; ++t) {
      const int64_t i = int64_t(pick.uniform_index(size_t(p->value.numel())));
      const float saved = p->value[i];
      p->value[i] = saved + float(eps);
      const double up = loss();
      p->value[i] = saved - float(eps);
      const double down = loss();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      INFO(p->name, " coordinate ", i);
      CHECK(std::abs(numeric - double(p->grad[i])) < tol);
    }
  }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
  Rng rng(31);
  Parameter x("x", ParamGroup::kBackbone, random_tensor({2, 2, 6, 5}, rng));
  Parameter w("w", ParamGroup::kBackbone, random_tensor({3, 2, 3, 3}, rng));
  const Tensor coef = random_tensor({2, 3, 3, 3}, rng);

  auto loss = [&] {
    Tape t;
    const Var y = t.conv2d(t.param(x), t.param(w), 2, 1);
    return double(t.value(dot_loss(t, y, coef))[0]);
  };

  Tape t;
  const Var y = t.conv2d(t.param(x), t.param(w), 2, 1);
  REQUIRE(t.value(y).shape() == std::vector<int64_t>{2, 3, 3, 3});
  t.backward(dot_loss(t, y, coef));

  Rng pick(32);
  check_param_gradients({&x, &w}, loss, 8, 1e-2, 2e-2, pick);
}

TEST_CASE("batchnorm training gradients match finite differences") {
  Rng rng(33);
  Parameter x("x", ParamGroup::kBackbone, random_tensor({3, 2, 4, 3}, rng));
  Parameter gamma("gamma", ParamGroup::kBackbone, random_tensor({2}, rng, 0.5));
  gamma.value[0] += 1.5f;
  gamma.value[1] += 1.5f;
  Parameter beta("beta", ParamGroup::kBackbone, random_tensor({2}, rng));
  const Tensor coef = random_tensor({3, 2, 4, 3}, rng);

  auto loss = [&] {
    Tape t;
    Tensor rm = Tensor::zeros({2}), rv = Tensor::full({2}, 1.0f);
    const Var y =
        t.batchnorm(t.param(x), t.param(gamma), t.param(beta), rm, rv, 0.1f, 1e-5f, true);
    return double(t.value(dot_loss(t, y, coef))[0]);
  };

  Tape t;
  Tensor rm = Tensor::zeros({2}), rv = Tensor::full({2}, 1.0f);
  const Var y = t.batchnorm(t.param(x), t.param(gamma), t.param(beta), rm, rv, 0.1f, 1e-5f, true);
  t.backward(dot_loss(t, y, coef));

  Rng pick(34);
  check_param_gradients({&x, &gamma, &beta}, loss, 6, 1e-2, 6e-2, pick);

  // Training mode moved the running stats off their initial values.
  CHECK(rm[0] != 0.0f);
  CHECK(rv[0] != 1.0f);
}

TEST_CASE("batchnorm eval normalizes with running stats and still differentiates") {
  Rng rng(35);
  Parameter x("x", ParamGroup::kBackbone, random_tensor({2, 1, 2, 2}, rng));
  Parameter gamma("gamma", ParamGroup::kBackbone, Tensor::full({1}, 2.0f));
  Parameter beta("beta", ParamGroup::kBackbone, Tensor::full({1}, 0.5f));
  Tensor rm = Tensor::full({1}, 0.25f), rv = Tensor::full({1}, 4.0f);
  const Tensor rm0 = rm, rv0 = rv;
  const Tensor coef = random_tensor({2, 1, 2, 2}, rng);

  auto loss = [&] {
    Tape t;
    Tensor m = rm0, v = rv0;
    const Var y = t.batchnorm(t.param(x), t.param(gamma), t.param(beta), m, v, 0.1f, 0.0f, false);
    return double(t.value(dot_loss(t, y, coef))[0]);
  };

  Tape t;
  const Var y = t.batchnorm(t.param(x), t.param(gamma), t.param(beta), rm, rv, 0.1f, 0.0f, false);
  // Eval applies the affine with frozen statistics.
  const Tensor& yv = t.value(y);
  for (int64_t i = 0; i < yv.numel(); ++i) {
    const double expect = (double(x.value[i]) - 0.25) / 2.0 * 2.0 + 0.5;
    CHECK(std::abs(double(yv[i]) - expect) < 1e-5);
  }
  // And leaves them untouched.
  CHECK(rm[0] == 0.25f);
  CHECK(rv[0] == 4.0f);

  t.backward(dot_loss(t, y, coef));
  Rng pick(36);
  check_param_gradients({&x, &gamma, &beta}, loss, 4, 1e-3, 1e-2, pick);
}

TEST_CASE("relu add maxpool and pooling gradients match finite differences") {
  Rng rng(37);
  // Keep x away from the relu kink and small enough that the ramp in z fixes
  // every pooling argmax; otherwise a probe can flip a near-tied window and
  // wreck the finite differences.
  Parameter x("x", ParamGroup::kBackbone, random_tensor({1, 2, 4, 4}, rng, 0.25));
  for (int64_t i = 0; i < x.value.numel(); ++i) {
    if (std::abs(x.value[i]) < 0.05f) x.value[i] = 0.1f;
  }
  Parameter z("z", ParamGroup::kBackbone, random_tensor({1, 2, 4, 4}, rng));
  for (int64_t i = 0; i < z.value.numel(); ++i) z.value[i] = 0.3f * float(i);
  const Tensor coef_pool = random_tensor({1, 2, 2, 2}, rng);
  const Tensor coef_gap = random_tensor({1, 2}, rng);

  auto loss_pool = [&] {
    Tape t;
    const Var h = t.add(t.relu(t.param(x)), t.param(z));
    const Var y = t.maxpool(h, 3, 2, 1);
    return double(t.value(dot_loss(t, y, coef_pool))[0]);
  };
  {
    Tape t;
    const Var h = t.add(t.relu(t.param(x)), t.param(z));
    const Var y = t.maxpool(h, 3, 2, 1);
    REQUIRE(t.value(y).shape() == std::vector<int64_t>{1, 2, 2, 2});
    t.backward(dot_loss(t, y, coef_pool));
    Rng pick(38);
    check_param_gradients({&x, &z}, loss_pool, 8, 1e-3, 1e-2, pick);
  }

  auto loss_gap = [&] {
    Tape t;
    const Var y = t.global_avg_pool(t.param(x));
    return double(t.value(dot_loss(t, y, coef_gap))[0]);
  };
  {
    Tape t;
    const Var y = t.global_avg_pool(t.param(x));
    REQUIRE(t.value(y).shape() == std::vector<int64_t>{1, 2});
    t.backward(dot_loss(t, y, coef_gap));
    Rng pick(39);
    check_param_gradients({&x}, loss_gap, 6, 1e-3, 1e-3, pick);
  }
}

TEST_CASE("linear concat and gather gradients match finite differences") {
  Rng rng(40);
  Parameter x("x", ParamGroup::kBackbone, random_tensor({3, 4}, rng));
  Parameter w("w", ParamGroup::kBackbone, random_tensor({2, 4}, rng));
  Parameter b("b", ParamGroup::kBackbone, random_tensor({2}, rng));
  Parameter x2("x2", ParamGroup::kBackbone, random_tensor({3, 2}, rng));
  const std::vector<int64_t> idx = {2, 0, 0};
  const Tensor coef = random_tensor({3, 4}, rng);

  auto loss = [&] {
    Tape t;
    const Var lin = t.linear(t.param(x), t.param(w), t.param(b));  // (3,2)
    const Var cat = t.concat_cols(lin, t.param(x2));               // (3,4)
    const Var out = t.gather_rows(cat, idx);                       // rows 2,0,0
    return double(t.value(dot_loss(t, out, coef))[0]);
  };

  Tape t;
  const Var lin = t.linear(t.param(x), t.param(w), t.param(b));
  const Var cat = t.concat_cols(lin, t.param(x2));
  const Var out = t.gather_rows(cat, idx);
  REQUIRE(t.value(out).shape() == std::vector<int64_t>{3, 4});
  // gather_rows really gathers: row 1 of out equals row 0 of cat.
  for (int64_t j = 0; j < 4; ++j) {
    CHECK(t.value(out)[1 * 4 + j] == t.value(cat)[0 * 4 + j]);
    CHECK(t.value(out)[2 * 4 + j] == t.value(cat)[0 * 4 + j]);
  }
  t.backward(dot_loss(t, out, coef));

  Rng pick(41);
  check_param_gradients({&x, &w, &b, &x2}, loss, 6, 1e-3, 2e-3, pick);
}

TEST_CASE("a node feeding two consumers accumulates both contributions") {
  Parameter x("x", ParamGroup::kBackbone, Tensor({2}, {0.5f, -0.25f}));
  Tape t;
  const Var h = t.param(x);
  const Var y = t.add(h, h);
  const Tensor coef({2}, {1.0f, 3.0f});
  t.backward(dot_loss(t, y, coef));
  CHECK(x.grad[0] == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(x.grad[1] == doctest::Approx(6.0).epsilon(1e-6));
}

TEST_CASE("gradients accumulate across backward passes until cleared") {
  Parameter x("x", ParamGroup::kBackbone, Tensor({2}, {1.0f, 2.0f}));
  const Tensor coef({2}, {1.0f, 1.0f});
  {
    Tape t;
    t.backward(dot_loss(t, t.param(x), coef));
  }
  {
    Tape t;
    t.backward(dot_loss(t, t.param(x), coef));
  }
  CHECK(x.grad[0] == 2.0f);
  x.zero_grad();
  CHECK(x.grad[0] == 0.0f);
}

TEST_CASE("clear_grads permits a clean second pass over the same tape") {
  Parameter x("x", ParamGroup::kBackbone, Tensor({2}, {1.0f, 2.0f}));
  const Tensor coef({2}, {1.0f, 1.0f});
  Tape t;
  const Var loss = dot_loss(t, t.param(x), coef);
  t.backward(loss);
  CHECK(x.grad[0] == 1.0f);
  t.clear_grads();
  t.backward(loss);
  // Two passes, each depositing exactly once.
  CHECK(x.grad[0] == 2.0f);
}

TEST_CASE("seed_scale scales the whole gradient") {
  Parameter x("x", ParamGroup::kBackbone, Tensor({2}, {1.0f, 2.0f}));
  const Tensor coef({2}, {1.0f, 4.0f});
  Tape t;
  BackwardOptions opts;
  opts.seed_scale = 0.5f;
  t.backward(dot_loss(t, t.param(x), coef), opts);
  CHECK(x.grad[0] == doctest::Approx(0.5));
  CHECK(x.grad[1] == doctest::Approx(2.0));
}

TEST_CASE("group_mask deposits only into the allowed groups") {
  Rng rng(42);
  Parameter a("a", ParamGroup::kBackbone, random_tensor({2}, rng));
  Parameter b("b", ParamGroup::kContentStream, random_tensor({2}, rng));

  Tape t;
  const Var sum = t.add(t.param(a), t.param(b));
  BackwardOptions opts;
  std::array<bool, kNumParamGroups> mask{};
  mask[int(ParamGroup::kContentStream)] = true;
  opts.group_mask = mask;
  t.backward(dot_loss(t, sum, Tensor({2}, {1.0f, 1.0f})), opts);

  CHECK(a.grad[0] == 0.0f);
  CHECK(a.grad[1] == 0.0f);
  CHECK(b.grad[0] == 1.0f);
  CHECK(b.grad[1] == 1.0f);
}

TEST_CASE("stop_at cuts propagation upstream of the barrier") {
  Parameter x("x", ParamGroup::kBackbone, Tensor({2}, {0.5f, 1.5f}));
  Parameter w("w", ParamGroup::kContentStream, Tensor({2}, {2.0f, 3.0f}));
  Tape t;
  const Var vx = t.param(x);
  const Var h = t.relu(vx);
  const Var vw = t.param(w);
  // loss = <w, h> so both would normally receive gradient.
  const Var prod = t.custom(
      Tensor::scalar(t.value(vw)[0] * t.value(h)[0] + t.value(vw)[1] * t.value(h)[1]), {vw, h},
      [vw, h](Tape& tp, int32_t self) {
        const float g = tp.grad_buffer(self)[0];
        const Tensor& wv = tp.value(vw);
        const Tensor& hv = tp.value(h);
        Tensor& dw = tp.grad_buffer(vw.id);
        Tensor& dh = tp.grad_buffer(h.id);
        for (int64_t i = 0; i < 2; ++i) {
          dw[i] += g * hv[i];
          dh[i] += g * wv[i];
        }
      });

  BackwardOptions opts;
  opts.stop_at = h;
  t.backward(prod, opts);

  CHECK(x.grad[0] == 0.0f);
  CHECK(x.grad[1] == 0.0f);
  CHECK(w.grad[0] == 0.5f);
  CHECK(w.grad[1] == 1.5f);
}

TEST_CASE("model forward obeys the spatial reduction schedule") {
  const ModelConfig cfg = scaled_model_config(3);
  DetectorModel model(cfg, 123);

  Tape t;
  const auto out = model.forward(t, Tensor({2, 1, 257, 33}), false);
  // 257 -> stem 129 -> pool 65 -> stage2 33 -> stage3 17 (the shared map).
  const Tensor& fh = t.value(out.f_h);
  REQUIRE(fh.rank() == 4);
  CHECK(fh.dim(0) == 2);
  CHECK(fh.dim(1) == cfg.stage_channels[2]);
  CHECK(fh.dim(2) == 17);
  CHECK(fh.dim(3) == 3);

  const int64_t n = cfg.feature_dim();
  CHECK(t.value(out.f_s).shape() == std::vector<int64_t>{2, n});
  CHECK(t.value(out.f_c).shape() == std::vector<int64_t>{2, n});
  CHECK(t.value(out.logits_synth).shape() == std::vector<int64_t>{2, 3});
  CHECK(t.value(out.logits_comp).shape() == std::vector<int64_t>{2, 10});
  CHECK(t.value(out.logits_speed).shape() == std::vector<int64_t>{2, 16});
  CHECK(t.value(out.f_cls).shape() == std::vector<int64_t>{2, 2 * n});
  CHECK(t.value(out.logit_final).shape() == std::vector<int64_t>{2, 1});
  CHECK(all_finite(t.value(out.logit_final)));
}

TEST_CASE("parameters carry the expected group structure") {
  DetectorModel model(scaled_model_config(3), 7);
  const auto& params = model.parameters();
  CHECK(params.size() > 20);

  std::array<int64_t, kNumParamGroups> counts{};
  std::set<std::string> names;
  for (const Parameter* p : params) {
    ++counts[size_t(p->group)];
    CHECK(names.insert(p->name).second);  // unique names
    CHECK(p->value.numel() > 0);
    CHECK(p->grad.same_shape(p->value));
  }
  for (int64_t c : counts) CHECK(c > 0);

  // The two stream stages mirror each other parameter for parameter.
  CHECK(counts[size_t(ParamGroup::kSynthStream)] ==
        counts[size_t(ParamGroup::kContentStream)]);
  // Three content-side head tensors vs one synth head pair plus biases.
  CHECK(counts[size_t(ParamGroup::kSynthHead)] == 2);
  CHECK(counts[size_t(ParamGroup::kContentHeads)] == 4);
  CHECK(counts[size_t(ParamGroup::kFinalHead)] == 2);
}

TEST_CASE("identical seeds build identical models") {
  DetectorModel a(scaled_model_config(3), 99);
  DetectorModel b(scaled_model_config(3), 99);
  DetectorModel c(scaled_model_config(3), 100);
  const auto& pa = a.parameters();
  const auto& pb = b.parameters();
  const auto& pc = c.parameters();
  REQUIRE(pa.size() == pb.size());
  bool any_diff_seed = false;
  for (size_t i = 0; i < pa.size(); ++i) {
    REQUIRE(pa[i]->value.numel() == pb[i]->value.numel());
    for (int64_t j = 0; j < pa[i]->value.numel(); ++j) {
      CHECK(pa[i]->value[j] == pb[i]->value[j]);
      if (pa[i]->value[j] != pc[i]->value[j]) any_diff_seed = true;
    }
  }
  CHECK(any_diff_seed);
}

TEST_CASE("grad_norm reports per-group energy") {
  DetectorModel model(scaled_model_config(3), 1);
  model.zero_grad();
  for (int g = 0; g < kNumParamGroups; ++g) {
    CHECK(model.grad_norm(ParamGroup(g)) == 0.0);
  }
  // Plant a known gradient in one group.
  for (Parameter* p : model.parameters()) {
    if (p->group == ParamGroup::kFinalHead) {
      p->grad.fill(2.0f);
    }
  }
  int64_t n_final = 0;
  for (Parameter* p : model.parameters()) {
    if (p->group == ParamGroup::kFinalHead) n_final += p->value.numel();
  }
  CHECK(model.grad_norm(ParamGroup::kFinalHead) ==
        doctest::Approx(2.0 * std::sqrt(double(n_final))).epsilon(1e-6));
  CHECK(model.grad_norm(ParamGroup::kBackbone) == 0.0);
}

TEST_CASE("training forward then backward leaves every group with gradient") {
  DetectorModel model(scaled_model_config(3), 5);
  Rng rng(43);
  Tensor input = random_tensor({2, 1, 64, 33}, rng, 2.0);

  Tape t;
  const auto out = model.forward(t, input, true);
  // Push gradient through every head at once.
  const Tensor c1 = random_tensor({2, 3}, rng);
  const Tensor c2 = random_tensor({2, 10}, rng);
  const Tensor c3 = random_tensor({2, 16}, rng);
  const Tensor c4 = random_tensor({2, 1}, rng);
  const Var l1 = dot_loss(t, out.logits_synth, c1);
  const Var l2 = dot_loss(t, out.logits_comp, c2);
  const Var l3 = dot_loss(t, out.logits_speed, c3);
  const Var l4 = dot_loss(t, out.logit_final, c4);
  const Var total = t.add(t.add(l1, l2), t.add(l3, l4));

  model.zero_grad();
  t.backward(total);
  for (int g = 0; g < kNumParamGroups; ++g) {
    INFO("group ", param_group_name(ParamGroup(g)));
    CHECK(model.grad_norm(ParamGroup(g)) > 0.0);
  }
}
