#include "dsd/nn/tape.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "dsd/kernels/batchnorm.hpp"
#include "dsd/kernels/conv.hpp"
#include "dsd/kernels/gemm.hpp"
#include "dsd/kernels/pool.hpp"

namespace dsd::nn {

namespace {

void add_into(Tensor& dst, const std::vector<float>& src) {
  float* d = dst.data();
  for (size_t i = 0; i < src.size(); ++i) d[i] += src[i];
}

}  // namespace

int32_t Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<int32_t>(nodes_.size() - 1);
}

void Tape::clear() { nodes_.clear(); }

void Tape::clear_grads() {
  for (Node& n : nodes_) n.grad = Tensor();
}

Tensor& Tape::grad_buffer(int32_t id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.numel() == 0 && n.value.numel() != 0) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

const Tensor* Tape::grad_if_any(Var v) const {
  const Node& n = nodes_[static_cast<size_t>(v.id)];
  return n.grad.numel() ? &n.grad : nullptr;
}

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return {push(std::move(n))};
}

Var Tape::param(Parameter& p) {
  Node n;
  n.value = p.value;
  n.requires_grad = true;
  n.param = &p;
  return {push(std::move(n))};
}

Var Tape::custom(Tensor value, std::vector<Var> parents,
                 std::function<void(Tape&, int32_t)> backward_fn) {
  Node n;
  n.value = std::move(value);
  for (const Var p : parents) {
    n.parents.push_back(p.id);
    if (nodes_[static_cast<size_t>(p.id)].requires_grad) n.requires_grad = true;
  }
  if (n.requires_grad) n.backward_fn = std::move(backward_fn);
  return {push(std::move(n))};
}

Var Tape::conv2d(Var x, Var w, int64_t stride, int64_t pad) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  if (xv.rank() != 4 || wv.rank() != 4) throw std::invalid_argument("conv2d: rank mismatch");
  const int64_t b = xv.dim(0), c = xv.dim(1), h = xv.dim(2), wd = xv.dim(3);
  const int64_t oc = wv.dim(0), kernel = wv.dim(2);
  if (wv.dim(1) != c || wv.dim(3) != kernel) throw std::invalid_argument("conv2d: weight shape");
  const int64_t oh = kernels::conv_out_extent(h, kernel, stride, pad);
  const int64_t ow = kernels::conv_out_extent(wd, kernel, stride, pad);
  Tensor y({b, oc, oh, ow});
  kernels::conv2d_forward(xv.data(), b, c, h, wd, wv.data(), oc, kernel, stride, pad, y.data());

  return custom(std::move(y), {x, w}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    const Tensor& xval = t.value(x);
    const Tensor& wval = t.value(w);
    const bool need_dx = t.requires_grad(x);
    const bool need_dw = t.requires_grad(w);
    std::vector<float> dx_scratch;
    float* dxp = nullptr;
    if (need_dx) {
      dx_scratch.assign(static_cast<size_t>(xval.numel()), 0.0f);
      dxp = dx_scratch.data();
    }
    float* dwp = need_dw ? t.grad_buffer(w.id).data() : nullptr;
    kernels::conv2d_backward(xval.data(), dy.data(), wval.data(), b, c, h, wd, oc, kernel, stride,
                             pad, dxp, dwp);
    if (need_dx) add_into(t.grad_buffer(x.id), dx_scratch);
  });
}

Var Tape::batchnorm(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
                    float momentum, float eps, bool training) {
  const Tensor& xv = value(x);
  if (xv.rank() != 4) throw std::invalid_argument("batchnorm: rank");
  const int64_t b = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor y(xv.shape());

  if (training) {
    auto save_mean = std::make_shared<std::vector<float>>(static_cast<size_t>(c));
    auto save_invstd = std::make_shared<std::vector<float>>(static_cast<size_t>(c));
    kernels::batchnorm_forward_train(xv.data(), b, c, h, w, value(gamma).data(),
                                     value(beta).data(), eps, momentum, running_mean.data(),
                                     running_var.data(), y.data(), save_mean->data(),
                                     save_invstd->data());
    return custom(std::move(y), {x, gamma, beta}, [=](Tape& t, int32_t self) {
      const Tensor& dy = t.grad_buffer(self);
      const Tensor& xval = t.value(x);
      std::vector<float> dx_scratch(static_cast<size_t>(xval.numel()), 0.0f);
      kernels::batchnorm_backward(xval.data(), dy.data(), b, c, h, w, t.value(gamma).data(),
                                  save_mean->data(), save_invstd->data(), dx_scratch.data(),
                                  t.grad_buffer(gamma.id).data(), t.grad_buffer(beta.id).data());
      if (t.requires_grad(x)) add_into(t.grad_buffer(x.id), dx_scratch);
    });
  }

  kernels::batchnorm_forward_eval(xv.data(), b, c, h, w, value(gamma).data(), value(beta).data(),
                                  running_mean.data(), running_var.data(), eps, y.data());
  // Inference-mode normalization is a per-channel affine map with constants
  // taken from the running statistics.
  auto scale = std::make_shared<std::vector<float>>(static_cast<size_t>(c));
  auto rmean = std::make_shared<std::vector<float>>(static_cast<size_t>(c));
  auto rinvstd = std::make_shared<std::vector<float>>(static_cast<size_t>(c));
  for (int64_t ch = 0; ch < c; ++ch) {
    const float invstd = 1.0f / std::sqrt(running_var[ch] + eps);
    (*rinvstd)[static_cast<size_t>(ch)] = invstd;
    (*rmean)[static_cast<size_t>(ch)] = running_mean[ch];
    (*scale)[static_cast<size_t>(ch)] = value(gamma)[ch] * invstd;
  }
  return custom(std::move(y), {x, gamma, beta}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    const Tensor& xval = t.value(x);
    const int64_t plane = h * w;
    Tensor& dgamma = t.grad_buffer(gamma.id);
    Tensor& dbeta = t.grad_buffer(beta.id);
    Tensor* dx = t.requires_grad(x) ? &t.grad_buffer(x.id) : nullptr;
    for (int64_t s = 0; s < b; ++s) {
      for (int64_t ch = 0; ch < c; ++ch) {
        const float* gp = dy.data() + (s * c + ch) * plane;
        const float* xp = xval.data() + (s * c + ch) * plane;
        const float sc = (*scale)[static_cast<size_t>(ch)];
        const float mu = (*rmean)[static_cast<size_t>(ch)];
        const float is = (*rinvstd)[static_cast<size_t>(ch)];
        double sg = 0.0, sgx = 0.0;
        for (int64_t i = 0; i < plane; ++i) {
          sg += gp[i];
          sgx += gp[i] * (xp[i] - mu) * is;
        }
        dbeta[ch] += static_cast<float>(sg);
        dgamma[ch] += static_cast<float>(sgx);
        if (dx) {
          float* dxp = dx->data() + (s * c + ch) * plane;
          for (int64_t i = 0; i < plane; ++i) dxp[i] += sc * gp[i];
        }
      }
    }
  });
}

Var Tape::relu(Var x) {
  const Tensor& xv = value(x);
  Tensor y(xv.shape());
  const float* xp = xv.data();
  float* yp = y.data();
  for (int64_t i = 0; i < xv.numel(); ++i) yp[i] = xp[i] > 0.0f ? xp[i] : 0.0f;
  return custom(std::move(y), {x}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    const Tensor& xval = t.value(x);
    Tensor& dx = t.grad_buffer(x.id);
    for (int64_t i = 0; i < xval.numel(); ++i) {
      if (xval[i] > 0.0f) dx[i] += dy[i];
    }
  });
}

Var Tape::add(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
  Tensor y(av.shape());
  for (int64_t i = 0; i < av.numel(); ++i) y[i] = av[i] + bv[i];
  return custom(std::move(y), {a, b}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    if (t.requires_grad(a)) {
      Tensor& da = t.grad_buffer(a.id);
      for (int64_t i = 0; i < dy.numel(); ++i) da[i] += dy[i];
    }
    if (t.requires_grad(b)) {
      Tensor& db = t.grad_buffer(b.id);
      for (int64_t i = 0; i < dy.numel(); ++i) db[i] += dy[i];
    }
  });
}

Var Tape::maxpool(Var x, int64_t kernel, int64_t stride, int64_t pad) {
  const Tensor& xv = value(x);
  const int64_t b = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  const int64_t oh = kernels::conv_out_extent(h, kernel, stride, pad);
  const int64_t ow = kernels::conv_out_extent(w, kernel, stride, pad);
  Tensor y({b, c, oh, ow});
  auto argmax = std::make_shared<std::vector<int32_t>>(static_cast<size_t>(b * c * oh * ow));
  kernels::maxpool2d_forward(xv.data(), b, c, h, w, kernel, stride, pad, y.data(), argmax->data());
  return custom(std::move(y), {x}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    Tensor& dx = t.grad_buffer(x.id);
    const int64_t planes = b * c;
    for (int64_t pl = 0; pl < planes; ++pl) {
      const float* dyp = dy.data() + pl * oh * ow;
      const int32_t* ap = argmax->data() + pl * oh * ow;
      float* dxp = dx.data() + pl * h * w;
      for (int64_t o = 0; o < oh * ow; ++o) dxp[ap[o]] += dyp[o];
    }
  });
}

Var Tape::global_avg_pool(Var x) {
  const Tensor& xv = value(x);
  const int64_t b = xv.dim(0), c = xv.dim(1), h = xv.dim(2), w = xv.dim(3);
  Tensor y({b, c});
  kernels::global_avg_pool_forward(xv.data(), b, c, h, w, y.data());
  return custom(std::move(y), {x}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    Tensor& dx = t.grad_buffer(x.id);
    const float inv = 1.0f / static_cast<float>(h * w);
    for (int64_t pl = 0; pl < b * c; ++pl) {
      const float g = dy[pl] * inv;
      float* dxp = dx.data() + pl * h * w;
      for (int64_t i = 0; i < h * w; ++i) dxp[i] += g;
    }
  });
}

Var Tape::linear(Var x, Var w, Var b) {
  const Tensor& xv = value(x);
  const Tensor& wv = value(w);
  const Tensor& bv = value(b);
  const int64_t bs = xv.dim(0), n = xv.dim(1), o = wv.dim(0);
  if (wv.dim(1) != n || bv.numel() != o) throw std::invalid_argument("linear: shape mismatch");
  Tensor y({bs, o});
  kernels::gemm_nt(bs, o, n, xv.data(), wv.data(), y.data());
  for (int64_t r = 0; r < bs; ++r) {
    float* yp = y.data() + r * o;
    for (int64_t j = 0; j < o; ++j) yp[j] += bv[j];
  }
  return custom(std::move(y), {x, w, b}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    if (t.requires_grad(x)) {
      kernels::gemm_nn(bs, n, o, dy.data(), t.value(w).data(), t.grad_buffer(x.id).data(), true);
    }
    if (t.requires_grad(w)) {
      kernels::gemm_tn(o, n, bs, dy.data(), t.value(x).data(), t.grad_buffer(w.id).data(), true);
    }
    if (t.requires_grad(b)) {
      Tensor& db = t.grad_buffer(b.id);
      for (int64_t r = 0; r < bs; ++r) {
        const float* gp = dy.data() + r * o;
        for (int64_t j = 0; j < o; ++j) db[j] += gp[j];
      }
    }
  });
}

Var Tape::concat_cols(Var a, Var b) {
  const Tensor& av = value(a);
  const Tensor& bv = value(b);
  const int64_t bs = av.dim(0), na = av.dim(1), nb = bv.dim(1);
  if (bv.dim(0) != bs) throw std::invalid_argument("concat_cols: batch mismatch");
  Tensor y({bs, na + nb});
  for (int64_t r = 0; r < bs; ++r) {
    float* yp = y.data() + r * (na + nb);
    const float* ap = av.data() + r * na;
    const float* bp = bv.data() + r * nb;
    for (int64_t j = 0; j < na; ++j) yp[j] = ap[j];
    for (int64_t j = 0; j < nb; ++j) yp[na + j] = bp[j];
  }
  return custom(std::move(y), {a, b}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    if (t.requires_grad(a)) {
      Tensor& da = t.grad_buffer(a.id);
      for (int64_t r = 0; r < bs; ++r) {
        const float* gp = dy.data() + r * (na + nb);
        float* dp = da.data() + r * na;
        for (int64_t j = 0; j < na; ++j) dp[j] += gp[j];
      }
    }
    if (t.requires_grad(b)) {
      Tensor& db = t.grad_buffer(b.id);
      for (int64_t r = 0; r < bs; ++r) {
        const float* gp = dy.data() + r * (na + nb) + na;
        float* dp = db.data() + r * nb;
        for (int64_t j = 0; j < nb; ++j) dp[j] += gp[j];
      }
    }
  });
}

Var Tape::gather_rows(Var x, std::vector<int64_t> indices) {
  const Tensor& xv = value(x);
  const int64_t n = xv.dim(1);
  Tensor y({static_cast<int64_t>(indices.size()), n});
  for (size_t k = 0; k < indices.size(); ++k) {
    const float* src = xv.data() + indices[k] * n;
    float* dst = y.data() + static_cast<int64_t>(k) * n;
    for (int64_t j = 0; j < n; ++j) dst[j] = src[j];
  }
  auto idx = std::make_shared<std::vector<int64_t>>(std::move(indices));
  return custom(std::move(y), {x}, [=](Tape& t, int32_t self) {
    const Tensor& dy = t.grad_buffer(self);
    Tensor& dx = t.grad_buffer(x.id);
    for (size_t k = 0; k < idx->size(); ++k) {
      const float* gp = dy.data() + static_cast<int64_t>(k) * n;
      float* dp = dx.data() + (*idx)[k] * n;
      for (int64_t j = 0; j < n; ++j) dp[j] += gp[j];
    }
  });
}

void Tape::backward(Var root, const BackwardOptions& opts) {
  if (!root.valid()) throw std::invalid_argument("backward: invalid root");
  std::vector<char> active(nodes_.size(), 0);
  std::vector<int32_t> stack = {root.id};
  while (!stack.empty()) {
    const int32_t id = stack.back();
    stack.pop_back();
    Node& n = nodes_[static_cast<size_t>(id)];
    if (active[static_cast<size_t>(id)] || !n.requires_grad) continue;
    active[static_cast<size_t>(id)] = 1;
    if (opts.stop_at.valid() && id == opts.stop_at.id) continue;
    for (const int32_t p : n.parents) stack.push_back(p);
  }
  if (!active[static_cast<size_t>(root.id)]) return;  // root does not require grad

  grad_buffer(root.id).fill(opts.seed_scale);
  for (int32_t id = root.id; id >= 0; --id) {
    if (!active[static_cast<size_t>(id)]) continue;
    if (opts.stop_at.valid() && id == opts.stop_at.id) continue;
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.numel() == 0) continue;  // no gradient ever reached this node
    if (n.backward_fn) n.backward_fn(*this, id);
  }

  for (size_t id = 0; id < nodes_.size(); ++id) {
    Node& n = nodes_[id];
    if (!active[id] || n.param == nullptr || n.grad.numel() == 0) continue;
    if (opts.group_mask && !(*opts.group_mask)[static_cast<int>(n.param->group)]) continue;
    float* dst = n.param->grad.data();
    const float* src = n.grad.data();
    for (int64_t i = 0; i < n.grad.numel(); ++i) dst[i] += src[i];
  }
}

}  // namespace dsd::nn
