#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dsd/core/rng.hpp"
#include "dsd/nn/tape.hpp"

namespace dsd::nn {

// Layers own their Parameters (stable addresses; layers are held by
// unique_ptr or by value inside a non-copied model). Construction takes an
// rng derived from the parameter name, so initialization does not depend on
// build order.

struct Conv2dLayer {
  Parameter weight;
  int64_t stride;
  int64_t pad;

  Conv2dLayer(const std::string& name, ParamGroup group, int64_t in_c, int64_t out_c,
              int64_t kernel, int64_t stride, int64_t pad, const Rng& init);

  Var operator()(Tape& t, Var x) { return t.conv2d(x, t.param(weight), stride, pad); }
};

struct BatchNorm2dLayer {
  Parameter gamma;
  Parameter beta;
  Tensor running_mean;
  Tensor running_var;
  float momentum = 0.1f;
  float eps = 1e-5f;

  BatchNorm2dLayer(const std::string& name, ParamGroup group, int64_t channels);

  Var operator()(Tape& t, Var x, bool training) {
    return t.batchnorm(x, t.param(gamma), t.param(beta), running_mean, running_var, momentum, eps,
                       training);
  }
};

struct LinearLayer {
  Parameter weight;
  Parameter bias;

  LinearLayer(const std::string& name, ParamGroup group, int64_t in_dim, int64_t out_dim,
              const Rng& init);

  Var operator()(Tape& t, Var x) { return t.linear(x, t.param(weight), t.param(bias)); }
};

/// Two 3x3 convolutions with identity (or 1x1 downsample) shortcut.
struct BasicBlock {
  Conv2dLayer conv1;
  BatchNorm2dLayer bn1;
  Conv2dLayer conv2;
  BatchNorm2dLayer bn2;
  std::unique_ptr<Conv2dLayer> down_conv;
  std::unique_ptr<BatchNorm2dLayer> down_bn;

  BasicBlock(const std::string& name, ParamGroup group, int64_t in_c, int64_t out_c,
             int64_t stride, const Rng& init);

  Var operator()(Tape& t, Var x, bool training);
  void collect(std::vector<Parameter*>& params, std::vector<std::pair<std::string, Tensor*>>& bufs,
               const std::string& prefix);
};

/// Residual stage: one stride-s block then one stride-1 block.
struct ResStage {
  BasicBlock block1;
  BasicBlock block2;

  ResStage(const std::string& name, ParamGroup group, int64_t in_c, int64_t out_c, int64_t stride,
           const Rng& init);

  Var operator()(Tape& t, Var x, bool training) {
    return block2(t, block1(t, x, training), training);
  }
  void collect(std::vector<Parameter*>& params, std::vector<std::pair<std::string, Tensor*>>& bufs,
               const std::string& prefix);
};

}  // namespace dsd::nn
