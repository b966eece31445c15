#pragma once

#include <array>
#include <string>

#include "dsd/core/tensor.hpp"

namespace dsd::nn {

// Every trainable tensor belongs to exactly one group. The groups exist so a
// backward pass can restrict which parts of the network a loss term updates,
// and so tests can assert where gradients land.
enum class ParamGroup {
  kBackbone = 0,
  kSynthStream,
  kSynthHead,
  kContentStream,
  kContentHeads,
  kFinalHead,
};

inline constexpr int kNumParamGroups = 6;

const char* param_group_name(ParamGroup g);

/// Trainable tensor with its persistent gradient accumulator and optimizer
/// slots (allocated by the optimizer on first use).
struct Parameter {
  std::string name;
  ParamGroup group;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;

  Parameter(std::string n, ParamGroup g, Tensor v)
      : name(std::move(n)), group(g), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() { grad.zero(); }
};

}  // namespace dsd::nn
