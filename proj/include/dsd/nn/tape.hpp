#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dsd/core/tensor.hpp"
#include "dsd/nn/param.hpp"

namespace dsd::nn {

/// Handle to a node on the tape.
struct Var {
  int32_t id = -1;
  bool valid() const { return id >= 0; }
};

// Controls one backward pass. seed_scale seeds dL/droot; group_mask (when
// set) lets only the listed parameter groups receive gradient; stop_at treats
// a variable as constant so nothing upstream of it is touched. These two
// switches are how the adversarial term trains the content stream alone: grads
// flow through the reused synthesizer head into the content stage but are
// deposited only there, and the walk never enters the backbone.
struct BackwardOptions {
  float seed_scale = 1.0f;
  std::optional<std::array<bool, kNumParamGroups>> group_mask;
  Var stop_at{};
};

// Define-by-run reverse-mode autodiff over float tensors. A fresh graph is
// built each step; parameters re-register as leaves and their gradients
// accumulate across any number of backward passes until the optimizer clears
// them.
class Tape {
 public:
  struct Node {
    Tensor value;
    Tensor grad;  // allocated on first touch during backward
    bool requires_grad = false;
    Parameter* param = nullptr;
    std::vector<int32_t> parents;
    std::function<void(Tape&, int32_t)> backward_fn;
  };

  /// Constant input (no gradient tracking).
  Var constant(Tensor value);
  /// Leaf bound to a parameter; one parameter may be bound once per tape.
  Var param(Parameter& p);

  // Structural ops. Weight tensors enter as Vars (usually param leaves) so
  // every op reads one uniform node kind.
  Var conv2d(Var x, Var w, int64_t stride, int64_t pad);
  Var batchnorm(Var x, Var gamma, Var beta, Tensor& running_mean, Tensor& running_var,
                float momentum, float eps, bool training);
  Var relu(Var x);
  Var add(Var a, Var b);
  Var maxpool(Var x, int64_t kernel, int64_t stride, int64_t pad);
  Var global_avg_pool(Var x);
  /// x:(B,N) w:(O,N) b:(O) -> (B,O)
  Var linear(Var x, Var w, Var b);
  /// (B,Na) ++ (B,Nb) -> (B,Na+Nb)
  Var concat_cols(Var a, Var b);
  /// out[k] = x[indices[k]]; backward scatter-adds.
  Var gather_rows(Var x, std::vector<int64_t> indices);

  /// Generic node for custom ops (losses, augmentation).
  Var custom(Tensor value, std::vector<Var> parents,
             std::function<void(Tape&, int32_t)> backward_fn);

  void backward(Var root, const BackwardOptions& opts = {});

  const Tensor& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].value; }
  /// Gradient buffer of a node, allocated zero on first access.
  Tensor& grad_buffer(int32_t id);
  /// Null when the node never received gradient.
  const Tensor* grad_if_any(Var v) const;
  bool requires_grad(Var v) const { return nodes_[static_cast<size_t>(v.id)].requires_grad; }

  size_t size() const { return nodes_.size(); }
  // Releases every node gradient buffer while keeping values. Required
  // between two backward passes over the same graph: buffers are additive, so
  // a second pass would otherwise re-deposit what the first already banked
  // into the parameters.
  void clear_grads();
  void clear();

 private:
  friend struct TapeTestPeek;
  int32_t push(Node node);
  std::vector<Node> nodes_;
};

}  // namespace dsd::nn
