#pragma once

#include <cstdint>
#include <vector>

#include "dsd/nn/param.hpp"

namespace dsd::train {

struct AdamConfig {
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Decoupled decay shrinks weights directly by lr*wd; the coupled variant
  // folds wd*theta into the gradient before the moment updates instead.
  bool decoupled_decay = true;
};

// Adam over a fixed parameter list. Moment buffers live on the parameters
// themselves (so checkpoints can carry them); they are allocated on the first
// step. step() consumes and clears the accumulated gradients.
class AdamW {
 public:
  AdamW(std::vector<nn::Parameter*> params, AdamConfig config);

  void step();

  int64_t step_count() const { return step_count_; }
  /// For resuming: restores the bias-correction clock.
  void set_step_count(int64_t t) { step_count_ = t; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<nn::Parameter*> params_;
  AdamConfig config_;
  int64_t step_count_ = 0;
};

}  // namespace dsd::train
