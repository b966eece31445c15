#include "dsd/train/optimizer.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace dsd::train {

AdamW::AdamW(std::vector<nn::Parameter*> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {}

void AdamW::step() {
  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_count_));
  for (nn::Parameter* p : params_) {
    if (p->adam_m.numel() != p->value.numel()) {
      p->adam_m = Tensor::zeros(p->value.shape());
      p->adam_v = Tensor::zeros(p->value.shape());
    }
    const int64_t n = p->value.numel();
    bool finite = true;
    for (int64_t i = 0; i < n; ++i) {
      const double theta = static_cast<double>(p->value[i]);
      double g = static_cast<double>(p->grad[i]);
      if (!config_.decoupled_decay) g += config_.weight_decay * theta;
      const double m = config_.beta1 * static_cast<double>(p->adam_m[i]) +
                       (1.0 - config_.beta1) * g;
      const double v = config_.beta2 * static_cast<double>(p->adam_v[i]) +
                       (1.0 - config_.beta2) * g * g;
      p->adam_m[i] = static_cast<float>(m);
      p->adam_v[i] = static_cast<float>(v);
      double update = config_.lr * (m / bc1) / (std::sqrt(v / bc2) + config_.eps);
      if (config_.decoupled_decay) update += config_.lr * config_.weight_decay * theta;
      const float next = static_cast<float>(theta - update);
      p->value[i] = next;
      finite = finite && std::isfinite(next);
    }
    if (!finite) {
      // A poisoned weight can otherwise hide: relu turns NaN activations
      // into zeros and the loss stays plausible while the model rots.
      throw std::runtime_error("optim: non-finite value in parameter '" + p->name + "'");
    }
    p->zero_grad();
  }
}

}  // namespace dsd::train
