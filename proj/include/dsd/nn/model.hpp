#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dsd/nn/layers.hpp"

namespace dsd::nn {

struct ModelConfig {
  // Channel widths of the four convolutional stages; the last one is the
  // feature dimension of both streams.
  std::array<int64_t, 4> stage_channels = {64, 128, 256, 512};
  int64_t n_synth_classes = 7;  // vocab size including "real"
  int64_t n_compression = 10;
  int64_t n_speed = 16;

  int64_t feature_dim() const { return stage_channels[3]; }
  void validate() const;
};

/// Small configuration for fast tests; same topology, narrower stages.
ModelConfig scaled_model_config(int64_t n_synth_classes = 3);

// Dual-stream detector: a shared convolutional backbone (stem plus three
// residual stages), then two structurally identical fourth stages with
// independent parameters. The synthesizer stage ends in a synthesizer-id
// head; the content stage ends in compression and speed heads; the final head
// scores the concatenation of both pooled features.
class DetectorModel {
 public:
  DetectorModel(ModelConfig config, uint64_t init_seed);

  DetectorModel(const DetectorModel&) = delete;
  DetectorModel& operator=(const DetectorModel&) = delete;

  struct GraphOutputs {
    Var f_h;            // backbone feature map
    Var f_s;            // pooled synthesizer feature (B, N)
    Var f_c;            // pooled content feature (B, N)
    Var logits_synth;   // (B, n_synth_classes)
    Var logits_comp;    // (B, n_compression)
    Var logits_speed;   // (B, n_speed)
    Var f_cls;          // (B, 2N) concat(f_c, f_s)
    Var logit_final;    // (B, 1)
  };

  /// Builds the full forward graph on the tape for a (B,1,H,W) input batch.
  GraphOutputs forward(Tape& t, const Tensor& input, bool training);

  /// The synthesizer head applied to an arbitrary (B, N) feature (the
  /// adversarial path reuses it on content features).
  Var synth_head_on(Tape& t, Var feature) { return synth_head_(t, feature); }

  /// Final head applied to an arbitrary (B, 2N) fused feature.
  Var final_head_on(Tape& t, Var fused) { return final_head_(t, fused); }

  /// Stable-order parameter list (construction order).
  const std::vector<Parameter*>& parameters() { return params_; }
  /// Non-trainable state (batchnorm running statistics), stable order.
  const std::vector<std::pair<std::string, Tensor*>>& buffers() { return buffers_; }

  const ModelConfig& config() const { return config_; }

  void zero_grad();
  /// L2 norm of the accumulated gradient of one parameter group.
  double grad_norm(ParamGroup group) const;

 private:
  ModelConfig config_;

  Conv2dLayer stem_conv_;
  BatchNorm2dLayer stem_bn_;
  ResStage stage1_;
  ResStage stage2_;
  ResStage stage3_;
  ResStage synth_stage_;
  ResStage content_stage_;
  LinearLayer synth_head_;
  LinearLayer comp_head_;
  LinearLayer speed_head_;
  LinearLayer final_head_;

  std::vector<Parameter*> params_;
  std::vector<std::pair<std::string, Tensor*>> buffers_;
};

}  // namespace dsd::nn
