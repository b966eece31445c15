#include "dsd/nn/model.hpp"

#include <cmath>
#include <stdexcept>

namespace dsd::nn {

void ModelConfig::validate() const {
  for (const int64_t c : stage_channels) {
    if (c <= 0) throw std::invalid_argument("model: non-positive stage width");
  }
  if (n_synth_classes < 2) throw std::invalid_argument("model: need at least 2 synth classes");
  if (n_compression < 1 || n_speed < 1) throw std::invalid_argument("model: empty label grid");
}

ModelConfig scaled_model_config(int64_t n_synth_classes) {
  ModelConfig cfg;
  cfg.stage_channels = {16, 32, 64, 128};
  cfg.n_synth_classes = n_synth_classes;
  return cfg;
}

namespace {
Rng init_rng(uint64_t seed) { return Rng(seed).derive("model_init"); }
}  // namespace

DetectorModel::DetectorModel(ModelConfig config, uint64_t init_seed)
    : config_(config),
      stem_conv_("stem", ParamGroup::kBackbone, 1, config.stage_channels[0], 7, 2, 3,
                 init_rng(init_seed)),
      stem_bn_("stem_bn", ParamGroup::kBackbone, config.stage_channels[0]),
      stage1_("stage1", ParamGroup::kBackbone, config.stage_channels[0], config.stage_channels[0],
              1, init_rng(init_seed)),
      stage2_("stage2", ParamGroup::kBackbone, config.stage_channels[0], config.stage_channels[1],
              2, init_rng(init_seed)),
      stage3_("stage3", ParamGroup::kBackbone, config.stage_channels[1], config.stage_channels[2],
              2, init_rng(init_seed)),
      synth_stage_("synth_stage", ParamGroup::kSynthStream, config.stage_channels[2],
                   config.stage_channels[3], 2, init_rng(init_seed)),
      content_stage_("content_stage", ParamGroup::kContentStream, config.stage_channels[2],
                     config.stage_channels[3], 2, init_rng(init_seed)),
      synth_head_("synth_head", ParamGroup::kSynthHead, config.feature_dim(),
                  config.n_synth_classes, init_rng(init_seed)),
      comp_head_("comp_head", ParamGroup::kContentHeads, config.feature_dim(), config.n_compression,
                 init_rng(init_seed)),
      speed_head_("speed_head", ParamGroup::kContentHeads, config.feature_dim(), config.n_speed,
                  init_rng(init_seed)),
      final_head_("final_head", ParamGroup::kFinalHead, 2 * config.feature_dim(), 1,
                  init_rng(init_seed)) {
  config_.validate();

  params_.push_back(&stem_conv_.weight);
  params_.push_back(&stem_bn_.gamma);
  params_.push_back(&stem_bn_.beta);
  buffers_.push_back({"stem_bn.running_mean", &stem_bn_.running_mean});
  buffers_.push_back({"stem_bn.running_var", &stem_bn_.running_var});
  stage1_.collect(params_, buffers_, "stage1");
  stage2_.collect(params_, buffers_, "stage2");
  stage3_.collect(params_, buffers_, "stage3");
  synth_stage_.collect(params_, buffers_, "synth_stage");
  content_stage_.collect(params_, buffers_, "content_stage");
  for (LinearLayer* head : {&synth_head_, &comp_head_, &speed_head_, &final_head_}) {
    params_.push_back(&head->weight);
    params_.push_back(&head->bias);
  }
}

DetectorModel::GraphOutputs DetectorModel::forward(Tape& t, const Tensor& input, bool training) {
  if (input.rank() != 4 || input.dim(1) != 1) {
    throw std::invalid_argument("model: input must be (B,1,H,W), got " + input.shape_str());
  }
  GraphOutputs out;
  Var x = t.constant(input);
  x = t.relu(stem_bn_(t, stem_conv_(t, x), training));
  x = t.maxpool(x, 3, 2, 1);
  x = stage1_(t, x, training);
  x = stage2_(t, x, training);
  out.f_h = stage3_(t, x, training);

  out.f_s = t.global_avg_pool(synth_stage_(t, out.f_h, training));
  out.f_c = t.global_avg_pool(content_stage_(t, out.f_h, training));
  out.logits_synth = synth_head_(t, out.f_s);
  out.logits_comp = comp_head_(t, out.f_c);
  out.logits_speed = speed_head_(t, out.f_c);
  out.f_cls = t.concat_cols(out.f_c, out.f_s);
  out.logit_final = final_head_(t, out.f_cls);
  return out;
}

void DetectorModel::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

double DetectorModel::grad_norm(ParamGroup group) const {
  double sq = 0.0;
  for (const Parameter* p : params_) {
    if (p->group != group) continue;
    for (int64_t i = 0; i < p->grad.numel(); ++i) {
      sq += static_cast<double>(p->grad[i]) * p->grad[i];
    }
  }
  return std::sqrt(sq);
}

}  // namespace dsd::nn
