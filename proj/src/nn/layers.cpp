#include "dsd/nn/layers.hpp"

#include <cmath>

namespace dsd::nn {

namespace {

/// He-normal fill for a weight tensor feeding a ReLU.
Tensor he_normal(std::vector<int64_t> shape, int64_t fan_in, Rng rng) {
  Tensor t(std::move(shape));
  const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.normal() * std_dev);
  return t;
}

}  // namespace

Conv2dLayer::Conv2dLayer(const std::string& name, ParamGroup group, int64_t in_c, int64_t out_c,
                         int64_t kernel, int64_t stride_, int64_t pad_, const Rng& init)
    : weight(name + ".weight", group,
             he_normal({out_c, in_c, kernel, kernel}, in_c * kernel * kernel,
                       init.derive(name + ".weight"))),
      stride(stride_),
      pad(pad_) {}

BatchNorm2dLayer::BatchNorm2dLayer(const std::string& name, ParamGroup group, int64_t channels)
    : gamma(name + ".gamma", group, Tensor::full({channels}, 1.0f)),
      beta(name + ".beta", group, Tensor::zeros({channels})),
      running_mean(Tensor::zeros({channels})),
      running_var(Tensor::full({channels}, 1.0f)) {}

LinearLayer::LinearLayer(const std::string& name, ParamGroup group, int64_t in_dim,
                         int64_t out_dim, const Rng& init)
    : weight(name + ".weight", group,
             he_normal({out_dim, in_dim}, in_dim, init.derive(name + ".weight"))),
      bias(name + ".bias", group, Tensor::zeros({out_dim})) {}

BasicBlock::BasicBlock(const std::string& name, ParamGroup group, int64_t in_c, int64_t out_c,
                       int64_t stride, const Rng& init)
    : conv1(name + ".conv1", group, in_c, out_c, 3, stride, 1, init),
      bn1(name + ".bn1", group, out_c),
      conv2(name + ".conv2", group, out_c, out_c, 3, 1, 1, init),
      bn2(name + ".bn2", group, out_c) {
  if (stride != 1 || in_c != out_c) {
    down_conv = std::make_unique<Conv2dLayer>(name + ".down", group, in_c, out_c, 1, stride, 0,
                                              init);
    down_bn = std::make_unique<BatchNorm2dLayer>(name + ".down_bn", group, out_c);
  }
}

Var BasicBlock::operator()(Tape& t, Var x, bool training) {
  Var h = t.relu(bn1(t, conv1(t, x), training));
  h = bn2(t, conv2(t, h), training);
  Var shortcut = x;
  if (down_conv) shortcut = (*down_bn)(t, (*down_conv)(t, x), training);
  return t.relu(t.add(h, shortcut));
}

void BasicBlock::collect(std::vector<Parameter*>& params,
                         std::vector<std::pair<std::string, Tensor*>>& bufs,
                         const std::string& prefix) {
  params.push_back(&conv1.weight);
  params.push_back(&bn1.gamma);
  params.push_back(&bn1.beta);
  params.push_back(&conv2.weight);
  params.push_back(&bn2.gamma);
  params.push_back(&bn2.beta);
  bufs.push_back({prefix + ".bn1.running_mean", &bn1.running_mean});
  bufs.push_back({prefix + ".bn1.running_var", &bn1.running_var});
  bufs.push_back({prefix + ".bn2.running_mean", &bn2.running_mean});
  bufs.push_back({prefix + ".bn2.running_var", &bn2.running_var});
  if (down_conv) {
    params.push_back(&down_conv->weight);
    params.push_back(&down_bn->gamma);
    params.push_back(&down_bn->beta);
    bufs.push_back({prefix + ".down_bn.running_mean", &down_bn->running_mean});
    bufs.push_back({prefix + ".down_bn.running_var", &down_bn->running_var});
  }
}

ResStage::ResStage(const std::string& name, ParamGroup group, int64_t in_c, int64_t out_c,
                   int64_t stride, const Rng& init)
    : block1(name + ".block1", group, in_c, out_c, stride, init),
      block2(name + ".block2", group, out_c, out_c, 1, init) {}

void ResStage::collect(std::vector<Parameter*>& params,
                       std::vector<std::pair<std::string, Tensor*>>& bufs,
                       const std::string& prefix) {
  block1.collect(params, bufs, prefix + ".block1");
  block2.collect(params, bufs, prefix + ".block2");
}

const char* param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::kBackbone: return "backbone";
    case ParamGroup::kSynthStream: return "synth_stream";
    case ParamGroup::kSynthHead: return "synth_head";
    case ParamGroup::kContentStream: return "content_stream";
    case ParamGroup::kContentHeads: return "content_heads";
    case ParamGroup::kFinalHead: return "final_head";
  }
  return "unknown";
}

}  // namespace dsd::nn
