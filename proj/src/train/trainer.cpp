#include "dsd/train/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "dsd/eval/metrics.hpp"
#include "dsd/eval/protocol.hpp"

namespace dsd::train {

namespace {

std::vector<int64_t> to_i64(const std::vector<int>& v) {
  std::vector<int64_t> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = v[i];
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 2) throw std::invalid_argument("train: batch_size must be at least 2");
  if (patience_epochs < 1) throw std::invalid_argument("train: patience must be at least 1");
  if (max_epochs < 1) throw std::invalid_argument("train: max_epochs must be at least 1");
}

Trainer::Trainer(nn::DetectorModel& model, const data::SplitSet& splits, TrainConfig config,
                 nn::LossConfig loss_config, nn::BlendConfig blend_config,
                 audio::PipelineConfig pipeline_config, data::CodecBackend* codec)
    : model_(model),
      splits_(splits),
      config_(config),
      loss_config_(loss_config),
      blend_config_(blend_config),
      pipeline_config_(pipeline_config),
      codec_(codec),
      optimizer_(model.parameters(), config.adam) {
  config_.validate();
  if (splits_.train.empty()) throw std::invalid_argument("train: empty training split");
  if (splits_.synthesizer_vocab.empty() || splits_.synthesizer_vocab[0] != "real") {
    throw std::invalid_argument("train: synthesizer vocabulary must start with 'real'");
  }
  if (model_.config().n_synth_classes !=
      static_cast<int64_t>(splits_.synthesizer_vocab.size())) {
    throw std::invalid_argument("train: model synthesizer head does not match the vocabulary");
  }
  for (size_t i = 0; i < splits_.synthesizer_vocab.size(); ++i) {
    synth_index_[splits_.synthesizer_vocab[i]] = static_cast<int64_t>(i);
  }

  active_compressions_ = data::active_compression_grid(codec_);

  Rng master(config_.seed);
  train_pool_ = data::oversample_real(splits_.train, master.derive("oversample").state());
  data_rng_ = master.derive("train.data");
  aug_rng_ = master.derive("train.aug");
  epoch_start_data_state_ = data_rng_.state();

  steps_per_epoch_ = static_cast<int64_t>(train_pool_.size()) / config_.batch_size;
  if (steps_per_epoch_ < 1) {
    throw std::invalid_argument("train: training split smaller than one batch");
  }
}

const std::vector<double>& Trainer::waveform(const data::ManifestEntry& entry) {
  auto it = waveforms_.find(entry.path);
  if (it != waveforms_.end()) return it->second;
  auto [pos, _] =
      waveforms_.emplace(entry.path, audio::load_waveform(entry.path, pipeline_config_.target_rate));
  return pos->second;
}

void Trainer::begin_epoch() {
  epoch_start_data_state_ = data_rng_.state();
  epoch_order_.resize(train_pool_.size());
  std::iota(epoch_order_.begin(), epoch_order_.end(), 0);
  data_rng_.shuffle(epoch_order_);
  cursor_ = 0;
  ++epoch_;
}

nn::LossBreakdown Trainer::step() {
  if (epoch_order_.empty() || epoch_done()) {
    throw std::logic_error("train: step() without an open epoch");
  }
  nn::LossBreakdown out = train_batch(cursor_ * config_.batch_size);
  ++cursor_;
  return out;
}

nn::LossBreakdown Trainer::train_batch(int64_t first_index) {
  const int64_t b = config_.batch_size;
  const int64_t target_len = pipeline_config_.target_samples;

  Tensor batch;
  std::vector<int> y(static_cast<size_t>(b));
  std::vector<int64_t> y_s(static_cast<size_t>(b));
  std::vector<int64_t> y_c1(static_cast<size_t>(b));
  std::vector<int64_t> y_c2(static_cast<size_t>(b));

  for (int64_t i = 0; i < b; ++i) {
    const data::ManifestEntry& e =
        train_pool_[static_cast<size_t>(epoch_order_[static_cast<size_t>(first_index + i)])];
    const std::vector<double>& wave = waveform(e);

    std::vector<double> fixed;
    int comp_label = 0;
    int speed_label = data::kIdentitySpeedIndex;
    if (config_.ablation.cls_c) {
      data::PseudoSample ps =
          data::sample_pseudo_labeled(wave, aug_rng_, codec_, active_compressions_,
                                      pipeline_config_.target_rate, target_len);
      fixed = std::move(ps.samples);
      comp_label = ps.compression_label;
      speed_label = ps.speed_label;
    } else {
      fixed = audio::fix_length(wave, target_len, audio::CropMode::kRandom, &aug_rng_);
    }
    const audio::Spectrogram spec = audio::log_spectrogram(fixed, pipeline_config_.spectrogram);
    if (i == 0) batch = Tensor({b, 1, spec.bins, spec.frames});
    float* row = batch.data() + i * spec.bins * spec.frames;
    for (size_t k = 0; k < spec.values.size(); ++k) row[k] = static_cast<float>(spec.values[k]);

    y[static_cast<size_t>(i)] = e.label;
    const auto si = synth_index_.find(e.synthesizer_id);
    if (si == synth_index_.end()) {
      throw std::runtime_error("train: synthesizer '" + e.synthesizer_id +
                               "' missing from the vocabulary");
    }
    y_s[static_cast<size_t>(i)] = si->second;
    y_c1[static_cast<size_t>(i)] = comp_label;
    y_c2[static_cast<size_t>(i)] = speed_label;
  }

  nn::Tape tape;
  const auto outputs = model_.forward(tape, batch, true);
  const auto& ab = config_.ablation;
  nn::LossBreakdown parts;
  std::vector<nn::Var> terms;
  std::vector<double> weights;

  // Blended features stand in for the originals only on the classification
  // paths; every other term reads the unblended activations.
  nn::Var f_c_used = outputs.f_c;
  nn::Var f_s_used = outputs.f_s;
  nn::Var cls_logit = outputs.logit_final;
  if (ab.blend) {
    const int64_t dim = model_.config().feature_dim();
    const nn::BlendPlan plan_c = nn::sample_blend_plan(y, dim, blend_config_, aug_rng_);
    const nn::BlendPlan plan_s = nn::sample_blend_plan(y, dim, blend_config_, aug_rng_);
    f_c_used = nn::blend_features(tape, outputs.f_c, plan_c);
    f_s_used = nn::blend_features(tape, outputs.f_s, plan_s);
    cls_logit = model_.final_head_on(tape, tape.concat_cols(f_c_used, f_s_used));
  }

  const nn::LossNode cls = nn::bce_node(tape, cls_logit, y);
  parts.cls = cls.value;
  terms.push_back(cls.node);
  weights.push_back(1.0);

  if (ab.shuffle) {
    const nn::ShuffleResult sh = nn::shuffle_combine(tape, f_c_used, f_s_used, y, aug_rng_);
    const nn::LossNode aug = nn::focal_node(tape, model_.final_head_on(tape, sh.fused), sh.labels,
                                            loss_config_.focal_alpha, loss_config_.focal_gamma);
    parts.cls_aug = aug.value;
    terms.push_back(aug.node);
    weights.push_back(loss_config_.beta0);
  }
  if (ab.cls_s) {
    const nn::LossNode n = nn::softmax_ce_node(tape, outputs.logits_synth, y_s);
    parts.cls_s = n.value;
    terms.push_back(n.node);
    weights.push_back(loss_config_.beta1);
  }
  if (ab.con_s) {
    const nn::LossNode n = nn::contrastive_node(tape, outputs.f_s, y_s, loss_config_.margin);
    parts.con_s = n.value;
    terms.push_back(n.node);
    weights.push_back(loss_config_.beta1 * loss_config_.con_s_weight);
  }
  if (ab.cls_c) {
    const nn::LossNode comp = nn::softmax_ce_node(tape, outputs.logits_comp, y_c1);
    const nn::LossNode speed = nn::softmax_ce_node(tape, outputs.logits_speed, y_c2);
    parts.cls_c = comp.value + speed.value;
    terms.push_back(comp.node);
    weights.push_back(loss_config_.beta2);
    terms.push_back(speed.node);
    weights.push_back(loss_config_.beta2);
  }
  if (ab.con_cls) {
    const nn::LossNode n =
        nn::contrastive_node(tape, outputs.f_cls, to_i64(y), loss_config_.margin);
    parts.con_cls = n.value;
    terms.push_back(n.node);
    weights.push_back(loss_config_.beta3);
  }

  model_.zero_grad();
  tape.backward(nn::weighted_sum_node(tape, terms, weights));

  if (ab.adversarial) {
    const nn::LossNode adv = nn::uniform_ce_node(tape, model_.synth_head_on(tape, outputs.f_c));
    parts.adv = adv.value;
    // Second pass: only the content stream learns from this term, and the
    // walk stops at the backbone feature map.
    tape.clear_grads();
    nn::BackwardOptions opts;
    opts.seed_scale = static_cast<float>(loss_config_.beta2);
    std::array<bool, nn::kNumParamGroups> mask{};
    mask[static_cast<int>(nn::ParamGroup::kContentStream)] = true;
    opts.group_mask = mask;
    opts.stop_at = outputs.f_h;
    tape.backward(adv.node, opts);
  }

  optimizer_.step();

  parts.total = nn::total_from_parts(parts, loss_config_);
  if (!std::isfinite(parts.total)) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "train: non-finite loss at epoch %lld step %lld: cls=%g cls_aug=%g cls_s=%g "
                  "con_s=%g cls_c=%g adv=%g con_cls=%g",
                  static_cast<long long>(epoch_), static_cast<long long>(cursor_), parts.cls,
                  parts.cls_aug, parts.cls_s, parts.con_s, parts.cls_c, parts.adv, parts.con_cls);
    throw std::runtime_error(buf);
  }
  return parts;
}

std::pair<double, double> Trainer::validate() {
  if (splits_.validation.empty()) throw std::invalid_argument("train: empty validation split");
  const eval::FeatureFn feature = [this](const data::ManifestEntry& e) {
    return audio::featurize(waveform(e), pipeline_config_, audio::CropMode::kMiddle);
  };
  const std::vector<double> scores =
      eval::score_entries(model_, splits_.validation, feature, config_.batch_size);
  std::vector<int> labels(splits_.validation.size());
  for (size_t i = 0; i < labels.size(); ++i) labels[i] = splits_.validation[i].label;
  return {eval::compute_auc(scores, labels), eval::compute_eer(scores, labels)};
}

FitResult Trainer::fit(const std::string& out_dir, std::ostream* log) {
  if (splits_.validation.empty()) throw std::invalid_argument("train: empty validation split");
  std::filesystem::create_directories(out_dir);

  FitResult result;
  double best_auc = -1.0;
  int64_t epochs_without_gain = 0;
  const std::string checkpoint_path = out_dir + "/best.ckpt";

  for (int64_t e = 1; e <= config_.max_epochs; ++e) {
    begin_epoch();
    while (!epoch_done()) {
      const nn::LossBreakdown loss = step();
      if (log) *log << format_step_record(epoch_, cursor_ - 1, loss) << '\n';
    }
    const auto [auc, eer] = validate();
    if (log) *log << format_epoch_record(epoch_, auc, eer) << '\n';
    result.epochs_run = e;

    if (auc > best_auc) {
      best_auc = auc;
      epochs_without_gain = 0;
      result.best_epoch = e;
      result.best_val_auc = auc;
      result.best_val_eer = eer;
      nn::TrainProgress progress = snapshot_progress();
      progress.best_val_auc = auc;
      nn::save_checkpoint(checkpoint_path, model_, splits_.synthesizer_vocab, progress, true);
      result.best_checkpoint_path = checkpoint_path;
    } else if (++epochs_without_gain >= config_.patience_epochs) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

nn::TrainProgress Trainer::snapshot_progress() const {
  nn::TrainProgress p;
  p.epoch = epoch_;
  p.adam_step = optimizer_.step_count();
  p.rng_states["data_epoch_start"] = epoch_start_data_state_;
  p.rng_states["data"] = data_rng_.state();
  p.rng_states["aug"] = aug_rng_.state();
  p.rng_states["cursor"] = static_cast<uint64_t>(cursor_);
  return p;
}

void Trainer::restore_progress(const nn::TrainProgress& progress) {
  epoch_ = progress.epoch;
  optimizer_.set_step_count(progress.adam_step);
  const auto need = [&](const char* key) {
    const auto it = progress.rng_states.find(key);
    if (it == progress.rng_states.end()) {
      throw std::runtime_error(std::string("train: progress record lacks rng state '") + key +
                               "'");
    }
    return it->second;
  };
  epoch_start_data_state_ = need("data_epoch_start");
  data_rng_.set_state(epoch_start_data_state_);
  if (epoch_ > 0) {
    // Replay the epoch shuffle so the order matches, then jump to the saved
    // position within it.
    epoch_order_.resize(train_pool_.size());
    std::iota(epoch_order_.begin(), epoch_order_.end(), 0);
    data_rng_.shuffle(epoch_order_);
  }
  cursor_ = static_cast<int64_t>(need("cursor"));
  aug_rng_.set_state(need("aug"));
}

std::string format_step_record(int64_t epoch, int64_t step, const nn::LossBreakdown& loss) {
  char buf[320];
  std::snprintf(buf, sizeof buf,
                "epoch=%lld step=%lld cls=%.6f cls_aug=%.6f cls_s=%.6f con_s=%.6f cls_c=%.6f "
                "adv=%.6f con_cls=%.6f total=%.6f",
                static_cast<long long>(epoch), static_cast<long long>(step), loss.cls,
                loss.cls_aug, loss.cls_s, loss.con_s, loss.cls_c, loss.adv, loss.con_cls,
                loss.total);
  return buf;
}

std::string format_epoch_record(int64_t epoch, double val_auc, double val_eer) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "epoch=%lld val_auc=%.6f val_eer=%.6f",
                static_cast<long long>(epoch), val_auc, val_eer);
  return buf;
}

}  // namespace dsd::train
