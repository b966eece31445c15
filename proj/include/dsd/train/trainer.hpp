#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsd/audio/pipeline.hpp"
#include "dsd/data/codec.hpp"
#include "dsd/data/pseudo_transforms.hpp"
#include "dsd/data/splits.hpp"
#include "dsd/nn/augmentation.hpp"
#include "dsd/nn/checkpoint.hpp"
#include "dsd/nn/losses.hpp"
#include "dsd/nn/model.hpp"
#include "dsd/train/optimizer.hpp"

namespace dsd::train {

// Each switch removes one loss term or augmentation from the step; disabled
// terms log as zero. The binary classification loss itself is never optional.
struct AblationConfig {
  bool blend = true;
  bool shuffle = true;
  bool cls_s = true;
  bool con_s = true;
  bool cls_c = true;
  bool adversarial = true;
  bool con_cls = true;
};

struct TrainConfig {
  int64_t batch_size = 128;
  int64_t patience_epochs = 3;
  int64_t max_epochs = 100;
  uint64_t seed = 1;
  AdamConfig adam;
  AblationConfig ablation;

  void validate() const;
};

struct FitResult {
  int64_t epochs_run = 0;
  int64_t best_epoch = 0;
  double best_val_auc = 0.0;
  double best_val_eer = 1.0;
  bool early_stopped = false;
  std::string best_checkpoint_path;
};

// Drives optimization: assembles batches with per-sample pseudo-label
// transforms, runs the single forward pass feeding every enabled loss term,
// applies the two backward passes (everything but the adversarial term, then
// the adversarial term restricted to the content stream), and steps Adam.
//
// Randomness is split into two streams. The data stream is consumed only by
// the per-epoch shuffle; the augmentation stream covers pseudo transforms,
// crops, blending and shuffling in batch order. Together with the optimizer
// state they make a mid-epoch snapshot exactly resumable.
class Trainer {
 public:
  Trainer(nn::DetectorModel& model, const data::SplitSet& splits, TrainConfig config,
          nn::LossConfig loss_config, nn::BlendConfig blend_config,
          audio::PipelineConfig pipeline_config, data::CodecBackend* codec);

  /// Reshuffles the epoch order and resets the step cursor.
  void begin_epoch();
  int64_t steps_per_epoch() const { return steps_per_epoch_; }
  bool epoch_done() const { return cursor_ >= steps_per_epoch_; }

  /// One optimization step at the current cursor. Throws on non-finite loss.
  nn::LossBreakdown step();

  /// Validation-split AUC and EER from eval-mode scoring (middle crop).
  std::pair<double, double> validate();

  // Full loop with early stopping on strict validation-AUC improvement.
  // Writes the best checkpoint under out_dir and line-delimited progress
  // records to log (nullable).
  FitResult fit(const std::string& out_dir, std::ostream* log);

  // Mid-epoch snapshot/restore. The snapshot feeds the checkpoint header;
  // restore expects the model and optimizer moments to be reloaded
  // separately, and rebuilds the epoch order from the recorded state.
  nn::TrainProgress snapshot_progress() const;
  void restore_progress(const nn::TrainProgress& progress);

  AdamW& optimizer() { return optimizer_; }
  int64_t epoch() const { return epoch_; }

 private:
  const std::vector<double>& waveform(const data::ManifestEntry& entry);
  nn::LossBreakdown train_batch(int64_t first_index);

  nn::DetectorModel& model_;
  data::SplitSet splits_;
  TrainConfig config_;
  nn::LossConfig loss_config_;
  nn::BlendConfig blend_config_;
  audio::PipelineConfig pipeline_config_;
  data::CodecBackend* codec_;
  std::vector<data::CompressionSetting> active_compressions_;

  std::vector<data::ManifestEntry> train_pool_;  // oversampled
  std::unordered_map<std::string, int64_t> synth_index_;
  std::unordered_map<std::string, std::vector<double>> waveforms_;

  AdamW optimizer_;
  Rng data_rng_;
  Rng aug_rng_;
  uint64_t epoch_start_data_state_ = 0;
  std::vector<int64_t> epoch_order_;
  int64_t steps_per_epoch_ = 0;
  int64_t cursor_ = 0;
  int64_t epoch_ = 0;
};

/// Writes one log record; shared by the trainer and tests that format logs.
std::string format_step_record(int64_t epoch, int64_t step, const nn::LossBreakdown& loss);
std::string format_epoch_record(int64_t epoch, double val_auc, double val_eer);

}  // namespace dsd::train
