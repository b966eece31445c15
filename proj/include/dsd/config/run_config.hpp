#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dsd/audio/pipeline.hpp"
#include "dsd/nn/augmentation.hpp"
#include "dsd/nn/losses.hpp"
#include "dsd/nn/model.hpp"
#include "dsd/train/trainer.hpp"

namespace dsd::config {

// Everything a run needs in one human-editable JSON file. Field defaults are
// the published operating point; a frozen table in the tests pins them.
struct RunConfig {
  std::string manifest;
  // Separate manifest scored at evaluation time (cross-dataset and
  // cross-language runs); empty means evaluate within `manifest`.
  std::string eval_manifest;
  std::string out_dir = "runs/out";
  std::string protocol = "inner";
  uint64_t seed = 1;

  std::array<double, 3> split_ratios = {0.6, 0.2, 0.2};
  std::vector<std::string> train_synthesizers;  // cross_method holdout: who stays in train
  // Train/validation ratio pair where no test share exists: the cross-method
  // fake split, and the whole training manifest of the cross-dataset and
  // cross-language protocols.
  std::array<double, 2> train_val_ratios = {0.8, 0.2};

  std::array<int64_t, 4> stage_channels = {64, 128, 256, 512};
  train::TrainConfig train;
  nn::LossConfig loss;
  nn::BlendConfig blend;
  audio::PipelineConfig pipeline;
  std::string cache_dir;  // optional spectrogram cache for evaluation
};

RunConfig default_run_config();

/// Parses with strict key checking: an unknown key anywhere fails with the
/// dotted field path.
RunConfig load_run_config(const std::string& path);

/// Snapshot writer; loading the output reproduces the run settings exactly.
void save_run_config(const std::string& path, const RunConfig& cfg);

}  // namespace dsd::config
