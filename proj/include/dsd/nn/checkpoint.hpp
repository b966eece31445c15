#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dsd/nn/model.hpp"

namespace dsd::nn {

/// Training progress stored alongside the weights so a run can resume
/// exactly where it stopped.
struct TrainProgress {
  int64_t epoch = 0;
  int64_t adam_step = 0;
  double best_val_auc = 0.0;
  int64_t epochs_without_gain = 0;
  std::map<std::string, uint64_t> rng_states;
};

// Binary container: magic, format version, a JSON header describing the model
// configuration, synthesizer vocabulary, training progress and the exact
// tensor inventory, then raw little-endian float payloads in header order.
// include_optimizer stores the Adam moment buffers so resumed training
// continues bit-identically.
void save_checkpoint(const std::string& path, DetectorModel& model,
                     const std::vector<std::string>& synth_vocab, const TrainProgress& progress,
                     bool include_optimizer);

/// Model configuration and vocabulary read from the header alone, so callers
/// can construct a matching model before loading weights.
struct CheckpointDescription {
  ModelConfig config;
  std::vector<std::string> synth_vocab;
  bool has_optimizer_state = false;
};

CheckpointDescription peek_checkpoint(const std::string& path);

// Loads weights (and optimizer moments when present and wanted) into a model
// whose parameter inventory must match the file exactly. Returns the stored
// progress. Unknown magic, unsupported version, or any inventory mismatch is
// an error.
TrainProgress load_checkpoint(const std::string& path, DetectorModel& model,
                              bool load_optimizer);

}  // namespace dsd::nn
