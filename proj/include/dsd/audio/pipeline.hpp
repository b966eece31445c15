#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsd/audio/spectrogram.hpp"
#include "dsd/audio/wav.hpp"
#include "dsd/core/rng.hpp"

namespace dsd::audio {

struct PipelineConfig {
  int target_rate = 16000;
  int64_t target_samples = 48000;
  SpectrogramConfig spectrogram;
};

/// Crop policy for clips longer than the target length.
enum class CropMode { kMiddle, kRandom };

// Force a waveform to an exact sample count. Longer clips are cropped, either
// at the centered window or at a seeded random offset; shorter clips repeat
// cyclically from the start. Empty input yields silence.
std::vector<double> fix_length(const std::vector<double>& x, int64_t target_len,
                               CropMode mode = CropMode::kMiddle, Rng* rng = nullptr);

/// Read a file and bring it to the working sample rate. Rejects empty audio.
std::vector<double> load_waveform(const std::string& path, int target_rate);

/// Waveform (already at the working rate) to the model's log spectrogram.
Spectrogram featurize(const std::vector<double>& waveform, const PipelineConfig& cfg,
                      CropMode mode = CropMode::kMiddle, Rng* rng = nullptr);

}  // namespace dsd::audio
