#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsd/core/tensor.hpp"

namespace dsd::audio {

struct SpectrogramConfig {
  int win_length = 512;
  int hop_length = 187;
  // Centered frames with reflect padding of win_length/2 on each side.
  bool center = true;
  // Natural log of the magnitude spectrum plus this offset.
  double log_offset = 1e-7;
};

/// Log magnitude spectrogram, (bins, frames) row-major, kept in double.
struct Spectrogram {
  int64_t bins = 0;
  int64_t frames = 0;
  std::vector<double> values;

  double at(int64_t bin, int64_t frame) const { return values[bin * frames + frame]; }
};

/// Frame count for a given signal length under the config.
int64_t spectrogram_frames(int64_t num_samples, const SpectrogramConfig& cfg);

// STFT with a periodic Hann window followed by ln(magnitude + offset). The
// whole computation runs in double; features are only narrowed to float when
// they enter the network.
Spectrogram log_spectrogram(const std::vector<double>& samples, const SpectrogramConfig& cfg);

/// Narrow to the float tensor the model consumes, shape (1, bins, frames).
Tensor to_input_tensor(const Spectrogram& spec);

// Precomputed-feature cache entry: an 8-byte magic, bins and frames as
// little-endian int64, then row-major doubles.
void save_spectrogram(const std::string& path, const Spectrogram& spec);
Spectrogram load_spectrogram(const std::string& path);

}  // namespace dsd::audio
