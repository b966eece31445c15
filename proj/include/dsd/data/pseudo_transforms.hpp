#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsd/core/rng.hpp"
#include "dsd/data/codec.hpp"

namespace dsd::data {

/// One cell of the compression label grid. Index 0 is the identity; indices
/// 1..9 enumerate codec x bitrate in the fixed order aac, opus, mp3 by
/// ascending bitrate {16000, 32000, 64000}.
struct CompressionSetting {
  int index = 0;
  std::string codec = "identity";
  int bitrate = 0;
};

/// One cell of the speed label grid: factor = 0.5 + 0.1 * index, 16 cells.
/// Index 5 is the unit factor.
struct SpeedSetting {
  int index = 5;
  double factor = 1.0;
};

inline constexpr int kNumCompressionSettings = 10;
inline constexpr int kNumSpeedSettings = 16;
inline constexpr int kIdentitySpeedIndex = 5;

/// The full fixed grids. Stable across runs; indices are the training labels.
const std::vector<CompressionSetting>& compression_grid();
const std::vector<SpeedSetting>& speed_grid();

// The subset of the compression grid usable right now: identity always, codec
// settings only when the backend is live. Sampling draws from this subset
// while label space stays the full grid.
std::vector<CompressionSetting> active_compression_grid(const CodecBackend* backend);

// Playback-speed change by sinc resampling: output length is
// round(len / factor) and the clip plays factor times faster when read at the
// original rate. Unit factor returns the input unchanged.
std::vector<double> apply_speed(const std::vector<double>& samples, const SpeedSetting& setting);

/// Identity setting returns the input bit-exact; codec settings round-trip
/// through the backend at the working sample rate, length preserved.
std::vector<double> apply_compression(const std::vector<double>& samples,
                                      const CompressionSetting& setting, int sample_rate,
                                      CodecBackend* backend);

struct PseudoSample {
  std::vector<double> samples;
  int compression_label = 0;
  int speed_label = kIdentitySpeedIndex;
};

// Draw one compression and one speed setting uniformly, apply compression
// then speed, then fix the length with a random crop. Rng draws happen in a
// fixed order: compression, speed, then the crop offset if one is needed.
PseudoSample sample_pseudo_labeled(const std::vector<double>& samples, Rng& rng,
                                   CodecBackend* backend,
                                   const std::vector<CompressionSetting>& active_grid,
                                   int sample_rate, int64_t target_len);

}  // namespace dsd::data
