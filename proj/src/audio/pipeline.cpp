#include "dsd/audio/pipeline.hpp"

#include <stdexcept>

#include "dsd/audio/resample.hpp"

namespace dsd::audio {

std::vector<double> fix_length(const std::vector<double>& x, int64_t target_len, CropMode mode,
                               Rng* rng) {
  std::vector<double> out(static_cast<size_t>(target_len), 0.0);
  const int64_t n = static_cast<int64_t>(x.size());
  if (n == 0) return out;
  if (n >= target_len) {
    int64_t start;
    if (mode == CropMode::kRandom && rng) {
      start = static_cast<int64_t>(rng->uniform_index(static_cast<uint64_t>(n - target_len + 1)));
    } else {
      start = (n - target_len) / 2;
    }
    for (int64_t i = 0; i < target_len; ++i) {
      out[static_cast<size_t>(i)] = x[static_cast<size_t>(start + i)];
    }
  } else {
    for (int64_t i = 0; i < target_len; ++i) {
      out[static_cast<size_t>(i)] = x[static_cast<size_t>(i % n)];
    }
  }
  return out;
}

std::vector<double> load_waveform(const std::string& path, int target_rate) {
  AudioClip clip = read_wav(path);
  if (clip.samples.empty()) throw std::runtime_error("audio: empty clip: " + path);
  if (clip.sample_rate == target_rate) return std::move(clip.samples);
  return resample(clip.samples, clip.sample_rate, target_rate);
}

Spectrogram featurize(const std::vector<double>& waveform, const PipelineConfig& cfg, CropMode mode,
                      Rng* rng) {
  return log_spectrogram(fix_length(waveform, cfg.target_samples, mode, rng), cfg.spectrogram);
}

}  // namespace dsd::audio
