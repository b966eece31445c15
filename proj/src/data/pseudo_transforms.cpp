#include "dsd/data/pseudo_transforms.hpp"

#include <stdexcept>

#include "dsd/audio/pipeline.hpp"
#include "dsd/audio/resample.hpp"

namespace dsd::data {

const std::vector<CompressionSetting>& compression_grid() {
  static const std::vector<CompressionSetting> grid = [] {
    std::vector<CompressionSetting> g;
    g.push_back({0, "identity", 0});
    int index = 1;
    for (const char* codec : {"aac", "opus", "mp3"}) {
      for (const int bitrate : {16000, 32000, 64000}) {
        g.push_back({index++, codec, bitrate});
      }
    }
    return g;
  }();
  return grid;
}

const std::vector<SpeedSetting>& speed_grid() {
  static const std::vector<SpeedSetting> grid = [] {
    std::vector<SpeedSetting> g;
    for (int i = 0; i < kNumSpeedSettings; ++i) {
      g.push_back({i, (i + 5) / 10.0});
    }
    return g;
  }();
  return grid;
}

std::vector<CompressionSetting> active_compression_grid(const CodecBackend* backend) {
  const auto& full = compression_grid();
  if (backend && backend->available()) return full;
  return {full[0]};
}

std::vector<double> apply_speed(const std::vector<double>& samples, const SpeedSetting& setting) {
  if (setting.factor <= 0.0) throw std::invalid_argument("pseudo: non-positive speed factor");
  if (setting.factor == 1.0) return samples;
  const double rate = 16000.0;
  return audio::resample(samples, rate, rate / setting.factor);
}

std::vector<double> apply_compression(const std::vector<double>& samples,
                                      const CompressionSetting& setting, int sample_rate,
                                      CodecBackend* backend) {
  if (setting.codec == "identity") return samples;
  if (!backend || !backend->available()) {
    throw std::runtime_error("pseudo: codec backend unavailable for " + setting.codec);
  }
  return backend->roundtrip(samples, sample_rate, setting.codec, setting.bitrate);
}

PseudoSample sample_pseudo_labeled(const std::vector<double>& samples, Rng& rng,
                                   CodecBackend* backend,
                                   const std::vector<CompressionSetting>& active_grid,
                                   int sample_rate, int64_t target_len) {
  if (active_grid.empty()) throw std::invalid_argument("pseudo: empty compression grid");
  const auto& comp = active_grid[rng.uniform_index(active_grid.size())];
  const auto& speed = speed_grid()[rng.uniform_index(kNumSpeedSettings)];

  PseudoSample out;
  out.compression_label = comp.index;
  out.speed_label = speed.index;
  auto transformed = apply_speed(apply_compression(samples, comp, sample_rate, backend), speed);
  out.samples = audio::fix_length(transformed, target_len, audio::CropMode::kRandom, &rng);
  return out;
}

}  // namespace dsd::data
