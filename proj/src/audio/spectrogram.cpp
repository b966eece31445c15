#include "dsd/audio/spectrogram.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "dsd/audio/fft.hpp"
#include "dsd/core/parallel.hpp"

namespace dsd::audio {

namespace {

// Reflect an arbitrary index into [0, n), mirroring about the edge samples
// without repeating them.
int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  int64_t m = i % period;
  if (m < 0) m += period;
  return m < n ? m : period - m;
}

}  // namespace

int64_t spectrogram_frames(int64_t num_samples, const SpectrogramConfig& cfg) {
  if (num_samples <= 0) return 0;
  if (cfg.center) return num_samples / cfg.hop_length + 1;
  if (num_samples < cfg.win_length) return 0;
  return (num_samples - cfg.win_length) / cfg.hop_length + 1;
}

Spectrogram log_spectrogram(const std::vector<double>& samples, const SpectrogramConfig& cfg) {
  const int64_t n = static_cast<int64_t>(samples.size());
  const int64_t win = cfg.win_length;
  const int64_t hop = cfg.hop_length;
  if (win <= 0 || hop <= 0) throw std::invalid_argument("spectrogram: bad window/hop");

  Spectrogram spec;
  spec.bins = win / 2 + 1;
  spec.frames = spectrogram_frames(n, cfg);
  spec.values.assign(static_cast<size_t>(spec.bins * spec.frames), 0.0);
  if (spec.frames == 0) return spec;

  // Periodic Hann window.
  std::vector<double> window(static_cast<size_t>(win));
  for (int64_t i = 0; i < win; ++i) {
    window[static_cast<size_t>(i)] =
        0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(win)));
  }

  const int64_t half = win / 2;
#pragma omp parallel for schedule(static)
  for (int64_t t = 0; t < spec.frames; ++t) {
    std::vector<double> frame(static_cast<size_t>(win));
    for (int64_t i = 0; i < win; ++i) {
      int64_t src = cfg.center ? t * hop - half + i : t * hop + i;
      double v;
      if (src >= 0 && src < n) {
        v = samples[static_cast<size_t>(src)];
      } else if (cfg.center) {
        v = samples[static_cast<size_t>(reflect_index(src, n))];
      } else {
        v = 0.0;
      }
      frame[static_cast<size_t>(i)] = v * window[static_cast<size_t>(i)];
    }
    const auto bins = rfft(frame.data(), win);
    for (int64_t k = 0; k < spec.bins; ++k) {
      spec.values[static_cast<size_t>(k * spec.frames + t)] =
          std::log(std::abs(bins[static_cast<size_t>(k)]) + cfg.log_offset);
    }
  }
  return spec;
}

Tensor to_input_tensor(const Spectrogram& spec) {
  Tensor t({1, spec.bins, spec.frames});
  float* out = t.data();
  for (size_t i = 0; i < spec.values.size(); ++i) out[i] = static_cast<float>(spec.values[i]);
  return t;
}

namespace {
constexpr char kSpecMagic[8] = {'D', 'S', 'D', 'S', 'P', 'E', 'C', '1'};
}

void save_spectrogram(const std::string& path, const Spectrogram& spec) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open spectrogram cache '" + path + "' for writing");
  os.write(kSpecMagic, sizeof kSpecMagic);
  os.write(reinterpret_cast<const char*>(&spec.bins), sizeof spec.bins);
  os.write(reinterpret_cast<const char*>(&spec.frames), sizeof spec.frames);
  os.write(reinterpret_cast<const char*>(spec.values.data()),
           static_cast<std::streamsize>(spec.values.size() * sizeof(double)));
  if (!os) throw std::runtime_error("write to spectrogram cache '" + path + "' failed");
}

Spectrogram load_spectrogram(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open spectrogram cache '" + path + "'");
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kSpecMagic, sizeof kSpecMagic) != 0) {
    throw std::runtime_error("'" + path + "' is not a spectrogram cache file");
  }
  Spectrogram spec;
  is.read(reinterpret_cast<char*>(&spec.bins), sizeof spec.bins);
  is.read(reinterpret_cast<char*>(&spec.frames), sizeof spec.frames);
  if (!is || spec.bins <= 0 || spec.frames <= 0) {
    throw std::runtime_error("spectrogram cache '" + path + "' has a corrupt header");
  }
  spec.values.resize(static_cast<size_t>(spec.bins * spec.frames));
  is.read(reinterpret_cast<char*>(spec.values.data()),
          static_cast<std::streamsize>(spec.values.size() * sizeof(double)));
  if (!is) throw std::runtime_error("spectrogram cache '" + path + "' is truncated");
  return spec;
}

}  // namespace dsd::audio
