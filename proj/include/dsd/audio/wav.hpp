#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dsd::audio {

/// Mono waveform in [-1, 1], kept in double until features are built.
struct AudioClip {
  int sample_rate = 0;
  std::vector<double> samples;
};

// Reads RIFF/WAVE files holding PCM16, PCM24, PCM32 or float32 data,
// including the WAVE_FORMAT_EXTENSIBLE wrapping. Multi-channel input is
// downmixed by averaging channels. Throws std::runtime_error on malformed
// files.
AudioClip read_wav(const std::string& path);

/// Writes mono PCM16. Samples are clamped to [-1, 1] before quantization.
void write_wav_pcm16(const std::string& path, const std::vector<double>& samples, int sample_rate);

}  // namespace dsd::audio
