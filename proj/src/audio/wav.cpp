#include "dsd/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dsd::audio {

namespace {

uint32_t read_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint16_t read_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | p[1] << 8);
}

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("wav: " + path + ": " + what);
}

}  // namespace

AudioClip read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail(path, "not a RIFF/WAVE file");
  }

  uint16_t format = 0;
  uint16_t channels = 0;
  uint32_t sample_rate = 0;
  uint16_t bits = 0;
  const unsigned char* data = nullptr;
  size_t data_size = 0;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* hdr = bytes.data() + pos;
    const uint32_t chunk_size = read_u32(hdr + 4);
    const size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (body + 16 > bytes.size()) fail(path, "truncated fmt chunk");
      const unsigned char* fmt = bytes.data() + body;
      format = read_u16(fmt);
      channels = read_u16(fmt + 2);
      sample_rate = read_u32(fmt + 4);
      bits = read_u16(fmt + 14);
      if (format == 0xFFFE) {
        // Extensible: the real format tag leads the 16-byte sub-format GUID.
        if (chunk_size < 40 || body + 26 > bytes.size()) fail(path, "truncated extensible fmt");
        format = read_u16(fmt + 24);
      }
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (body + chunk_size > bytes.size()) fail(path, "truncated data chunk");
      data = bytes.data() + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }

  if (sample_rate == 0 || channels == 0) fail(path, "missing fmt chunk");
  if (!data) fail(path, "missing data chunk");
  const bool pcm = format == 1;
  const bool ieee = format == 3;
  if (!pcm && !ieee) fail(path, "unsupported format tag " + std::to_string(format));
  if (pcm && bits != 16 && bits != 24 && bits != 32) {
    fail(path, "unsupported PCM depth " + std::to_string(bits));
  }
  if (ieee && bits != 32) fail(path, "unsupported float depth " + std::to_string(bits));

  const size_t bytes_per_sample = bits / 8;
  const size_t frame_size = bytes_per_sample * channels;
  const size_t frames = frame_size ? data_size / frame_size : 0;

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  clip.samples.resize(frames);
  const double inv_channels = channels ? 1.0 / channels : 0.0;
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (size_t ch = 0; ch < channels; ++ch) {
      const unsigned char* p = data + i * frame_size + ch * bytes_per_sample;
      double v = 0.0;
      if (ieee) {
        float fv;
        std::memcpy(&fv, p, 4);
        v = fv;
      } else if (bits == 16) {
        const int16_t s = static_cast<int16_t>(read_u16(p));
        v = s / 32768.0;
      } else if (bits == 24) {
        int32_t s = p[0] | p[1] << 8 | p[2] << 16;
        if (s & 0x800000) s |= ~0xFFFFFF;
        v = s / 8388608.0;
      } else {
        const int32_t s = static_cast<int32_t>(read_u32(p));
        v = s / 2147483648.0;
      }
      acc += v;
    }
    clip.samples[i] = acc * inv_channels;
  }
  return clip;
}

void write_wav_pcm16(const std::string& path, const std::vector<double>& samples,
                     int sample_rate) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(path, "cannot open for writing");
  const uint32_t data_size = static_cast<uint32_t>(samples.size() * 2);
  auto put_u32 = [&](uint32_t v) {
    char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                 static_cast<char>(v >> 24)};
    f.write(b, 4);
  };
  auto put_u16 = [&](uint16_t v) {
    char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
    f.write(b, 2);
  };
  f.write("RIFF", 4);
  put_u32(36 + data_size);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  put_u32(16);
  put_u16(1);
  put_u16(1);
  put_u32(static_cast<uint32_t>(sample_rate));
  put_u32(static_cast<uint32_t>(sample_rate) * 2);
  put_u16(2);
  put_u16(16);
  f.write("data", 4);
  put_u32(data_size);
  for (const double s : samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const int32_t q = static_cast<int32_t>(std::lround(clamped * 32768.0));
    put_u16(static_cast<uint16_t>(std::clamp(q, -32768, 32767)));
  }
  if (!f) fail(path, "write failed");
}

}  // namespace dsd::audio
