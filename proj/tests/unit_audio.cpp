#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dsd/audio/fft.hpp"
#include "dsd/audio/pipeline.hpp"
#include "dsd/audio/resample.hpp"
#include "dsd/audio/spectrogram.hpp"
#include "dsd/audio/wav.hpp"
#include "dsd/core/rng.hpp"

using namespace dsd;
using namespace dsd::audio;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void append_u16(std::vector<unsigned char>& b, uint16_t v) {
  b.push_back(v & 0xFF);
  b.push_back((v >> 8) & 0xFF);
}

void append_u32(std::vector<unsigned char>& b, uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xFF);
}

// Assemble a RIFF/WAVE file by hand so the reader can be fed formats the
// writer does not produce.
void write_raw_wav(const std::string& path, uint16_t format, uint16_t channels, uint32_t rate,
                   uint16_t bits, const std::vector<unsigned char>& payload,
                   bool extensible = false) {
  std::vector<unsigned char> b;
  const uint32_t fmt_size = extensible ? 40 : 16;
  const uint32_t riff_size = 4 + 8 + fmt_size + 8 + uint32_t(payload.size());
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  append_u32(b, riff_size);
  b.insert(b.end(), {'W', 'A', 'V', 'E'});
  b.insert(b.end(), {'f', 'm', 't', ' '});
  append_u32(b, fmt_size);
  append_u16(b, extensible ? 0xFFFE : format);
  append_u16(b, channels);
  append_u32(b, rate);
  append_u32(b, rate * channels * bits / 8);
  append_u16(b, channels * bits / 8);
  append_u16(b, bits);
  if (extensible) {
    append_u16(b, 22);    // cbSize
    append_u16(b, bits);  // valid bits
    append_u32(b, 0);     // channel mask
    append_u16(b, format);
    const unsigned char guid_tail[] = {0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80,
                                       0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};
    b.insert(b.end(), guid_tail, guid_tail + sizeof(guid_tail));
  }
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  append_u32(b, uint32_t(payload.size()));
  b.insert(b.end(), payload.begin(), payload.end());
  std::ofstream f(path, std::ios::binary);
  f.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

}  // namespace

TEST_CASE("pcm16 write then read round trips within quantization error") {
  Rng rng(11);
  std::vector<double> x(500);
  for (double& v : x) v = rng.uniform(-0.99, 0.99);
  const std::string path = temp_path("dsd_rt.wav");
  write_wav_pcm16(path, x, 16000);
  const AudioClip clip = read_wav(path);
  CHECK(clip.sample_rate == 16000);
  REQUIRE(clip.samples.size() == x.size());
  for (size_t i = 0; i < x.size(); ++i) CHECK(std::abs(clip.samples[i] - x[i]) < 1.0 / 32768.0);
  std::filesystem::remove(path);
}

TEST_CASE("reader handles pcm24, pcm32 and float32 payloads") {
  const std::string path = temp_path("dsd_fmt.wav");

  {  // PCM24: values +/- half scale
    std::vector<unsigned char> payload;
    const int32_t vals[] = {4194304, -4194304, 0};  // 0.5, -0.5, 0.0
    for (int32_t v : vals) {
      payload.push_back(v & 0xFF);
      payload.push_back((v >> 8) & 0xFF);
      payload.push_back((v >> 16) & 0xFF);
    }
    write_raw_wav(path, 1, 1, 8000, 24, payload);
    const AudioClip c = read_wav(path);
    REQUIRE(c.samples.size() == 3);
    CHECK(std::abs(c.samples[0] - 0.5) < 1e-9);
    CHECK(std::abs(c.samples[1] + 0.5) < 1e-9);
    CHECK(c.samples[2] == 0.0);
  }
  {  // PCM32
    std::vector<unsigned char> payload;
    append_u32(payload, uint32_t(1 << 30));                // 0.5
    append_u32(payload, uint32_t(-(int64_t(1) << 30)));    // -0.5
    write_raw_wav(path, 1, 1, 8000, 32, payload);
    const AudioClip c = read_wav(path);
    REQUIRE(c.samples.size() == 2);
    CHECK(std::abs(c.samples[0] - 0.5) < 1e-9);
    CHECK(std::abs(c.samples[1] + 0.5) < 1e-9);
  }
  {  // float32, via the extensible wrapper
    std::vector<unsigned char> payload(8);
    const float vals[] = {0.25f, -1.0f};
    std::memcpy(payload.data(), vals, 8);
    write_raw_wav(path, 3, 1, 44100, 32, payload, /*extensible=*/true);
    const AudioClip c = read_wav(path);
    CHECK(c.sample_rate == 44100);
    REQUIRE(c.samples.size() == 2);
    CHECK(std::abs(c.samples[0] - 0.25) < 1e-7);
    CHECK(std::abs(c.samples[1] + 1.0) < 1e-7);
  }
  std::filesystem::remove(path);
}

TEST_CASE("stereo input is downmixed by averaging") {
  const std::string path = temp_path("dsd_stereo.wav");
  std::vector<unsigned char> payload;
  // Frame 0: L=0.5, R=-0.5 -> 0. Frame 1: L=0.5, R=0.25 -> 0.375.
  const int16_t vals[] = {16384, -16384, 16384, 8192};
  for (int16_t v : vals) append_u16(payload, uint16_t(v));
  write_raw_wav(path, 1, 2, 16000, 16, payload);
  const AudioClip c = read_wav(path);
  REQUIRE(c.samples.size() == 2);
  CHECK(std::abs(c.samples[0]) < 1e-9);
  CHECK(std::abs(c.samples[1] - 0.375) < 1e-9);
  std::filesystem::remove(path);
}

TEST_CASE("malformed wav files are rejected") {
  const std::string path = temp_path("dsd_bad.wav");
  {
    std::ofstream f(path, std::ios::binary);
    f << "JUNKJUNKJUNKJUNK";
  }
  CHECK_THROWS_AS(read_wav(path), std::runtime_error);
  CHECK_THROWS_AS(read_wav(temp_path("dsd_missing_file.wav")), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("resample length law and DC passthrough") {
  std::vector<double> dc(1000, 0.7);
  const auto up = resample(dc, 8000, 16000);
  CHECK(int64_t(up.size()) == 2000);
  for (double v : up) CHECK(std::abs(v - 0.7) < 1e-6);

  const auto down = resample(dc, 44100, 16000);
  CHECK(int64_t(down.size()) == llround(1000.0 * 16000.0 / 44100.0));
  for (double v : down) CHECK(std::abs(v - 0.7) < 1e-6);

  const auto same = resample(dc, 16000, 16000);
  CHECK(same.size() == dc.size());
  CHECK(same[0] == 0.7);
}

TEST_CASE("resample preserves a mid-band sine") {
  const double in_rate = 48000.0, out_rate = 16000.0, freq = 1000.0;
  std::vector<double> x(4800);
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * M_PI * freq * double(i) / in_rate);
  const auto y = resample(x, in_rate, out_rate);
  REQUIRE(y.size() == 1600);
  // Skip the filter edges, compare against the ideal continuous-time signal.
  double err = 0.0;
  int64_t n = 0;
  for (size_t i = 100; i + 100 < y.size(); ++i) {
    const double ideal = std::sin(2.0 * M_PI * freq * double(i) / out_rate);
    err = std::max(err, std::abs(y[i] - ideal));
    ++n;
  }
  REQUIRE(n > 0);
  CHECK(err < 1e-3);
}

TEST_CASE("bessel_i0 matches reference values") {
  CHECK(bessel_i0(0.0) == 1.0);
  CHECK(std::abs(bessel_i0(1.0) - 1.2660658777520084) < 1e-12);
  CHECK(std::abs(bessel_i0(5.0) - 27.239871823604442) < 1e-9);
}

TEST_CASE("fft matches a naive DFT") {
  Rng rng(12);
  for (int64_t n : {2, 8, 64, 256}) {
    std::vector<std::complex<double>> a(static_cast<size_t>(n));
    for (auto& v : a) v = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    auto b = a;
    fft_pow2(b);
    for (int64_t k = 0; k < n; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (int64_t t = 0; t < n; ++t) {
        const double ang = -2.0 * M_PI * double(k) * double(t) / double(n);
        acc += a[size_t(t)] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      CHECK(std::abs(b[size_t(k)] - acc) < 1e-9 * double(n));
    }
    // Inverse undoes forward.
    auto c = b;
    fft_pow2(c, true);
    for (int64_t t = 0; t < n; ++t) CHECK(std::abs(c[size_t(t)] - a[size_t(t)]) < 1e-10);
  }
}

TEST_CASE("rfft returns the non-redundant half spectrum") {
  Rng rng(13);
  const int64_t n = 128;
  std::vector<double> x(static_cast<size_t>(n));
  for (double& v : x) v = rng.uniform(-1.0, 1.0);
  const auto half = rfft(x.data(), n);
  REQUIRE(int64_t(half.size()) == n / 2 + 1);
  std::vector<std::complex<double>> full(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) full[size_t(i)] = {x[size_t(i)], 0.0};
  fft_pow2(full);
  for (int64_t k = 0; k <= n / 2; ++k) CHECK(std::abs(half[size_t(k)] - full[size_t(k)]) < 1e-9);
}

TEST_CASE("spectrogram shape contract") {
  SpectrogramConfig cfg;
  CHECK(spectrogram_frames(48000, cfg) == 257);

  std::vector<double> x(48000, 0.0);
  const Spectrogram s = log_spectrogram(x, cfg);
  CHECK(s.bins == 257);
  CHECK(s.frames == 257);
  REQUIRE(int64_t(s.values.size()) == s.bins * s.frames);
  const double silence = std::log(1e-7);
  for (double v : s.values) CHECK(std::abs(v - silence) < 1e-9);
}

TEST_CASE("spectrogram frame count follows the hop law") {
  SpectrogramConfig cfg;
  for (int64_t n : {512, 1000, 6000, 16000, 48000}) {
    CHECK(spectrogram_frames(n, cfg) == 1 + n / cfg.hop_length);
    std::vector<double> x(size_t(n), 0.1);
    CHECK(log_spectrogram(x, cfg).frames == spectrogram_frames(n, cfg));
  }
}

TEST_CASE("a 1 kHz tone lands on bin 32") {
  SpectrogramConfig cfg;
  std::vector<double> x(16000);
  for (size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * M_PI * 1000.0 * double(i) / 16000.0);
  const Spectrogram s = log_spectrogram(x, cfg);
  // 1000 Hz at 16 kHz with a 512-point window: 1000/16000*512 = bin 32.
  const int64_t mid = s.frames / 2;
  int64_t best = -1;
  double best_v = -1e30;
  for (int64_t b = 0; b < s.bins; ++b) {
    if (s.at(b, mid) > best_v) {
      best_v = s.at(b, mid);
      best = b;
    }
  }
  CHECK(best == 32);
}

TEST_CASE("to_input_tensor narrows to (1, bins, frames)") {
  Spectrogram s;
  s.bins = 2;
  s.frames = 3;
  s.values = {1, 2, 3, 4, 5, 6};
  const Tensor t = to_input_tensor(s);
  REQUIRE(t.shape() == std::vector<int64_t>{1, 2, 3});
  CHECK(t.data()[0] == 1.0f);
  CHECK(t.data()[5] == 6.0f);
}

TEST_CASE("fix_length repeats short clips cyclically") {
  std::vector<double> clip(32000);
  for (size_t i = 0; i < clip.size(); ++i) clip[i] = double(i);
  const auto out = fix_length(clip, 48000);
  REQUIRE(out.size() == 48000);
  for (int64_t i = 0; i < 32000; ++i) CHECK(out[size_t(i)] == clip[size_t(i)]);
  for (int64_t i = 0; i < 16000; ++i) CHECK(out[size_t(32000 + i)] == clip[size_t(i)]);
}

TEST_CASE("fix_length crops long clips at the middle") {
  std::vector<double> clip(96000);
  for (size_t i = 0; i < clip.size(); ++i) clip[i] = double(i);
  const auto out = fix_length(clip, 48000, CropMode::kMiddle);
  REQUIRE(out.size() == 48000);
  CHECK(out.front() == 24000.0);
  CHECK(out.back() == 71999.0);
}

TEST_CASE("fix_length random crop is seeded and in range") {
  std::vector<double> clip(1000);
  for (size_t i = 0; i < clip.size(); ++i) clip[i] = double(i);
  Rng a(77), b(77), c(78);
  const auto o1 = fix_length(clip, 600, CropMode::kRandom, &a);
  const auto o2 = fix_length(clip, 600, CropMode::kRandom, &b);
  CHECK(o1 == o2);
  REQUIRE(o1.size() == 600);
  const int64_t offset = int64_t(o1[0]);
  CHECK(offset >= 0);
  CHECK(offset <= 400);
  for (size_t i = 0; i < o1.size(); ++i) CHECK(o1[i] == clip[size_t(offset) + i]);
  // A different seed is allowed to pick a different window; over several values
  // at least one must differ or the crop would not be random at all.
  bool any_diff = false;
  for (int trial = 0; trial < 20 && !any_diff; ++trial) {
    any_diff = fix_length(clip, 600, CropMode::kRandom, &c) != o1;
  }
  CHECK(any_diff);
}

TEST_CASE("fix_length of empty input yields silence") {
  const auto out = fix_length({}, 100);
  REQUIRE(out.size() == 100);
  for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("featurize applies the target length before the transform") {
  PipelineConfig cfg;
  cfg.target_samples = 6000;
  std::vector<double> wave(9000, 0.05);
  const Spectrogram s = featurize(wave, cfg);
  CHECK(s.bins == 257);
  CHECK(s.frames == spectrogram_frames(6000, cfg.spectrogram));
}

TEST_CASE("load_waveform resamples and rejects empty audio") {
  const std::string path = temp_path("dsd_load.wav");
  std::vector<double> x(8000, 0.3);
  write_wav_pcm16(path, x, 8000);
  const auto y = load_waveform(path, 16000);
  CHECK(int64_t(y.size()) == 16000);

  write_wav_pcm16(path, {}, 8000);
  CHECK_THROWS_AS(load_waveform(path, 16000), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("spectrogram cache round trips bit-exactly") {
  Rng rng(14);
  Spectrogram s;
  s.bins = 7;
  s.frames = 5;
  s.values.resize(35);
  for (double& v : s.values) v = rng.uniform(-20.0, 5.0);

  const std::string path = temp_path("dsd_spec.cache");
  save_spectrogram(path, s);
  const Spectrogram r = load_spectrogram(path);
  CHECK(r.bins == s.bins);
  CHECK(r.frames == s.frames);
  REQUIRE(r.values.size() == s.values.size());
  for (size_t i = 0; i < s.values.size(); ++i) CHECK(r.values[i] == s.values[i]);
  std::filesystem::remove(path);
}

TEST_CASE("spectrogram cache rejects corruption") {
  Spectrogram s;
  s.bins = 2;
  s.frames = 2;
  s.values = {1, 2, 3, 4};
  const std::string path = temp_path("dsd_spec_bad.cache");
  save_spectrogram(path, s);

  {  // flip the magic
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XX", 2);
  }
  CHECK_THROWS_AS(load_spectrogram(path), std::runtime_error);

  save_spectrogram(path, s);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(load_spectrogram(path), std::runtime_error);

  CHECK_THROWS_AS(load_spectrogram(temp_path("dsd_spec_missing.cache")), std::runtime_error);
  std::filesystem::remove(path);
}
