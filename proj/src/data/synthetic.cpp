#include "dsd/data/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <vector>

#include "dsd/audio/wav.hpp"
#include "dsd/core/rng.hpp"

namespace dsd::data {

namespace {

namespace fs = std::filesystem;

std::string clip_name(int id) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "clip%03d", id);
  return buf;
}

/// Enveloped band-limited noise standing in for genuine speech.
std::vector<double> render_real(Rng& rng, int64_t n, double rate) {
  const double cutoff = rng.uniform(1000.0, 6000.0);
  const double env_hz = rng.uniform(0.3, 1.5);
  const double env_phase = rng.uniform(0.0, 2.0 * M_PI);
  // One-pole lowpass coefficient for the drawn cutoff.
  const double a = std::exp(-2.0 * M_PI * cutoff / rate);
  std::vector<double> x(static_cast<size_t>(n));
  double state = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double white = rng.uniform(-1.0, 1.0);
    state = a * state + (1.0 - a) * white;
    const double t = i / rate;
    const double env = 0.55 + 0.35 * std::sin(2.0 * M_PI * env_hz * t + env_phase);
    x[static_cast<size_t>(i)] = 4.0 * state * env;
  }
  double peak = 1e-9;
  for (const double v : x) peak = std::max(peak, std::abs(v));
  for (double& v : x) v *= 0.5 / peak;
  return x;
}

/// Mock synthesizer one: stacked harmonics with light vibrato.
std::vector<double> render_harmonic_stack(Rng& rng, int64_t n, double rate) {
  const double f0 = rng.uniform(120.0, 400.0);
  const double vib_hz = rng.uniform(3.0, 7.0);
  const double vib_depth = rng.uniform(0.0, 0.01);
  const double phase0 = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  for (int64_t i = 0; i < n; ++i) {
    const double t = i / rate;
    const double f = f0 * (1.0 + vib_depth * std::sin(2.0 * M_PI * vib_hz * t));
    double v = 0.0;
    for (int h = 1; h <= 6; ++h) {
      v += std::sin(2.0 * M_PI * f * h * t + phase0 * h) / h;
    }
    x[static_cast<size_t>(i)] = 0.25 * v + 0.01 * rng.uniform(-1.0, 1.0);
  }
  return x;
}

/// Mock synthesizer two: FM carrier plus a steady secondary tone.
std::vector<double> render_fm_chirp(Rng& rng, int64_t n, double rate) {
  const double carrier = rng.uniform(500.0, 3000.0);
  const double dev = rng.uniform(50.0, 300.0);
  const double mod_hz = rng.uniform(2.0, 8.0);
  const double second = rng.uniform(300.0, 1200.0);
  const double phase0 = rng.uniform(0.0, 2.0 * M_PI);
  std::vector<double> x(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    const double t = i / rate;
    const double inst = carrier * t + (dev / (2.0 * M_PI * mod_hz)) *
                                          std::sin(2.0 * M_PI * mod_hz * t);
    const double v = 0.5 * std::sin(2.0 * M_PI * inst + phase0) +
                     0.2 * std::sin(2.0 * M_PI * second * t);
    x[static_cast<size_t>(i)] = v + 0.01 * rng.uniform(-1.0, 1.0);
  }
  return x;
}

}  // namespace

std::vector<ManifestEntry> generate_synthetic_corpus(const SyntheticCorpusConfig& cfg) {
  const fs::path root(cfg.out_dir);
  const fs::path wav_dir = root / "wav";
  fs::create_directories(wav_dir);

  Rng master(cfg.seed);
  std::vector<ManifestEntry> entries;

  auto emit = [&](const std::string& file_id, const std::string& synth, int label,
                  const std::string& language) {
    Rng rng = master.derive(file_id + ":" + synth);
    const double dur = rng.uniform(cfg.min_duration_s, cfg.max_duration_s);
    // A few genuine clips are written at half rate to keep the resampling
    // path honest in end-to-end runs.
    const bool half_rate = label == 1 && (entries.size() % 16 == 7);
    const double rate = half_rate ? cfg.sample_rate / 2.0 : cfg.sample_rate;
    const int64_t n = static_cast<int64_t>(std::llround(dur * rate));
    std::vector<double> samples;
    if (label == 1) {
      samples = render_real(rng, n, rate);
    } else if (synth == "harmonic_stack") {
      samples = render_harmonic_stack(rng, n, rate);
    } else {
      samples = render_fm_chirp(rng, n, rate);
    }
    const fs::path path = wav_dir / (file_id + "_" + synth + ".wav");
    audio::write_wav_pcm16(path.string(), samples, static_cast<int>(rate));
    ManifestEntry e;
    e.file_id = file_id;
    e.path = fs::absolute(path).string();
    e.label = label;
    e.synthesizer_id = synth;
    e.language = language;
    e.duration_s = dur;
    entries.push_back(std::move(e));
  };

  for (int id = 0; id < cfg.num_file_ids; ++id) {
    const std::string file_id = clip_name(id);
    const std::string language = id % 2 == 0 ? "en" : "de";
    emit(file_id, "real", 1, language);
    if (id + 1 < cfg.num_file_ids) {
      emit(file_id, "harmonic_stack", 0, language);
      emit(file_id, "fm_chirp", 0, language);
    }
  }

  save_manifest((root / "manifest.tsv").string(), entries);
  return entries;
}

}  // namespace dsd::data
