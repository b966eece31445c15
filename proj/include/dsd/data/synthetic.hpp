#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dsd/data/manifest.hpp"

namespace dsd::data {

// Small self-contained audio corpus for end-to-end runs where no external
// dataset exists. Genuine clips are enveloped band-limited noise; two mock
// synthesizers produce tonal material (stacked harmonics, FM chirps), which
// gives a detector a clean but non-trivial separation to learn.
struct SyntheticCorpusConfig {
  std::string out_dir;
  // Genuine clips; every id except the last also gets one fake per mock
  // synthesizer, so fakes follow the same utterance inventory.
  int num_file_ids = 134;
  uint64_t seed = 1234;
  int sample_rate = 16000;
  double min_duration_s = 2.5;
  double max_duration_s = 3.5;
};

/// Writes WAVs plus manifest.tsv under out_dir and returns the entries
/// (absolute paths). Deterministic for a fixed config.
std::vector<ManifestEntry> generate_synthetic_corpus(const SyntheticCorpusConfig& cfg);

}  // namespace dsd::data
