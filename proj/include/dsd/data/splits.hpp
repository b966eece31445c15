#pragma once

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dsd/data/manifest.hpp"

namespace dsd::data {

/// Train/validation/test partition plus the synthesizer vocabulary the
/// synthesizer head trains against. vocab[0] is always "real".
struct SplitSet {
  std::vector<ManifestEntry> train;
  std::vector<ManifestEntry> validation;
  std::vector<ManifestEntry> test;
  std::vector<std::string> synthesizer_vocab;

  int64_t num_synth_classes() const {
    return static_cast<int64_t>(synthesizer_vocab.size()) - 1;
  }
};

// How strictly file IDs must separate across splits. Same-source protocols
// demand global disjointness. The cross-method protocol reuses the utterance
// inventory for held-out synthesizers by design, so there disjointness holds
// per class, with test fakes exempt (they are other synthesizers voicing the
// same utterances).
enum class IdDisjointness { kGlobal, kPerClass };

/// Throws std::runtime_error when the split violates the policy or the
/// vocabulary invariants.
void validate_split(const SplitSet& split, IdDisjointness policy);

/// "real" first, then the train split's other synthesizers lexicographically.
std::vector<std::string> build_synth_vocab(const std::vector<ManifestEntry>& train);

// Partition unique file IDs by ratio after a seeded shuffle; every entry
// follows its file ID, so fakes stay with their source utterance. Ratios use
// largest-remainder rounding.
SplitSet split_inner(const std::vector<ManifestEntry>& entries,
                     const std::array<double, 3>& ratios, uint64_t seed);

// Synthesizer-holdout protocol: reals split by ID at real_ratios; fakes from
// train_synths split by ID at fake_ratios into train/validation; fakes from
// every other synthesizer all go to test.
SplitSet split_cross_method(const std::vector<ManifestEntry>& entries,
                            const std::set<std::string>& train_synths,
                            const std::array<double, 3>& real_ratios,
                            const std::array<double, 2>& fake_ratios, uint64_t seed);

// Duplicate real entries (whole-set repetition, remainder sampled without
// replacement) until the classes balance, then shuffle the combined list.
// Already balanced or real-heavy input passes through with only the shuffle.
std::vector<ManifestEntry> oversample_real(const std::vector<ManifestEntry>& entries,
                                           uint64_t seed);

/// Audit dump: manifest format with a leading split column.
void save_split(const std::string& path, const SplitSet& split);

/// Largest-remainder apportionment of n items into ratio-sized buckets.
std::vector<int64_t> largest_remainder_sizes(int64_t n, const std::vector<double>& ratios);

}  // namespace dsd::data
