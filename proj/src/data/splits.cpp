#include "dsd/data/splits.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <stdexcept>

#include "dsd/core/rng.hpp"

namespace dsd::data {

namespace {

void check_ratios(const double* ratios, size_t n) {
  double sum = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (ratios[i] < 0.0) throw std::runtime_error("splits: negative ratio");
    sum += ratios[i];
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::runtime_error("splits: ratios must sum to 1");
}

/// Unique file IDs in first-appearance order.
std::vector<std::string> unique_ids(const std::vector<ManifestEntry>& entries) {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (seen.insert(e.file_id).second) ids.push_back(e.file_id);
  }
  return ids;
}

/// Maps each ID to a bucket index after a seeded shuffle.
std::map<std::string, int> assign_ids(std::vector<std::string> ids,
                                      const std::vector<double>& ratios, Rng& rng) {
  rng.shuffle(ids);
  const auto sizes = largest_remainder_sizes(static_cast<int64_t>(ids.size()), ratios);
  std::map<std::string, int> bucket;
  size_t pos = 0;
  for (size_t b = 0; b < sizes.size(); ++b) {
    for (int64_t k = 0; k < sizes[b]; ++k) bucket[ids[pos++]] = static_cast<int>(b);
  }
  return bucket;
}

std::set<std::string> id_set(const std::vector<ManifestEntry>& entries,
                             int label_filter /* -1 = all */) {
  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (label_filter < 0 || e.label == label_filter) ids.insert(e.file_id);
  }
  return ids;
}

bool disjoint(const std::set<std::string>& a, const std::set<std::string>& b) {
  for (const auto& x : a) {
    if (b.count(x)) return false;
  }
  return true;
}

}  // namespace

std::vector<int64_t> largest_remainder_sizes(int64_t n, const std::vector<double>& ratios) {
  check_ratios(ratios.data(), ratios.size());
  std::vector<int64_t> sizes(ratios.size());
  std::vector<std::pair<double, size_t>> remainders;
  int64_t assigned = 0;
  for (size_t i = 0; i < ratios.size(); ++i) {
    const double exact = ratios[i] * static_cast<double>(n);
    sizes[i] = static_cast<int64_t>(std::floor(exact));
    assigned += sizes[i];
    remainders.push_back({exact - std::floor(exact), i});
  }
  // Largest remainder first; equal remainders break toward the earlier bucket.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int64_t k = 0; k < n - assigned; ++k) sizes[remainders[static_cast<size_t>(k)].second]++;
  return sizes;
}

std::vector<std::string> build_synth_vocab(const std::vector<ManifestEntry>& train) {
  std::set<std::string> synths;
  for (const auto& e : train) {
    if (!e.is_real()) synths.insert(e.synthesizer_id);
  }
  std::vector<std::string> vocab = {"real"};
  vocab.insert(vocab.end(), synths.begin(), synths.end());
  return vocab;
}

void validate_split(const SplitSet& split, IdDisjointness policy) {
  if (split.synthesizer_vocab.empty() || split.synthesizer_vocab[0] != "real") {
    throw std::runtime_error("splits: synthesizer_vocab[0] must be \"real\"");
  }
  std::set<std::string> vocab(split.synthesizer_vocab.begin(), split.synthesizer_vocab.end());
  for (const auto& e : split.train) {
    if (!vocab.count(e.synthesizer_id)) {
      throw std::runtime_error("splits: train synthesizer missing from vocab: " +
                               e.synthesizer_id);
    }
  }
  if (policy == IdDisjointness::kGlobal) {
    const auto tr = id_set(split.train, -1);
    const auto va = id_set(split.validation, -1);
    const auto te = id_set(split.test, -1);
    if (!disjoint(tr, va) || !disjoint(tr, te) || !disjoint(va, te)) {
      throw std::runtime_error("splits: file_id appears in more than one split");
    }
  } else {
    for (const int label : {1, 0}) {
      const auto tr = id_set(split.train, label);
      const auto va = id_set(split.validation, label);
      if (!disjoint(tr, va)) {
        throw std::runtime_error("splits: train/validation share a file_id within a class");
      }
      if (label == 1) {
        const auto te = id_set(split.test, label);
        if (!disjoint(tr, te) || !disjoint(va, te)) {
          throw std::runtime_error("splits: real file_id leaks into test");
        }
      }
    }
  }
}

SplitSet split_inner(const std::vector<ManifestEntry>& entries,
                     const std::array<double, 3>& ratios, uint64_t seed) {
  check_ratios(ratios.data(), 3);
  auto ids = unique_ids(entries);
  int64_t nonzero_buckets = 0;
  for (const double r : ratios) {
    if (r > 0.0) ++nonzero_buckets;
  }
  if (static_cast<int64_t>(ids.size()) < nonzero_buckets) {
    throw std::runtime_error("splits: need at least as many unique file_ids as splits");
  }
  Rng rng(seed);
  const auto bucket = assign_ids(std::move(ids), {ratios[0], ratios[1], ratios[2]}, rng);
  SplitSet out;
  for (const auto& e : entries) {
    switch (bucket.at(e.file_id)) {
      case 0: out.train.push_back(e); break;
      case 1: out.validation.push_back(e); break;
      default: out.test.push_back(e); break;
    }
  }
  out.synthesizer_vocab = build_synth_vocab(out.train);
  validate_split(out, IdDisjointness::kGlobal);
  return out;
}

SplitSet split_cross_method(const std::vector<ManifestEntry>& entries,
                            const std::set<std::string>& train_synths,
                            const std::array<double, 3>& real_ratios,
                            const std::array<double, 2>& fake_ratios, uint64_t seed) {
  check_ratios(real_ratios.data(), 3);
  check_ratios(fake_ratios.data(), 2);
  if (train_synths.empty()) throw std::runtime_error("splits: train_synths empty");
  std::set<std::string> all_synths;
  for (const auto& e : entries) {
    if (!e.is_real()) all_synths.insert(e.synthesizer_id);
  }
  for (const auto& s : train_synths) {
    if (!all_synths.count(s)) throw std::runtime_error("splits: unknown synthesizer " + s);
  }
  if (train_synths.size() == all_synths.size()) {
    throw std::runtime_error("splits: train_synths covers every synthesizer, test would be empty");
  }

  std::vector<ManifestEntry> reals;
  std::vector<ManifestEntry> train_fakes;
  std::vector<ManifestEntry> held_out_fakes;
  for (const auto& e : entries) {
    if (e.is_real()) {
      reals.push_back(e);
    } else if (train_synths.count(e.synthesizer_id)) {
      train_fakes.push_back(e);
    } else {
      held_out_fakes.push_back(e);
    }
  }

  Rng rng(seed);
  const auto real_bucket = assign_ids(
      unique_ids(reals), {real_ratios[0], real_ratios[1], real_ratios[2]}, rng);
  const auto fake_bucket =
      assign_ids(unique_ids(train_fakes), {fake_ratios[0], fake_ratios[1]}, rng);

  SplitSet out;
  for (const auto& e : reals) {
    switch (real_bucket.at(e.file_id)) {
      case 0: out.train.push_back(e); break;
      case 1: out.validation.push_back(e); break;
      default: out.test.push_back(e); break;
    }
  }
  for (const auto& e : train_fakes) {
    if (fake_bucket.at(e.file_id) == 0) {
      out.train.push_back(e);
    } else {
      out.validation.push_back(e);
    }
  }
  out.test.insert(out.test.end(), held_out_fakes.begin(), held_out_fakes.end());
  out.synthesizer_vocab = build_synth_vocab(out.train);
  validate_split(out, IdDisjointness::kPerClass);
  return out;
}

std::vector<ManifestEntry> oversample_real(const std::vector<ManifestEntry>& entries,
                                           uint64_t seed) {
  std::vector<size_t> real_idx;
  int64_t fakes = 0;
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].is_real()) {
      real_idx.push_back(i);
    } else {
      ++fakes;
    }
  }
  const int64_t reals = static_cast<int64_t>(real_idx.size());
  if (reals == 0 || fakes == 0) {
    throw std::runtime_error("splits: oversampling needs both classes present");
  }

  Rng rng(seed);
  std::vector<ManifestEntry> out = entries;
  if (reals < fakes) {
    const int64_t extra = fakes - reals;
    const int64_t full_copies = extra / reals;
    const int64_t remainder = extra % reals;
    for (int64_t c = 0; c < full_copies; ++c) {
      for (const size_t i : real_idx) out.push_back(entries[i]);
    }
    auto sampled = real_idx;
    rng.shuffle(sampled);
    for (int64_t k = 0; k < remainder; ++k) out.push_back(entries[sampled[static_cast<size_t>(k)]]);
  }
  rng.shuffle(out);
  return out;
}

void save_split(const std::string& path, const SplitSet& split) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("splits: cannot open for writing " + path);
  f << "split\tfile_id\tpath\tlabel\tsynthesizer_id\tlanguage\tduration_s\n";
  auto dump = [&f](const char* name, const std::vector<ManifestEntry>& part) {
    for (const auto& e : part) {
      f << name << '\t' << e.file_id << '\t' << e.path << '\t' << e.label << '\t'
        << e.synthesizer_id << '\t' << e.language << '\t';
      if (e.duration_s >= 0.0) f << e.duration_s;
      f << '\n';
    }
  };
  dump("train", split.train);
  dump("validation", split.validation);
  dump("test", split.test);
  if (!f) throw std::runtime_error("splits: write failed " + path);
}

}  // namespace dsd::data
