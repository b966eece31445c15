#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dsd/audio/pipeline.hpp"
#include "dsd/data/manifest.hpp"
#include "dsd/nn/model.hpp"

namespace dsd::eval {

enum class Protocol { kInner, kCrossMethod, kCrossDataset, kCrossLanguage };

/// Accepts inner, cross_method, cross_dataset, cross_language.
Protocol parse_protocol(const std::string& name);
const char* protocol_name(Protocol p);

/// One scored test clip with its report group tag.
struct ScoredClip {
  std::string file_id;
  std::string group;
  double score = 0.0;
  int label = 0;
};

struct GroupMetrics {
  std::string group;
  double auc = 0.0;
  double eer = 0.0;
  int64_t count = 0;
};

struct ProtocolReport {
  std::string protocol;
  std::vector<GroupMetrics> groups;
  double average_auc = 0.0;
  double average_eer = 0.0;
};

/// Supplies the evaluation-time feature of a clip (middle crop, no
/// transforms). Lets callers plug in waveform caches or a spectrogram cache.
using FeatureFn = std::function<audio::Spectrogram(const data::ManifestEntry&)>;

/// Loads the file and featurizes with the middle crop.
FeatureFn disk_feature_fn(const audio::PipelineConfig& cfg);

// Final-head sigmoid score per entry, batched eval-mode forwards, entry order
// preserved.
std::vector<double> score_entries(nn::DetectorModel& model,
                                  const std::vector<data::ManifestEntry>& entries,
                                  const FeatureFn& feature, int64_t batch_size);

// Group tag of one entry under a protocol: "all" for inner, the synthesizer
// id for the cross-method and cross-dataset layouts ("real" for genuine
// clips), the language tag for cross-language.
std::string group_tag(Protocol protocol, const data::ManifestEntry& entry);

std::vector<ScoredClip> score_test_set(nn::DetectorModel& model, Protocol protocol,
                                       const std::vector<data::ManifestEntry>& test,
                                       const FeatureFn& feature, int64_t batch_size);

// Per-group AUC/EER plus their arithmetic means. Synthesizer-tagged groups
// are each evaluated against every real clip; language groups stand alone and
// need both classes internally. Groups appear in sorted tag order.
ProtocolReport build_report(Protocol protocol, const std::vector<ScoredClip>& clips);

/// Line format: file_id group score label, tab separated, %.9f scores.
void save_score_dump(const std::string& path, const std::vector<ScoredClip>& clips);
std::vector<ScoredClip> load_score_dump(const std::string& path);

/// Aligned text table, groups as columns, AUC and EER rows, Average last.
std::string format_report_table(const ProtocolReport& report);

/// Machine-readable JSON alongside the table text.
void save_report(const std::string& path, const ProtocolReport& report);

}  // namespace dsd::eval
