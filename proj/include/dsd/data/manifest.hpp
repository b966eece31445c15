#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dsd::data {

/// One dataset record. label is 1 for genuine speech, 0 for synthesized.
struct ManifestEntry {
  std::string file_id;
  std::string path;
  int label = 0;
  std::string synthesizer_id;
  std::string language;
  double duration_s = -1.0;  // negative when the manifest omits it

  bool is_real() const { return label == 1; }
  bool operator==(const ManifestEntry&) const = default;
};

// Manifest files are UTF-8 TSV with a fixed header line:
//   file_id  path  label  synthesizer_id  language  [duration_s]
// label is 1/0 and must agree with synthesizer_id ("real" exactly for label
// 1). Malformed records abort the load with the offending line number; a
// duplicate (file_id, synthesizer_id) pair is an error.
std::vector<ManifestEntry> load_manifest(const std::string& path);

/// Writes entries in the same format (duration column included).
void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries);

}  // namespace dsd::data
