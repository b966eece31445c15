#include "dsd/eval/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "dsd/eval/metrics.hpp"
#include "dsd/nn/tape.hpp"

namespace dsd::eval {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Protocol parse_protocol(const std::string& name) {
  if (name == "inner") return Protocol::kInner;
  if (name == "cross_method") return Protocol::kCrossMethod;
  if (name == "cross_dataset") return Protocol::kCrossDataset;
  if (name == "cross_language") return Protocol::kCrossLanguage;
  throw std::invalid_argument("unknown protocol '" + name +
                              "' (expected inner, cross_method, cross_dataset, cross_language)");
}

const char* protocol_name(Protocol p) {
  switch (p) {
    case Protocol::kInner: return "inner";
    case Protocol::kCrossMethod: return "cross_method";
    case Protocol::kCrossDataset: return "cross_dataset";
    case Protocol::kCrossLanguage: return "cross_language";
  }
  return "?";
}

FeatureFn disk_feature_fn(const audio::PipelineConfig& cfg) {
  return [cfg](const data::ManifestEntry& e) {
    const std::vector<double> wave = audio::load_waveform(e.path, cfg.target_rate);
    return audio::featurize(wave, cfg, audio::CropMode::kMiddle);
  };
}

std::vector<double> score_entries(nn::DetectorModel& model,
                                  const std::vector<data::ManifestEntry>& entries,
                                  const FeatureFn& feature, int64_t batch_size) {
  if (batch_size < 1) throw std::invalid_argument("score_entries: batch_size must be positive");
  std::vector<double> scores(entries.size());
  const int64_t n = static_cast<int64_t>(entries.size());
  for (int64_t start = 0; start < n; start += batch_size) {
    const int64_t b = std::min(batch_size, n - start);
    Tensor batch;
    for (int64_t i = 0; i < b; ++i) {
      const audio::Spectrogram spec = feature(entries[static_cast<size_t>(start + i)]);
      if (i == 0) {
        batch = Tensor({b, 1, spec.bins, spec.frames});
      } else if (spec.bins != batch.dim(2) || spec.frames != batch.dim(3)) {
        throw std::runtime_error("score_entries: inconsistent spectrogram shapes in one batch");
      }
      float* row = batch.data() + i * spec.bins * spec.frames;
      for (size_t k = 0; k < spec.values.size(); ++k) row[k] = static_cast<float>(spec.values[k]);
    }
    nn::Tape tape;
    const auto out = model.forward(tape, batch, false);
    const Tensor& logits = tape.value(out.logit_final);
    for (int64_t i = 0; i < b; ++i) {
      scores[static_cast<size_t>(start + i)] =
          1.0 / (1.0 + std::exp(-static_cast<double>(logits[i])));
    }
  }
  return scores;
}

std::string group_tag(Protocol protocol, const data::ManifestEntry& entry) {
  switch (protocol) {
    case Protocol::kInner: return "all";
    case Protocol::kCrossMethod:
    case Protocol::kCrossDataset: return entry.synthesizer_id;
    case Protocol::kCrossLanguage: return entry.language;
  }
  return "all";
}

std::vector<ScoredClip> score_test_set(nn::DetectorModel& model, Protocol protocol,
                                       const std::vector<data::ManifestEntry>& test,
                                       const FeatureFn& feature, int64_t batch_size) {
  if (test.empty()) throw std::invalid_argument("score_test_set: empty test set");
  const std::vector<double> scores = score_entries(model, test, feature, batch_size);
  std::vector<ScoredClip> clips(test.size());
  for (size_t i = 0; i < test.size(); ++i) {
    clips[i] = {test[i].file_id, group_tag(protocol, test[i]), scores[i], test[i].label};
  }
  return clips;
}

ProtocolReport build_report(Protocol protocol, const std::vector<ScoredClip>& clips) {
  ProtocolReport report;
  report.protocol = protocol_name(protocol);

  const bool synth_groups =
      protocol == Protocol::kCrossMethod || protocol == Protocol::kCrossDataset;

  std::map<std::string, std::vector<size_t>> by_group;
  std::vector<size_t> reals;
  for (size_t i = 0; i < clips.size(); ++i) {
    if (synth_groups && clips[i].label == 1) {
      reals.push_back(i);
    } else {
      by_group[clips[i].group].push_back(i);
    }
  }

  for (const auto& [tag, members] : by_group) {
    std::vector<double> scores;
    std::vector<int> labels;
    scores.reserve(members.size() + reals.size());
    for (const size_t i : members) {
      scores.push_back(clips[i].score);
      labels.push_back(clips[i].label);
    }
    for (const size_t i : reals) {
      scores.push_back(clips[i].score);
      labels.push_back(clips[i].label);
    }
    GroupMetrics g;
    g.group = tag;
    g.count = static_cast<int64_t>(scores.size());
    g.auc = compute_auc(scores, labels);
    g.eer = compute_eer(scores, labels);
    report.groups.push_back(std::move(g));
  }
  if (report.groups.empty()) {
    throw std::runtime_error("build_report: no scoreable group in the test set");
  }

  double auc_sum = 0.0, eer_sum = 0.0;
  for (const GroupMetrics& g : report.groups) {
    auc_sum += g.auc;
    eer_sum += g.eer;
  }
  report.average_auc = auc_sum / static_cast<double>(report.groups.size());
  report.average_eer = eer_sum / static_cast<double>(report.groups.size());
  return report;
}

void save_score_dump(const std::string& path, const std::vector<ScoredClip>& clips) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open score dump '" + path + "' for writing");
  for (const ScoredClip& c : clips) {
    os << c.file_id << '\t' << c.group << '\t' << fixed(c.score, 9) << '\t' << c.label << '\n';
  }
}

std::vector<ScoredClip> load_score_dump(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open score dump '" + path + "'");
  std::vector<ScoredClip> clips;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    // Tab-separated so file ids and group names may contain spaces.
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    const auto bad = [&]() -> std::runtime_error {
      return std::runtime_error("score dump '" + path + "' line " + std::to_string(line_no) +
                                ": malformed record");
    };
    if (fields.size() != 4 || fields[0].empty()) throw bad();
    ScoredClip c;
    c.file_id = fields[0];
    c.group = fields[1];
    try {
      size_t used = 0;
      c.score = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw bad();
    } catch (const std::logic_error&) {
      throw bad();
    }
    if (fields[3] != "0" && fields[3] != "1") throw bad();
    c.label = fields[3] == "1" ? 1 : 0;
    clips.push_back(std::move(c));
  }
  return clips;
}

std::string format_report_table(const ProtocolReport& report) {
  std::vector<std::string> headers = {"metric"};
  for (const GroupMetrics& g : report.groups) headers.push_back(g.group);
  headers.push_back("Average");

  std::vector<std::string> auc_row = {"AUC"};
  std::vector<std::string> eer_row = {"EER"};
  for (const GroupMetrics& g : report.groups) {
    auc_row.push_back(fixed(g.auc, 4));
    eer_row.push_back(fixed(g.eer, 4));
  }
  auc_row.push_back(fixed(report.average_auc, 4));
  eer_row.push_back(fixed(report.average_eer, 4));

  std::vector<size_t> width(headers.size());
  for (size_t c = 0; c < headers.size(); ++c) {
    width[c] = std::max({headers[c].size(), auc_row[c].size(), eer_row[c].size()});
  }
  std::ostringstream os;
  os << "protocol: " << report.protocol << '\n';
  auto emit = [&](const std::vector<std::string>& row) {
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) os << "  ";
      os << row[c] << std::string(width[c] - row[c].size(), ' ');
    }
    os << '\n';
  };
  emit(headers);
  emit(auc_row);
  emit(eer_row);
  return os.str();
}

void save_report(const std::string& path, const ProtocolReport& report) {
  nlohmann::json j;
  j["protocol"] = report.protocol;
  j["average_auc"] = report.average_auc;
  j["average_eer"] = report.average_eer;
  nlohmann::json groups = nlohmann::json::array();
  for (const GroupMetrics& g : report.groups) {
    groups.push_back({{"group", g.group}, {"auc", g.auc}, {"eer", g.eer}, {"count", g.count}});
  }
  j["groups"] = groups;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open report '" + path + "' for writing");
  os << j.dump(2) << '\n';
}

}  // namespace dsd::eval
