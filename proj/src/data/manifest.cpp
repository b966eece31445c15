#include "dsd/data/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dsd::data {

namespace {

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error("manifest: " + path + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}

}  // namespace

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot open " + path);

  std::vector<ManifestEntry> entries;
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  int line_no = 0;
  bool header_checked = false;
  while (std::getline(f, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_checked) {
      header_checked = true;
      if (line.rfind("file_id\t", 0) != 0) fail(path, line_no, "missing header line");
      continue;
    }
    const auto fields = split_tabs(line);
    if (fields.size() < 5 || fields.size() > 6) {
      fail(path, line_no, "expected 5 or 6 tab-separated fields, got " +
                              std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.file_id = fields[0];
    e.path = fields[1];
    if (fields[2] != "0" && fields[2] != "1") fail(path, line_no, "label must be 0 or 1");
    e.label = fields[2] == "1" ? 1 : 0;
    e.synthesizer_id = fields[3];
    e.language = fields[4];
    if (fields.size() == 6 && !fields[5].empty()) {
      try {
        e.duration_s = std::stod(fields[5]);
      } catch (const std::exception&) {
        fail(path, line_no, "bad duration_s value");
      }
    }
    if (e.file_id.empty()) fail(path, line_no, "empty file_id");
    if (e.path.empty()) fail(path, line_no, "empty path");
    if ((e.label == 1) != (e.synthesizer_id == "real")) {
      fail(path, line_no, "label and synthesizer_id disagree");
    }
    if (!seen.insert({e.file_id, e.synthesizer_id}).second) {
      fail(path, line_no, "duplicate (file_id, synthesizer_id)");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_manifest(const std::string& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("manifest: cannot open for writing " + path);
  f << "file_id\tpath\tlabel\tsynthesizer_id\tlanguage\tduration_s\n";
  for (const auto& e : entries) {
    f << e.file_id << '\t' << e.path << '\t' << e.label << '\t' << e.synthesizer_id << '\t'
      << e.language << '\t';
    if (e.duration_s >= 0.0) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%.17g", e.duration_s);
      f << buf;
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("manifest: write failed " + path);
}

}  // namespace dsd::data
