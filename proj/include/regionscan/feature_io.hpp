#pragma once

// Feature files (one CSV record per binary: id, label, values), label
// sidecars, the IDF table file, and the stratified train/test split.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regionscan/classifier/matrix.hpp"
#include "regionscan/error.hpp"
#include "regionscan/features.hpp"
#include "regionscan/pipeline.hpp"

namespace regionscan {

/// Shortest decimal text that round-trips the double.
inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_real(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

inline std::string feature_record(const std::string& binary_id, int label, const FeatureVector& v) {
  if (binary_id.find_first_of(",\n\r") != std::string::npos) {
    throw DataError("binary id '" + binary_id + "' cannot be written to a feature file");
  }
  std::string line = binary_id + "," + std::to_string(label);
  for (double x : v) {
    line += ',';
    line += format_real(x);
  }
  return line;
}

struct FeatureSet {
  std::vector<std::string> ids;
  std::vector<int> labels;
  nn::Matrix x;
};

inline FeatureSet parse_feature_file(std::istream& in) {
  FeatureSet fs;
  std::vector<double> values;
  std::string line;
  std::size_t width = 0, lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_fields(t);
    if (fields.size() < 3) throw DataError("feature file line " + std::to_string(lineno) + ": too few fields");
    const std::size_t w = fields.size() - 2;
    if (width == 0) width = w;
    if (w != width) throw DataError("feature file line " + std::to_string(lineno) + ": inconsistent width");
    int label = 0;
    if (fields[1] == "0") {
      label = 0;
    } else if (fields[1] == "1") {
      label = 1;
    } else {
      throw DataError("feature file line " + std::to_string(lineno) + ": label must be 0 or 1");
    }
    fs.ids.emplace_back(fields[0]);
    fs.labels.push_back(label);
    for (std::size_t k = 2; k < fields.size(); ++k) values.push_back(parse_real(fields[k]));
  }
  fs.x.rows = fs.ids.size();
  fs.x.cols = width;
  fs.x.data = std::move(values);
  return fs;
}

inline FeatureSet load_feature_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file '" + path + "'");
  return parse_feature_file(in);
}

/// binary_id -> label from "binary_id,label" lines; a leading header line is
/// skipped.
inline std::map<std::string, int> parse_labels(std::istream& in) {
  std::map<std::string, int> labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty()) continue;
    const auto fields = split_fields(t);
    if (fields.size() != 2) throw DataError("label file line " + std::to_string(lineno) + ": expected id,label");
    const auto id = trim(fields[0]);
    const auto lab = trim(fields[1]);
    if (lineno == 1 && id == "binary_id") continue;
    if (id.empty()) throw DataError("label file line " + std::to_string(lineno) + ": empty binary id");
    if (lab != "0" && lab != "1") throw DataError("label file line " + std::to_string(lineno) + ": label must be 0 or 1");
    if (!labels.emplace(std::string(id), lab == "1" ? 1 : 0).second) {
      throw DataError("label file line " + std::to_string(lineno) + ": duplicate id '" + std::string(id) + "'");
    }
  }
  return labels;
}

inline std::map<std::string, int> load_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open label file '" + path + "'");
  return parse_labels(in);
}

// ---------------------------------------------------------------------------
// IDF table file: the table plus the extraction config it was built with.

inline constexpr const char* kIdfFormat = "regionscan-idf";

inline void save_idf(const IdfTable& idf, const ExtractionConfig& cfg, const std::string& path) {
  nlohmann::json j = to_json(idf);
  j["format"] = kIdfFormat;
  j["version"] = 1;
  j["config"] = to_json(cfg);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write IDF file '" + path + "'");
  out << j.dump() << '\n';
}

inline std::pair<IdfTable, ExtractionConfig> load_idf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open IDF file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("IDF file is not valid JSON: ") + e.what());
  }
  if (j.value("format", std::string()) != kIdfFormat) throw DataError("IDF file: unexpected format");
  ExtractionConfig cfg;
  try {
    const auto& c = j.at("config");
    cfg.levels = c.at("levels").get<int>();
    cfg.max_regions = c.at("max_regions").get<std::size_t>();
    cfg.trigrams = c.at("trigrams").get<std::size_t>();
    cfg.trigram_dim = c.at("trigram_dim").get<std::size_t>();
    cfg.seq_dim = c.at("seq_dim").get<std::size_t>();
    cfg.sig_dim = c.at("sig_dim").get<std::size_t>();
    cfg.whole_sig_dim = c.at("whole_sig_dim").get<std::size_t>();
    cfg.ratio_threshold = c.at("ratio_threshold").get<double>();
    cfg.max_functions = c.at("max_functions").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("IDF file config: ") + e.what());
  }
  return {idf_from_json(j), cfg};
}

// ---------------------------------------------------------------------------
// Stratified split

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded, stratified split. The training set receives round(fraction * n)
/// rows, apportioned across classes by largest remainder (ties to the lower
/// label); every class keeps at least one row on each side.
inline Split stratified_split(const std::vector<int>& labels, double fraction, std::uint64_t seed) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t k = 0; k < labels.size(); ++k) by_class[labels[k]].push_back(k);
  if (by_class.size() < 2) throw DataError("split: both classes must be present");
  for (const auto& [label, rows] : by_class) {
    if (rows.size() < 2) throw DataError("split: class " + std::to_string(label) + " needs at least 2 samples");
  }
  const auto total_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(labels.size())));
  std::map<int, std::size_t> quota;
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (const auto& [label, rows] : by_class) {
    const double exact = fraction * static_cast<double>(rows.size());
    quota[label] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[label];
    remainders.emplace_back(exact - std::floor(exact), label);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total_train && k < remainders.size(); ++k, ++assigned) ++quota[remainders[k].second];
  for (auto& [label, q] : quota) q = std::clamp<std::size_t>(q, 1, by_class[label].size() - 1);

  nn::Rng rng(seed);
  Split sp;
  for (auto& [label, rows] : by_class) {
    rng.shuffle(rows);
    sp.train.insert(sp.train.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(quota[label]));
    sp.test.insert(sp.test.end(), rows.begin() + static_cast<std::ptrdiff_t>(quota[label]), rows.end());
  }
  rng.shuffle(sp.train);
  rng.shuffle(sp.test);
  return sp;
}

}  // namespace regionscan
