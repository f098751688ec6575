#pragma once

// Maliciousness scoring for binary strings. Scores come from an optional
// external table (text -> score) and otherwise from an additive rule table.

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "regionscan/error.hpp"
#include "regionscan/snapshot.hpp"

namespace regionscan {

inline constexpr double kMinStringScore = 0.0;
inline constexpr double kMaxStringScore = 10.0;

struct RankedString {
  std::string text;
  double score = 0.0;
  std::vector<Address> ref_addrs;

  bool operator==(const RankedString&) const = default;
};

using ScoreOverrides = std::map<std::string, double, std::less<>>;

enum class StringRule {
  ExecutableName,
  NetworkPattern,
  RegistryPath,
  AutorunKey,
  IpLiteral,
  SuspiciousApi,
};

struct RuleWeight {
  StringRule rule;
  double weight;
};

inline constexpr double kBaseStringScore = 1.0;
inline constexpr std::array<RuleWeight, 6> kStringRuleWeights{{
    {StringRule::ExecutableName, 4.0},
    {StringRule::NetworkPattern, 4.0},
    {StringRule::RegistryPath, 2.0},
    {StringRule::AutorunKey, 4.0},
    {StringRule::IpLiteral, 3.0},
    {StringRule::SuspiciousApi, 2.0},
}};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline bool contains_any(const std::string& haystack, std::initializer_list<std::string_view> needles) {
  return std::any_of(needles.begin(), needles.end(),
                     [&](std::string_view n) { return haystack.find(n) != std::string::npos; });
}

}  // namespace detail

/// Rule categories a string falls into.
inline std::vector<StringRule> matching_rules(std::string_view text) {
  static const std::regex exe_name(R"([A-Za-z0-9_\-.]+\.(exe|dll|scr|sys|bat|cmd|vbs|ps1|com|pif)\b)",
                                   std::regex::icase);
  static const std::regex url(R"((https?|ftp)://)", std::regex::icase);
  static const std::regex ipv4(R"((^|[^0-9.])(25[0-5]|2[0-4]\d|1?\d?\d)(\.(25[0-5]|2[0-4]\d|1?\d?\d)){3}($|[^0-9.]))");

  const std::string s(text);
  const std::string low = detail::lower(text);
  std::vector<StringRule> rules;
  if (std::regex_search(s, exe_name)) rules.push_back(StringRule::ExecutableName);
  if (std::regex_search(s, url) || low.rfind("connect ", 0) == 0 || detail::contains_any(low, {"http/1.", "proxy-"})) {
    rules.push_back(StringRule::NetworkPattern);
  }
  if (detail::contains_any(low, {"software\\", "system\\currentcontrolset", "hkey_", "hklm\\", "hkcu\\"})) {
    rules.push_back(StringRule::RegistryPath);
  }
  if (detail::contains_any(low, {"currentversion\\run", "currentversion\\policies\\explorer\\run", "winlogon\\shell",
                                 "winlogon\\userinit", "stubpath", "image file execution options"})) {
    rules.push_back(StringRule::AutorunKey);
  }
  if (std::regex_search(s, ipv4)) rules.push_back(StringRule::IpLiteral);
  if (detail::contains_any(low, {"virtualalloc", "writeprocessmemory", "createremotethread", "loadlibrary",
                                 "getprocaddress", "shellexecute", "winexec", "urldownloadtofile", "internetopen",
                                 "regsetvalue", "setwindowshookex", "isdebuggerpresent", "cryptencrypt",
                                 "openprocess", "ntunmapviewofsection"})) {
    rules.push_back(StringRule::SuspiciousApi);
  }
  return rules;
}

/// Base score plus the weight of every matching rule, clamped to [0, 10].
inline double heuristic_score(std::string_view text) {
  double score = kBaseStringScore;
  for (StringRule r : matching_rules(text)) {
    for (const auto& rw : kStringRuleWeights)
      if (rw.rule == r) score += rw.weight;
  }
  return std::clamp(score, kMinStringScore, kMaxStringScore);
}

/// Parses a JSON object {"text": score, ...}; scores must lie in [0, 10].
inline ScoreOverrides parse_score_overrides(std::string_view raw) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw OverrideFormatError(std::string("string score file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw OverrideFormatError("string score file must be a JSON object");
  ScoreOverrides out;
  for (const auto& [text, value] : doc.items()) {
    if (!value.is_number()) throw OverrideFormatError("score for '" + text + "' is not a number");
    const double v = value.get<double>();
    if (!(v >= kMinStringScore && v <= kMaxStringScore)) {
      throw OverrideFormatError("score for '" + text + "' is outside [0, 10]");
    }
    out.emplace(text, v);
  }
  return out;
}

inline ScoreOverrides load_score_overrides(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw OverrideFormatError("cannot open string score file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_score_overrides(buf.str());
}

/// Scores every string and sorts by descending score, then ascending text.
inline std::vector<RankedString> rank_strings(const std::vector<StringEntry>& strings,
                                              const ScoreOverrides* overrides = nullptr) {
  std::vector<RankedString> out;
  out.reserve(strings.size());
  for (const auto& s : strings) {
    double score = 0.0;
    if (overrides) {
      if (auto it = overrides->find(s.text); it != overrides->end()) {
        score = it->second;
      } else {
        score = heuristic_score(s.text);
      }
    } else {
      score = heuristic_score(s.text);
    }
    out.push_back({s.text, score, s.ref_addrs});
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedString& a, const RankedString& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.text < b.text;
  });
  return out;
}

}  // namespace regionscan
