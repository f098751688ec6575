#include <gtest/gtest.h>

#include "support.hpp"

using namespace regionscan;

namespace {

const char* kRunKey = "SOFTWARE\\Microsoft\\Windows\\CurrentVersion\\Run";

std::vector<StringEntry> scored_strings() {
  return {{"StubPath", {1}}, {"hello world", {2}}, {kRunKey, {3}}, {"CONNECT %s:%i HTTP/1.0", {4}}, {"Vmx32to6.exe", {5}}};
}

}  // namespace

TEST(StringRanker, OverrideFileFixesScoresAndOrder) {
  const auto ov = load_score_overrides(rs_test::fixture_path("string_scores.json"));
  const auto ranked = rank_strings(scored_strings(), &ov);
  ASSERT_EQ(ranked.size(), 5u);
  EXPECT_EQ(ranked[0].text, "Vmx32to6.exe");
  EXPECT_DOUBLE_EQ(ranked[0].score, 9.90);
  EXPECT_EQ(ranked[1].text, "CONNECT %s:%i HTTP/1.0");
  EXPECT_DOUBLE_EQ(ranked[1].score, 9.57);
  EXPECT_EQ(ranked[2].text, kRunKey);
  EXPECT_DOUBLE_EQ(ranked[2].score, 9.56);
  EXPECT_EQ(ranked[3].text, "StubPath");
  EXPECT_DOUBLE_EQ(ranked[3].score, 7.60);
  EXPECT_EQ(ranked[4].text, "hello world");
  EXPECT_EQ(ranked[2].ref_addrs, std::vector<Address>{3});
}

TEST(StringRanker, HeuristicScoresRepresentativeStrings) {
  EXPECT_GE(heuristic_score(kRunKey), 7.0);
  EXPECT_DOUBLE_EQ(heuristic_score(kRunKey), 7.0);
  EXPECT_DOUBLE_EQ(heuristic_score("Vmx32to6.exe"), 5.0);
  EXPECT_DOUBLE_EQ(heuristic_score("CONNECT %s:%i HTTP/1.0"), 5.0);
  EXPECT_DOUBLE_EQ(heuristic_score("10.13.37.1"), 4.0);
  EXPECT_DOUBLE_EQ(heuristic_score("http://185.44.12.7/gate.php"), 8.0);
  EXPECT_DOUBLE_EQ(heuristic_score("Press any key"), kBaseStringScore);
  EXPECT_DOUBLE_EQ(heuristic_score(""), kBaseStringScore);
  EXPECT_DOUBLE_EQ(heuristic_score("version 2.1.4"), kBaseStringScore);  // not four octets
}

TEST(StringRanker, ScoresStayInRangeAndOrderIsTotal) {
  nn::Rng rng(5);
  const std::string alphabet = "abcXYZ019.:/\\%sexeHTTPrun ";
  std::vector<StringEntry> strings;
  for (int k = 0; k < 400; ++k) {
    std::string s;
    const auto len = rng.below(40);
    for (std::uint64_t i = 0; i < len; ++i) s += alphabet[rng.below(alphabet.size())];
    strings.push_back({s, {}});
  }
  strings.push_back({"http://1.2.3.4/Run.exe CurrentVersion\\Run SOFTWARE\\ VirtualAlloc", {}});
  const auto ranked = rank_strings(strings);
  ASSERT_EQ(ranked.size(), strings.size());
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    EXPECT_GE(ranked[k].score, 0.0);
    EXPECT_LE(ranked[k].score, 10.0);
    if (k > 0) {
      const auto& a = ranked[k - 1];
      const auto& b = ranked[k];
      EXPECT_TRUE(a.score > b.score || (a.score == b.score && a.text <= b.text));
    }
  }
  EXPECT_DOUBLE_EQ(heuristic_score(strings.back().text), 10.0);
}

TEST(StringRanker, AppendingAnIndicatorNeverLowersTheScore) {
  nn::Rng rng(9);
  const std::vector<std::string> base{"abc", "settings", "output.log", "x", "%s\\%s", "StubPath"};
  const std::vector<std::string> indicators{" evil.exe", " http://a", " 8.8.8.8", " WriteProcessMemory",
                                            " SOFTWARE\\x", " CurrentVersion\\Run"};
  for (const auto& b : base)
    for (const auto& i : indicators) EXPECT_GE(heuristic_score(b + i), heuristic_score(b)) << b << i;
}

TEST(StringRanker, OverrideValidation) {
  EXPECT_THROW(parse_score_overrides("[1,2]"), OverrideFormatError);
  EXPECT_THROW(parse_score_overrides("{\"a\": \"high\"}"), OverrideFormatError);
  EXPECT_THROW(parse_score_overrides("{\"a\": 10.5}"), OverrideFormatError);
  EXPECT_THROW(parse_score_overrides("{\"a\": -1}"), OverrideFormatError);
  EXPECT_THROW(parse_score_overrides("{oops"), OverrideFormatError);
  EXPECT_THROW(load_score_overrides("/nonexistent/scores.json"), OverrideFormatError);
  const auto ov = parse_score_overrides("{\"a\": 0, \"b\": 10}");
  EXPECT_EQ(ov.size(), 2u);
}

TEST(StringRanker, EmptyInputGivesEmptyRanking) { EXPECT_TRUE(rank_strings({}).empty()); }
