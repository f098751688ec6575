#include <gtest/gtest.h>

#include <limits>

#include "support.hpp"

using namespace regionscan;

namespace {

/// All-pairs shortest path lengths over successor edges.
std::vector<std::vector<int>> distances(const Cfg& g) {
  const std::size_t n = g.node_count();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& [a, b] : g.edges()) d[a][b] = std::min(d[a][b], 1);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

std::vector<RankedString> ranked_n(std::size_t n) {
  std::vector<RankedString> out;
  for (std::size_t k = 0; k < n; ++k) out.push_back({"s" + std::to_string(k), 9.0, {}});
  return out;
}

}  // namespace

TEST(Region, TwoLevelSubgraphAroundSeed) {
  const Cfg partial = remove_loops(build_cfg(rs_test::load_fixture("two_level_region.json")));
  const auto sub = extract_subgraph(partial, 7, 2);
  EXPECT_EQ(sub.nodes, (std::set<NodeId>{3, 4, 5, 6, 7, 9, 10, 11, 12}));
  EXPECT_EQ(sub.seed, 7u);
  EXPECT_EQ(extract_subgraph(partial, 7, 0).nodes, std::set<NodeId>{7});
}

TEST(Region, BreadthFirstReadouts) {
  const auto s = rs_test::load_fixture("region_readout.json");
  const Cfg partial = remove_loops(build_cfg(s));
  const auto sub = extract_subgraph(partial, 4, 2);
  EXPECT_EQ(sub.bfs_order, (std::vector<NodeId>{1, 2, 3, 4, 5, 6, 7, 8}));
  const ApiMap api = build_api_map(s, partial, build_xref_graph(s));
  EXPECT_EQ(sequence_tokens(sub, partial, TokenKind::Opcode, api),
            (std::vector<std::string>{"mov", "call", "sub", "jmp", "pop", "cmp", "push", "add"}));
  EXPECT_EQ(sequence_tokens(sub, partial, TokenKind::Api, api),
            (std::vector<std::string>{"GetCurrentProcess", "WriteFile", "EnterCriticalSection", "LoadLibraryA",
                                      "TerminateProcess", "VirtualFree", "GetCPInfo", "ExitProcess"}));
  std::vector<unsigned> sig;
  for (auto v : signature_sequence(sub.bfs_order, partial)) sig.push_back(v.value);
  EXPECT_EQ(sig, (std::vector<unsigned>{6, 6, 10, 10, 5, 10, 5, 9}));
}

TEST(Region, SubgraphMatchesDistanceOracle) {
  nn::Rng rng(31337);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    const Cfg partial = remove_loops(rs_test::random_cfg(rng, n, rng.uniform(0.0, 3.0 / static_cast<double>(n))));
    const auto d = distances(partial);
    const NodeId seed = static_cast<NodeId>(rng.below(n));
    std::set<NodeId> prev;
    for (int levels = 0; levels <= 4; ++levels) {
      const auto sub = extract_subgraph(partial, seed, levels);
      std::set<NodeId> expected;
      for (NodeId v = 0; v < n; ++v)
        if (d[v][seed] <= levels || d[seed][v] <= levels) expected.insert(v);
      ASSERT_EQ(sub.nodes, expected) << "trial " << trial << " levels " << levels;
      ASSERT_TRUE(std::includes(sub.nodes.begin(), sub.nodes.end(), prev.begin(), prev.end()));
      // BFS order is a permutation of the members.
      std::vector<NodeId> sorted = sub.bfs_order;
      std::sort(sorted.begin(), sorted.end());
      ASSERT_EQ(std::set<NodeId>(sorted.begin(), sorted.end()), sub.nodes);
      ASSERT_EQ(sorted.size(), sub.nodes.size());
      // Every member appears after at least one in-subgraph parent, or is a root.
      std::map<NodeId, std::size_t> pos;
      for (std::size_t k = 0; k < sub.bfs_order.size(); ++k) pos[sub.bfs_order[k]] = k;
      for (NodeId v : sub.bfs_order) {
        bool has_parent = false, parent_before = false;
        for (NodeId p : partial.predecessors(v)) {
          if (!sub.nodes.count(p)) continue;
          has_parent = true;
          parent_before = parent_before || pos[p] < pos[v];
        }
        ASSERT_TRUE(!has_parent || parent_before);
      }
      prev = sub.nodes;
    }
  }
}

TEST(Region, RootedBfsVisitsEveryNodeOnce) {
  nn::Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    const Cfg g = merge_chains(remove_loops(rs_test::random_cfg(rng, n, 2.0 / static_cast<double>(n))));
    auto order = rooted_bfs_order(g, g.entry());
    ASSERT_EQ(order.front(), g.entry());
    std::sort(order.begin(), order.end());
    ASSERT_EQ(order, g.node_ids());
  }
}

TEST(Region, SeedSelectionCases) {
  const Cfg partial = remove_loops(build_cfg(rs_test::load_fixture("loops_and_chains.json")));

  auto none = select_seed_nodes(partial, ranked_n(5), [](const RankedString&) { return std::set<NodeId>{}; });
  EXPECT_EQ(none.region_case, RegionCase::NoMalicious);
  EXPECT_EQ(none.seeds, std::vector<NodeId>{partial.entry()});
  EXPECT_EQ(none.seed_string, std::vector<int>{-1});

  auto some = select_seed_nodes(partial, ranked_n(3), [](const RankedString& r) {
    return r.text == "s0" ? std::set<NodeId>{5, 2} : r.text == "s1" ? std::set<NodeId>{2} : std::set<NodeId>{9};
  });
  EXPECT_EQ(some.region_case, RegionCase::OneToNine);
  EXPECT_EQ(some.seeds, (std::vector<NodeId>{2, 5, 9}));
  EXPECT_EQ(some.seed_string, (std::vector<int>{0, 0, 2}));

  auto many = select_seed_nodes(partial, ranked_n(13), [](const RankedString& r) {
    return std::set<NodeId>{static_cast<NodeId>(std::stoi(r.text.substr(1)))};
  });
  EXPECT_EQ(many.region_case, RegionCase::TenOrMore);
  EXPECT_EQ(many.seeds.size(), kDefaultMaxRegions);
  EXPECT_EQ(many.seeds.front(), 0u);
  EXPECT_EQ(many.seeds.back(), 9u);

  auto exactly_ten = select_seed_nodes(partial, ranked_n(10), [](const RankedString& r) {
    return std::set<NodeId>{static_cast<NodeId>(std::stoi(r.text.substr(1)))};
  });
  EXPECT_EQ(exactly_ten.region_case, RegionCase::TenOrMore);

  auto nine = select_seed_nodes(partial, ranked_n(9), [](const RankedString& r) {
    return std::set<NodeId>{static_cast<NodeId>(std::stoi(r.text.substr(1)))};
  });
  EXPECT_EQ(nine.region_case, RegionCase::OneToNine);
  EXPECT_EQ(nine.seeds.size(), 9u);
}
