#include <gtest/gtest.h>

#include <algorithm>

#include "support.hpp"

using namespace regionscan;

namespace {

/// A node pair the merge step would still fold.
bool has_mergeable_pair(const Cfg& g) {
  for (const auto& [p, c] : g.edges()) {
    if (p != c && g.successors(p).size() == 1 && g.predecessors(c).size() == 1) return true;
  }
  return false;
}

}  // namespace

TEST(Preprocess, MergesExactlyTheExpectedPairs) {
  const Cfg raw = build_cfg(rs_test::load_fixture("loops_and_chains.json"));
  const Cfg partial = remove_loops(raw);
  EXPECT_EQ(partial.stage(), CfgStage::Partial);
  EXPECT_EQ(dfs_back_edges(raw), (std::vector<std::pair<NodeId, NodeId>>{{9, 4}, {12, 1}}));
  std::vector<std::pair<NodeId, NodeId>> merged;
  const Cfg complete = merge_chains(partial, &merged);
  std::sort(merged.begin(), merged.end());
  EXPECT_EQ(merged, (std::vector<std::pair<NodeId, NodeId>>{{0, 1}, {3, 7}, {5, 6}, {11, 12}}));
  EXPECT_FALSE(rs_test::has_cycle(complete));
  EXPECT_EQ(complete.node_count(), 9u);
  EXPECT_EQ(complete.stage(), CfgStage::Complete);
}

TEST(Preprocess, SelfLoopIsRemoved) {
  Cfg g;
  g.add_node(rs_test::make_block(0));
  g.add_node(rs_test::make_block(1));
  g.add_edge(0, 1);
  g.add_edge(1, 1);
  const Cfg p = remove_loops(g);
  EXPECT_FALSE(p.successors(1).count(1));
  EXPECT_EQ(merge_chains(p).node_count(), 1u);
}

TEST(Preprocess, MergingTheEntryKeepsTheParentId) {
  // 1 -> 0 with entry 0 unreachable from 1's side: 1 absorbs 0, entry moves to 1.
  Cfg g;
  g.add_node(rs_test::make_block(0));
  g.add_node(rs_test::make_block(1));
  g.add_edge(1, 0);
  g.set_entry(0);
  const Cfg c = merge_chains(remove_loops(g));
  EXPECT_EQ(c.node_count(), 1u);
  EXPECT_EQ(c.entry(), 1u);
  EXPECT_EQ(c.block(1).instructions.size(), 2u);
}

TEST(Preprocess, RandomGraphProperties) {
  nn::Rng rng(20240611);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(50);
    const double density = rng.uniform(0.0, 4.0 / static_cast<double>(n));
    const Cfg raw = rs_test::random_cfg(rng, n, density);
    const Cfg partial = remove_loops(raw);
    const Cfg complete = merge_chains(partial);

    ASSERT_FALSE(rs_test::has_cycle(partial)) << "trial " << trial;
    ASSERT_FALSE(rs_test::has_cycle(complete)) << "trial " << trial;
    ASSERT_FALSE(has_mergeable_pair(complete)) << "trial " << trial;
    // Idempotence of both stages.
    ASSERT_TRUE(remove_loops(partial) == partial) << "trial " << trial;
    ASSERT_TRUE(merge_chains(complete) == complete) << "trial " << trial;
    // Instructions are conserved, nodes only disappear by merging.
    ASSERT_EQ(complete.instruction_count(), raw.instruction_count());
    ASSERT_EQ(partial.node_count(), raw.node_count());
    ASSERT_LE(complete.node_count(), partial.node_count());
    ASSERT_TRUE(complete.contains(complete.entry()));
    // Removing back edges keeps every node reachable from the entry that was reachable before.
    ASSERT_EQ(rs_test::reachable(partial, partial.entry()), rs_test::reachable(raw, raw.entry()));
    // Partial edges are a subset of raw edges.
    for (const auto& [a, b] : partial.edges()) ASSERT_TRUE(raw.successors(a).count(b));
  }
}
