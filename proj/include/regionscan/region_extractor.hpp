#pragma once

// Seed selection and subgraph extraction on the partially preprocessed CFG.

#include <algorithm>
#include <cstddef>
#include <deque>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "regionscan/cfg.hpp"
#include "regionscan/string_ranker.hpp"

namespace regionscan {

inline constexpr int kDefaultLevels = 2;
inline constexpr std::size_t kDefaultMaxRegions = 10;

enum class RegionCase { TenOrMore, OneToNine, NoMalicious, Failed };

inline std::string to_string(RegionCase c) {
  switch (c) {
    case RegionCase::TenOrMore: return "TenOrMore";
    case RegionCase::OneToNine: return "OneToNine";
    case RegionCase::NoMalicious: return "NoMalicious";
    case RegionCase::Failed: return "Failed";
  }
  return "?";
}

struct RegionSelection {
  std::vector<NodeId> seeds;
  RegionCase region_case = RegionCase::Failed;
  /// Index into the ranked string list of the string that produced each seed;
  /// -1 for the entry-node fallback.
  std::vector<int> seed_string;

  static RegionSelection failed() { return {}; }
};

struct Subgraph {
  NodeId seed = 0;
  std::set<NodeId> nodes;
  std::vector<NodeId> bfs_order;
  int levels = kDefaultLevels;
};

/// Maps one ranked string to CFG node ids.
using StringNodeMapper = std::function<std::set<NodeId>(const RankedString&)>;

/// Walks the ranked strings in order, collecting the nodes each maps to
/// (ascending id within one string) until `max_regions` distinct seeds are
/// found. With no mapped node at all the entry node becomes the only seed.
inline RegionSelection select_seed_nodes(const Cfg& cfg, const std::vector<RankedString>& ranked,
                                         const StringNodeMapper& mapper,
                                         std::size_t max_regions = kDefaultMaxRegions) {
  RegionSelection sel;
  std::set<NodeId> taken;
  std::size_t found = 0;
  for (std::size_t k = 0; k < ranked.size(); ++k) {
    for (NodeId n : mapper(ranked[k])) {
      if (!cfg.contains(n) || !taken.insert(n).second) continue;
      ++found;
      if (sel.seeds.size() < max_regions) {
        sel.seeds.push_back(n);
        sel.seed_string.push_back(static_cast<int>(k));
      }
    }
    if (found > max_regions) break;
  }
  if (found == 0) {
    sel.seeds = {cfg.entry()};
    sel.seed_string = {-1};
    sel.region_case = RegionCase::NoMalicious;
  } else if (found >= max_regions) {
    sel.region_case = RegionCase::TenOrMore;
  } else {
    sel.region_case = RegionCase::OneToNine;
  }
  return sel;
}

/// BFS over the subgraph's induced edges. Starts from the members without a
/// predecessor inside the subgraph (ascending id), expands successors in
/// ascending id and appends unreached members in ascending id.
inline std::vector<NodeId> bfs_order(const std::set<NodeId>& members, const Cfg& cfg) {
  std::vector<NodeId> order;
  order.reserve(members.size());
  std::set<NodeId> seen;
  std::deque<NodeId> queue;
  for (NodeId n : members) {
    const auto& preds = cfg.predecessors(n);
    const bool top = std::none_of(preds.begin(), preds.end(), [&](NodeId p) { return members.count(p) != 0; });
    if (top) {
      seen.insert(n);
      queue.push_back(n);
    }
  }
  while (!queue.empty()) {
    const NodeId n = queue.front();
    queue.pop_front();
    order.push_back(n);
    for (NodeId s : cfg.successors(n)) {
      if (members.count(s) && seen.insert(s).second) queue.push_back(s);
    }
  }
  for (NodeId n : members)
    if (!seen.count(n)) order.push_back(n);
  return order;
}

inline std::vector<NodeId> bfs_order(const Subgraph& sub, const Cfg& cfg) { return bfs_order(sub.nodes, cfg); }

/// BFS over the whole graph from `root` (successors in ascending id), then
/// the unreached nodes in ascending id.
inline std::vector<NodeId> rooted_bfs_order(const Cfg& cfg, NodeId root) {
  std::vector<NodeId> order;
  order.reserve(cfg.node_count());
  std::set<NodeId> seen{root};
  std::deque<NodeId> queue{root};
  while (!queue.empty()) {
    const NodeId n = queue.front();
    queue.pop_front();
    order.push_back(n);
    for (NodeId s : cfg.successors(n))
      if (seen.insert(s).second) queue.push_back(s);
  }
  for (NodeId n : cfg.node_ids())
    if (!seen.count(n)) order.push_back(n);
  return order;
}

/// The seed plus every node within `levels` predecessor steps and every node
/// within `levels` successor steps.
inline Subgraph extract_subgraph(const Cfg& cfg, NodeId seed, int levels = kDefaultLevels) {
  Subgraph sub;
  sub.seed = seed;
  sub.levels = levels;
  sub.nodes.insert(seed);
  auto sweep = [&](bool upward) {
    std::set<NodeId> frontier{seed};
    for (int step = 0; step < levels && !frontier.empty(); ++step) {
      std::set<NodeId> next;
      for (NodeId n : frontier) {
        for (NodeId m : upward ? cfg.predecessors(n) : cfg.successors(n)) next.insert(m);
      }
      sub.nodes.insert(next.begin(), next.end());
      frontier = std::move(next);
    }
  };
  sweep(true);
  sweep(false);
  sub.bfs_order = bfs_order(sub.nodes, cfg);
  return sub;
}

}  // namespace regionscan
