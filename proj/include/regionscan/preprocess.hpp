#pragma once

// CFG preprocessing: back-edge removal (partial) then single-parent /
// single-child chain merging (complete).

#include <cstdint>
#include <utility>
#include <vector>

#include "regionscan/cfg.hpp"

namespace regionscan {

/// Back edges of a depth-first traversal that starts at the entry node and
/// then restarts from each still-unvisited node in ascending id. Successors
/// are visited in ascending id.
inline std::vector<std::pair<NodeId, NodeId>> dfs_back_edges(const Cfg& cfg) {
  enum class Color : std::uint8_t { White, Gray, Black };
  std::map<NodeId, Color> color;
  for (NodeId id : cfg.node_ids()) color[id] = Color::White;

  std::vector<std::pair<NodeId, NodeId>> back;
  struct Frame {
    NodeId id;
    std::set<NodeId>::const_iterator next;
  };
  auto visit = [&](NodeId root) {
    std::vector<Frame> stack;
    color[root] = Color::Gray;
    stack.push_back({root, cfg.successors(root).begin()});
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.next == cfg.successors(top.id).end()) {
        color[top.id] = Color::Black;
        stack.pop_back();
        continue;
      }
      const NodeId s = *top.next++;
      if (color[s] == Color::Gray) {
        back.emplace_back(top.id, s);
      } else if (color[s] == Color::White) {
        color[s] = Color::Gray;
        stack.push_back({s, cfg.successors(s).begin()});
      }
    }
  };

  visit(cfg.entry());
  for (NodeId id : cfg.node_ids())
    if (color[id] == Color::White) visit(id);
  return back;
}

/// Partially preprocessed CFG: every back edge (self-loops included) removed.
inline Cfg remove_loops(const Cfg& raw) {
  Cfg out = raw;
  for (const auto& [from, to] : dfs_back_edges(raw)) out.remove_edge(from, to);
  out.set_stage(CfgStage::Partial);
  return out;
}

/// Completely preprocessed CFG. Scans ids in ascending order and folds each
/// single-parent child into its single-child parent until nothing changes.
/// `merged`, when given, receives the (parent, child) id pairs in merge order.
inline Cfg merge_chains(const Cfg& partial, std::vector<std::pair<NodeId, NodeId>>* merged = nullptr) {
  Cfg out = partial;
  bool changed = true;
  while (changed) {
    changed = false;
    for (NodeId p : out.node_ids()) {
      if (!out.contains(p)) continue;
      while (out.successors(p).size() == 1) {
        const NodeId c = *out.successors(p).begin();
        if (c == p || out.predecessors(c).size() != 1) break;
        out.absorb(p, c);
        if (c == out.entry()) out.set_entry(p);
        if (merged) merged->emplace_back(p, c);
        changed = true;
      }
    }
  }
  out.set_stage(CfgStage::Complete);
  return out;
}

}  // namespace regionscan
