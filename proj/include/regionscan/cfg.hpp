#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "regionscan/error.hpp"
#include "regionscan/snapshot.hpp"

namespace regionscan {

enum class CfgStage { Raw, Partial, Complete };

/// Control-flow graph of the entry function. Node ids are stable across the
/// preprocessing stages; merged nodes keep the id of the parent.
class Cfg {
 public:
  struct Node {
    BasicBlock block;
    std::set<NodeId> succ;
    std::set<NodeId> pred;
  };

  Cfg() = default;

  void add_node(BasicBlock block) {
    const NodeId id = block.id;
    nodes_[id].block = std::move(block);
  }

  /// Returns false if the edge already existed.
  bool add_edge(NodeId from, NodeId to) {
    if (!contains(from) || !contains(to)) throw SchemaError("cfg: edge references a missing node");
    const bool fresh = nodes_[from].succ.insert(to).second;
    nodes_[to].pred.insert(from);
    return fresh;
  }

  void remove_edge(NodeId from, NodeId to) {
    nodes_.at(from).succ.erase(to);
    nodes_.at(to).pred.erase(from);
  }

  /// Folds `child` into `parent`: instructions appended, child's successors
  /// inherited, child removed. Caller guarantees parent->child is the only
  /// link between them.
  void absorb(NodeId parent, NodeId child) {
    Node& p = nodes_.at(parent);
    Node c = std::move(nodes_.at(child));
    nodes_.erase(child);
    p.succ.erase(child);
    p.block.instructions.insert(p.block.instructions.end(), c.block.instructions.begin(), c.block.instructions.end());
    for (NodeId s : c.succ) {
      Node& sn = nodes_.at(s);
      sn.pred.erase(child);
      sn.pred.insert(parent);
      p.succ.insert(s);
    }
  }

  bool contains(NodeId id) const { return nodes_.count(id) != 0; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const BasicBlock& block(NodeId id) const { return nodes_.at(id).block; }
  const std::set<NodeId>& successors(NodeId id) const { return nodes_.at(id).succ; }
  const std::set<NodeId>& predecessors(NodeId id) const { return nodes_.at(id).pred; }
  const std::map<NodeId, Node>& nodes() const { return nodes_; }

  std::vector<NodeId> node_ids() const {
    std::vector<NodeId> ids;
    ids.reserve(nodes_.size());
    for (const auto& [id, _] : nodes_) ids.push_back(id);
    return ids;
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [_, node] : nodes_) n += node.succ.size();
    return n;
  }
  std::vector<std::pair<NodeId, NodeId>> edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (const auto& [id, node] : nodes_)
      for (NodeId s : node.succ) out.emplace_back(id, s);
    return out;
  }

  std::size_t instruction_count() const {
    std::size_t n = 0;
    for (const auto& [_, node] : nodes_) n += node.block.instructions.size();
    return n;
  }

  NodeId entry() const { return entry_; }
  void set_entry(NodeId id) { entry_ = id; }
  CfgStage stage() const { return stage_; }
  void set_stage(CfgStage s) { stage_ = s; }

  bool operator==(const Cfg& other) const {
    if (entry_ != other.entry_ || stage_ != other.stage_ || nodes_.size() != other.nodes_.size()) return false;
    for (auto a = nodes_.begin(), b = other.nodes_.begin(); a != nodes_.end(); ++a, ++b) {
      if (a->first != b->first || !(a->second.block == b->second.block) || a->second.succ != b->second.succ ||
          a->second.pred != b->second.pred) {
        return false;
      }
    }
    return true;
  }

 private:
  std::map<NodeId, Node> nodes_;
  NodeId entry_ = 0;
  CfgStage stage_ = CfgStage::Raw;
};

/// Raw CFG of the entry function. Throws EmptyCfgError when there are no blocks.
inline Cfg build_cfg(const DisassemblySnapshot& snapshot) {
  if (snapshot.entry_blocks.empty()) {
    throw EmptyCfgError("binary '" + snapshot.binary_id + "' has no basic blocks in its entry function");
  }
  Cfg cfg;
  for (const auto& b : snapshot.entry_blocks) cfg.add_node(b);
  for (const auto& [from, to] : snapshot.entry_edges) {
    if (!cfg.add_edge(from, to)) throw SchemaError("cfg: duplicate edge");
  }
  const auto entry = snapshot.entry_node();
  if (!entry) throw SchemaError("cfg: no block holds the entry address");
  cfg.set_entry(*entry);
  cfg.set_stage(CfgStage::Raw);
  return cfg;
}

}  // namespace regionscan
