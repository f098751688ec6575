#pragma once

// Shared helpers for the test binaries: fixture lookup and random graph /
// snapshot builders.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "regionscan/regionscan.hpp"
#include "regionscan/synthetic.hpp"

namespace rs_test {

using namespace regionscan;

inline std::string fixture_path(const std::string& name) { return std::string(RS_FIXTURE_DIR) + "/" + name; }

inline DisassemblySnapshot load_fixture(const std::string& name) { return load_snapshot(fixture_path(name)); }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Block `id` at 0x1000 + 0x10 * id holding `n_ins` distinct instructions.
inline BasicBlock make_block(NodeId id, std::size_t n_ins = 1) {
  BasicBlock b;
  b.id = id;
  b.start_addr = 0x1000 + 0x10 * static_cast<Address>(id);
  for (std::size_t k = 0; k < n_ins; ++k) {
    b.instructions.push_back({b.start_addr + k, "op" + std::to_string(id) + "_" + std::to_string(k), false, {}});
  }
  return b;
}

/// Random digraph on n nodes (self-loops allowed), entry 0.
inline Cfg random_cfg(nn::Rng& rng, std::size_t n, double density) {
  Cfg g;
  for (NodeId i = 0; i < n; ++i) g.add_node(make_block(i, 1 + rng.below(3)));
  for (NodeId a = 0; a < n; ++a)
    for (NodeId b = 0; b < n; ++b)
      if (rng.uniform01() < density) g.add_edge(a, b);
  g.set_entry(0);
  return g;
}

/// Brute-force cycle check: does any node reach itself?
inline bool has_cycle(const Cfg& g) {
  for (NodeId start : g.node_ids()) {
    std::set<NodeId> seen;
    std::vector<NodeId> stack(g.successors(start).begin(), g.successors(start).end());
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      if (u == start) return true;
      if (!seen.insert(u).second) continue;
      for (NodeId v : g.successors(u)) stack.push_back(v);
    }
  }
  return false;
}

inline std::set<NodeId> reachable(const Cfg& g, NodeId from) {
  std::set<NodeId> seen{from};
  std::vector<NodeId> stack{from};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    for (NodeId v : g.successors(u))
      if (seen.insert(v).second) stack.push_back(v);
  }
  return seen;
}

}  // namespace rs_test
