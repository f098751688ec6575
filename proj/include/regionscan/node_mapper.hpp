#pragma once

// Maps imported APIs and strings onto nodes of the entry function's CFG.
//
// A reference is direct when an instruction inside a CFG node makes it. It is
// indirect when it sits in some other function F: every simple path from F to
// entry() in the call cross-reference graph ends in a function that entry()
// calls, and the CFG nodes that call those last-hop functions receive the
// mapping.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "regionscan/cfg.hpp"
#include "regionscan/error.hpp"
#include "regionscan/snapshot.hpp"
#include "regionscan/string_ranker.hpp"

namespace regionscan {

inline constexpr std::size_t kDefaultMaxFunctions = 300;

/// Directed graph over function entry addresses. An edge F -> G records that
/// G contains a call to F.
class CallXrefGraph {
 public:
  CallXrefGraph() = default;
  explicit CallXrefGraph(Address entry) : entry_(entry) { add_node(entry); }

  void add_node(Address f) { out_.try_emplace(f); }
  void add_edge(Address callee, Address caller) {
    add_node(callee);
    add_node(caller);
    out_[callee].insert(caller);
  }

  bool contains(Address f) const { return out_.count(f) != 0; }
  Address entry() const { return entry_; }
  /// Functions that call `f`.
  const std::set<Address>& callers(Address f) const { return out_.at(f); }
  std::size_t node_count() const { return out_.size(); }
  std::size_t edge_count() const {
    std::size_t n = 0;
    for (const auto& [_, e] : out_) n += e.size();
    return n;
  }
  std::vector<Address> nodes() const {
    std::vector<Address> v;
    for (const auto& [a, _] : out_) v.push_back(a);
    return v;
  }

 private:
  Address entry_ = 0;
  std::map<Address, std::set<Address>> out_;
};

namespace detail {

/// Address ranges [begin, end) of the non-entry functions.
struct FunctionSpan {
  Address begin;
  Address end;
};

inline std::map<Address, FunctionSpan> function_spans(const DisassemblySnapshot& s) {
  std::set<Address> entries;
  for (const auto& f : s.functions) entries.insert(f.entry_addr);
  entries.insert(s.entry_function.addr);
  std::map<Address, FunctionSpan> spans;
  for (const auto& f : s.functions) {
    Address end = std::numeric_limits<Address>::max();
    if (f.size) {
      end = f.entry_addr + *f.size;
    } else if (auto it = entries.upper_bound(f.entry_addr); it != entries.end()) {
      end = *it;
    }
    spans[f.entry_addr] = {f.entry_addr, end};
  }
  return spans;
}

inline std::optional<Address> owning_function(const std::map<Address, FunctionSpan>& spans, Address a) {
  auto it = spans.upper_bound(a);
  if (it == spans.begin()) return std::nullopt;
  --it;
  if (a >= it->second.begin && a < it->second.end) return it->first;
  return std::nullopt;
}

}  // namespace detail

/// One node per function plus entry(); an edge for every distinct
/// (callee function, calling function) pair. Calls made from the entry
/// function's blocks count as call sites of entry().
inline CallXrefGraph build_xref_graph(const DisassemblySnapshot& s, std::size_t max_functions = kDefaultMaxFunctions) {
  if (s.functions.size() > max_functions || s.has_warning(kFunctionLimitWarning)) {
    throw FunctionLimitError("binary '" + s.binary_id + "' has " + std::to_string(s.functions.size()) +
                             " functions; call-path mapping is limited to " + std::to_string(max_functions));
  }
  CallXrefGraph g(s.entry_function.addr);
  for (const auto& f : s.functions) g.add_node(f.entry_addr);
  for (const auto& f : s.functions) {
    for (const auto& c : f.call_sites) {
      if (g.contains(c.callee_addr)) g.add_edge(c.callee_addr, f.entry_addr);
    }
  }
  for (const auto& b : s.entry_blocks) {
    for (const auto& i : b.instructions) {
      if (i.is_call && i.call_target && g.contains(*i.call_target)) g.add_edge(*i.call_target, s.entry_function.addr);
    }
  }
  return g;
}

/// Number of simple paths from `from` to `to`, enumerated by DFS. Stops
/// counting at `cap`.
inline std::size_t count_simple_paths(const CallXrefGraph& g, Address from, Address to,
                                      std::size_t cap = std::numeric_limits<std::size_t>::max()) {
  if (!g.contains(from) || !g.contains(to)) return 0;
  std::size_t count = 0;
  std::set<Address> on_path{from};
  auto dfs = [&](auto&& self, Address u) -> void {
    if (count >= cap) return;
    if (u == to) {
      ++count;
      return;
    }
    for (Address v : g.callers(u)) {
      if (on_path.insert(v).second) {
        self(self, v);
        on_path.erase(v);
      }
    }
  };
  dfs(dfs, from);
  return count;
}

/// Functions that sit immediately before entry() on some simple path from
/// `source` to entry(). A simple path source -> ... -> f -> entry exists iff
/// f is reachable from source without passing through entry().
inline std::set<Address> last_hops_before_entry(const CallXrefGraph& g, Address source) {
  std::set<Address> hops;
  const Address entry = g.entry();
  if (!g.contains(source) || source == entry) return hops;
  std::set<Address> seen{source};
  std::vector<Address> stack{source};
  while (!stack.empty()) {
    const Address u = stack.back();
    stack.pop_back();
    for (Address v : g.callers(u)) {
      if (v == entry) {
        hops.insert(u);
      } else if (seen.insert(v).second) {
        stack.push_back(v);
      }
    }
  }
  return hops;
}

/// A CFG node that references an API or string, with the address of the
/// instruction that carries the reference (direct) or the call leading to it
/// (indirect).
struct NodeHit {
  NodeId node;
  Address site;

  bool operator<(const NodeHit& o) const { return std::tie(node, site) < std::tie(o.node, o.site); }
  bool operator==(const NodeHit&) const = default;
};

namespace detail {

inline void require_partial(const Cfg& cfg) {
  if (cfg.stage() != CfgStage::Partial) throw Error("node mapping expects the partially preprocessed CFG");
}

inline std::vector<NodeHit> map_sources(const std::set<Address>& sources, const Cfg& cfg, const CallXrefGraph& xg) {
  std::set<Address> hops;
  for (Address src : sources) {
    auto h = last_hops_before_entry(xg, src);
    hops.insert(h.begin(), h.end());
  }
  std::vector<NodeHit> hits;
  if (hops.empty()) return hits;
  for (const auto& [id, node] : cfg.nodes()) {
    for (const auto& ins : node.block.instructions) {
      if (ins.is_call && ins.call_target && hops.count(*ins.call_target)) hits.push_back({id, ins.address});
    }
  }
  return hits;
}

inline std::set<NodeId> node_set(const std::vector<NodeHit>& hits) {
  std::set<NodeId> out;
  for (const auto& h : hits) out.insert(h.node);
  return out;
}

}  // namespace detail

/// Every reference site of `api` in the CFG, direct and indirect.
inline std::vector<NodeHit> api_hits(const ImportedApi& api, const DisassemblySnapshot& s, const Cfg& cfg,
                                     const CallXrefGraph& xg) {
  detail::require_partial(cfg);
  std::vector<NodeHit> hits;
  for (const auto& [id, node] : cfg.nodes()) {
    for (const auto& ins : node.block.instructions) {
      if (ins.is_call && ins.call_target == api.plt_addr) hits.push_back({id, ins.address});
    }
  }
  std::set<Address> sources;
  for (const auto& f : s.functions) {
    if (f.entry_addr == s.entry_function.addr) continue;
    for (const auto& c : f.call_sites) {
      if (c.callee_addr == api.plt_addr) sources.insert(f.entry_addr);
    }
  }
  auto indirect = detail::map_sources(sources, cfg, xg);
  hits.insert(hits.end(), indirect.begin(), indirect.end());
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  return hits;
}

inline std::set<NodeId> map_api_to_nodes(const ImportedApi& api, const DisassemblySnapshot& s, const Cfg& cfg,
                                         const CallXrefGraph& xg) {
  return detail::node_set(api_hits(api, s, cfg, xg));
}

inline std::vector<NodeHit> string_hits(const std::vector<Address>& ref_addrs, const DisassemblySnapshot& s,
                                        const Cfg& cfg, const CallXrefGraph& xg) {
  detail::require_partial(cfg);
  std::vector<NodeHit> hits;
  if (ref_addrs.empty()) return hits;
  const std::set<Address> refs(ref_addrs.begin(), ref_addrs.end());
  for (const auto& [id, node] : cfg.nodes()) {
    for (const auto& ins : node.block.instructions) {
      if (refs.count(ins.address)) hits.push_back({id, ins.address});
    }
  }
  const auto spans = detail::function_spans(s);
  std::set<Address> sources;
  for (Address a : refs) {
    if (auto f = detail::owning_function(spans, a); f && *f != s.entry_function.addr) sources.insert(*f);
  }
  auto indirect = detail::map_sources(sources, cfg, xg);
  hits.insert(hits.end(), indirect.begin(), indirect.end());
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  return hits;
}

inline std::set<NodeId> map_string_to_nodes(const RankedString& str, const DisassemblySnapshot& s, const Cfg& cfg,
                                             const CallXrefGraph& xg) {
  return detail::node_set(string_hits(str.ref_addrs, s, cfg, xg));
}

/// Per-node API names, ordered by reference site address, then by the
/// address of the API's first call site in its source function, then by
/// import table position.
using ApiMap = std::map<NodeId, std::vector<std::string>>;

inline ApiMap build_api_map(const DisassemblySnapshot& s, const Cfg& cfg, const CallXrefGraph& xg) {
  using Key = std::tuple<Address, Address, std::size_t>;
  std::map<NodeId, std::vector<std::pair<Key, std::string>>> keyed;
  for (std::size_t k = 0; k < s.imports.size(); ++k) {
    const auto& api = s.imports[k];
    Address first_call = std::numeric_limits<Address>::max();
    for (const auto& f : s.functions)
      for (const auto& c : f.call_sites)
        if (c.callee_addr == api.plt_addr) first_call = std::min(first_call, c.caller_addr);
    std::map<NodeId, Address> site_per_node;
    for (const auto& h : api_hits(api, s, cfg, xg)) {
      auto [it, fresh] = site_per_node.emplace(h.node, h.site);
      if (!fresh) it->second = std::min(it->second, h.site);
    }
    for (const auto& [node, site] : site_per_node) keyed[node].push_back({Key{site, first_call, k}, api.name});
  }
  ApiMap out;
  for (auto& [node, entries] : keyed) {
    std::sort(entries.begin(), entries.end());
    for (auto& e : entries) out[node].push_back(std::move(e.second));
  }
  return out;
}

}  // namespace regionscan
