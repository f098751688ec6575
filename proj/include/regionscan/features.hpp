#pragma once

// Advanced feature computation: node signatures, BFS token sequences, signed
// feature hashing, opcode trigram TF-IDF, NOP count, section ratio, and the
// fixed-layout feature vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "regionscan/cfg.hpp"
#include "regionscan/error.hpp"
#include "regionscan/node_mapper.hpp"
#include "regionscan/region_extractor.hpp"
#include "regionscan/snapshot.hpp"

namespace regionscan {

// ---------------------------------------------------------------------------
// Node signatures

inline constexpr unsigned kMaxSignatureChildren = 3;
inline constexpr unsigned kMaxSignatureParents = 63;

/// Parent count in the high 6 bits, child count in the low 2 bits; both
/// saturate.
struct NodeSignature {
  std::uint8_t value = 0;

  unsigned parents() const { return value >> 2; }
  unsigned children() const { return value & 0x3u; }
  bool operator==(const NodeSignature&) const = default;
};

inline NodeSignature node_signature(std::size_t parents, std::size_t children) {
  const auto p = static_cast<unsigned>(std::min<std::size_t>(parents, kMaxSignatureParents));
  const auto c = static_cast<unsigned>(std::min<std::size_t>(children, kMaxSignatureChildren));
  return NodeSignature{static_cast<std::uint8_t>(p * 4 + c)};
}

/// Signatures of `order`, with degrees taken from the whole `cfg`.
inline std::vector<NodeSignature> signature_sequence(const std::vector<NodeId>& order, const Cfg& cfg) {
  std::vector<NodeSignature> out;
  out.reserve(order.size());
  for (NodeId n : order) out.push_back(node_signature(cfg.predecessors(n).size(), cfg.successors(n).size()));
  return out;
}

/// First min(len, dim) slots hold the signature values; the rest are zero.
inline std::vector<double> signature_vector(const std::vector<NodeSignature>& seq, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  const std::size_t n = std::min(seq.size(), dim);
  for (std::size_t k = 0; k < n; ++k) v[k] = seq[k].value;
  return v;
}

// ---------------------------------------------------------------------------
// Token sequences

enum class TokenKind { Opcode, Api };

inline std::vector<std::string> sequence_tokens(const std::vector<NodeId>& order, const Cfg& cfg, TokenKind kind,
                                                const ApiMap& api_map) {
  std::vector<std::string> tokens;
  for (NodeId n : order) {
    if (kind == TokenKind::Opcode) {
      for (const auto& ins : cfg.block(n).instructions) tokens.push_back(ins.mnemonic);
    } else if (auto it = api_map.find(n); it != api_map.end()) {
      tokens.insert(tokens.end(), it->second.begin(), it->second.end());
    }
  }
  return tokens;
}

inline std::vector<std::string> sequence_tokens(const Subgraph& sub, const Cfg& cfg, TokenKind kind,
                                                const ApiMap& api_map) {
  return sequence_tokens(sub.bfs_order, cfg, kind, api_map);
}

// ---------------------------------------------------------------------------
// Signed feature hashing

/// 64-bit FNV-1a over the token bytes.
inline std::uint64_t token_hash(std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : token) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

struct WeightedToken {
  std::string token;
  double weight = 1.0;
};

/// Accumulates sign * weight into slot hash % dim; the sign is taken from
/// bit 63 of the hash.
inline std::vector<double> hash_tokens(const std::vector<WeightedToken>& tokens, std::size_t dim) {
  if (dim == 0) throw ShapeError("hash_tokens: dimension must be positive");
  std::vector<double> v(dim, 0.0);
  for (const auto& t : tokens) {
    const std::uint64_t h = token_hash(t.token);
    const double sign = (h >> 63) == 0 ? 1.0 : -1.0;
    v[h % dim] += sign * t.weight;
  }
  return v;
}

inline std::vector<WeightedToken> unit_weights(const std::vector<std::string>& tokens) {
  std::vector<WeightedToken> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back({t, 1.0});
  return out;
}

// ---------------------------------------------------------------------------
// Opcode trigrams

inline std::vector<std::string> opcode_trigrams(const std::vector<std::string>& stream) {
  std::vector<std::string> out;
  if (stream.size() < 3) return out;
  out.reserve(stream.size() - 2);
  for (std::size_t k = 0; k + 2 < stream.size(); ++k) out.push_back(stream[k] + "|" + stream[k + 1] + "|" + stream[k + 2]);
  return out;
}

/// Document frequencies of opcode trigrams over a corpus.
struct IdfTable {
  std::size_t doc_count = 0;
  std::map<std::string, std::size_t> df;

  void add_document(const std::vector<std::string>& stream) {
    ++doc_count;
    auto grams = opcode_trigrams(stream);
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[g];
  }

  void merge(const IdfTable& other) {
    doc_count += other.doc_count;
    for (const auto& [g, n] : other.df) df[g] += n;
  }

  /// ln((1 + N) / (1 + df)) + 1, with df = 0 for unseen trigrams.
  double idf(const std::string& trigram) const {
    const auto it = df.find(trigram);
    const double d = it == df.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(doc_count)) / (1.0 + d)) + 1.0;
  }

  bool operator==(const IdfTable&) const = default;
};

inline nlohmann::json to_json(const IdfTable& t) {
  return nlohmann::json{{"doc_count", t.doc_count}, {"df", t.df}};
}

inline IdfTable idf_from_json(const nlohmann::json& j) {
  IdfTable t;
  try {
    t.doc_count = j.at("doc_count").get<std::size_t>();
    t.df = j.at("df").get<std::map<std::string, std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed IDF table: ") + e.what());
  }
  for (const auto& [g, n] : t.df) {
    if (n == 0 || n > t.doc_count) throw DataError("IDF table: document frequency of '" + g + "' out of range");
  }
  return t;
}

/// Top `k` trigrams by tf-idf weight (ties: ascending trigram text).
inline std::vector<std::pair<std::string, double>> top_trigrams(const std::vector<std::string>& stream,
                                                                const IdfTable& idf, std::size_t k) {
  const auto grams = opcode_trigrams(stream);
  std::vector<std::pair<std::string, double>> out;
  if (grams.empty()) return out;
  std::map<std::string, std::size_t> counts;
  for (const auto& g : grams) ++counts[g];
  const double total = static_cast<double>(grams.size());
  for (const auto& [g, n] : counts) out.emplace_back(g, (static_cast<double>(n) / total) * idf.idf(g));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

/// Mnemonics of the CFG in ascending node id, each node's instructions in order.
inline std::vector<std::string> opcode_stream(const Cfg& cfg) {
  std::vector<std::string> out;
  for (const auto& [_, node] : cfg.nodes())
    for (const auto& ins : node.block.instructions) out.push_back(ins.mnemonic);
  return out;
}

// ---------------------------------------------------------------------------
// Whole-binary scalars

inline std::size_t nop_count(const DisassemblySnapshot& s) {
  std::size_t n = 0;
  for (const auto& b : s.entry_blocks)
    for (const auto& ins : b.instructions)
      if (ins.mnemonic == "nop") ++n;
  return n;
}

inline constexpr double kDefaultRatioThreshold = 1.5;

/// 1 when some section's virtual/physical size ratio exceeds the threshold.
/// A section with no physical bytes but a non-zero virtual size counts.
inline int section_ratio_flag(const std::vector<Section>& sections, double threshold = kDefaultRatioThreshold) {
  for (const auto& s : sections) {
    if (s.physical_size == 0) {
      if (s.virtual_size > 0) return 1;
      continue;
    }
    if (static_cast<double>(s.virtual_size) / static_cast<double>(s.physical_size) > threshold) return 1;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Vector layout

/// Slot layout of the feature vector. With the defaults the vector has 1422
/// values.
struct FeatureLayout {
  std::size_t seq_dim = 100;
  std::size_t max_regions = kDefaultMaxRegions;
  std::size_t sig_dim = 100;
  std::size_t whole_sig_dim = 200;
  std::size_t trigram_dim = 20;

  std::size_t api_offset() const { return 0; }
  std::size_t opcode_offset() const { return seq_dim; }
  std::size_t region_sig_offset() const { return 2 * seq_dim; }
  std::size_t whole_sig_offset() const { return region_sig_offset() + max_regions * sig_dim; }
  std::size_t trigram_offset() const { return whole_sig_offset() + whole_sig_dim; }
  std::size_t nop_offset() const { return trigram_offset() + trigram_dim; }
  std::size_t ratio_offset() const { return nop_offset() + 1; }
  std::size_t size() const { return ratio_offset() + 1; }

  bool operator==(const FeatureLayout&) const = default;
};

inline constexpr std::size_t kDefaultFeatureWidth = 1422;

using FeatureVector = std::vector<double>;

/// Per-subgraph readouts in BFS order.
struct RegionFeatures {
  std::vector<std::string> api_tokens;
  std::vector<std::string> opcode_tokens;
  std::vector<NodeSignature> signatures;
};

/// Features of the completely preprocessed CFG and the whole binary.
struct GlobalFeatures {
  std::vector<NodeSignature> whole_signature;
  std::vector<std::pair<std::string, double>> trigrams;
  std::size_t nops = 0;
  int section_ratio = 0;
};

/// Builds the fixed-layout vector. Region slots beyond `regions.size()` stay
/// zero; a Failed selection yields the all-zero vector.
inline FeatureVector assemble_vector(const RegionSelection& selection, const std::vector<RegionFeatures>& regions,
                                     const GlobalFeatures& global, const FeatureLayout& layout = {}) {
  FeatureVector v(layout.size(), 0.0);
  if (selection.region_case == RegionCase::Failed) return v;
  if (regions.size() > layout.max_regions) throw ShapeError("assemble_vector: more regions than slots");

  std::vector<WeightedToken> api, opcode;
  for (const auto& r : regions) {
    for (const auto& t : r.api_tokens) api.push_back({t, 1.0});
    for (const auto& t : r.opcode_tokens) opcode.push_back({t, 1.0});
  }
  const auto api_vec = hash_tokens(api, layout.seq_dim);
  const auto op_vec = hash_tokens(opcode, layout.seq_dim);
  std::copy(api_vec.begin(), api_vec.end(), v.begin() + static_cast<std::ptrdiff_t>(layout.api_offset()));
  std::copy(op_vec.begin(), op_vec.end(), v.begin() + static_cast<std::ptrdiff_t>(layout.opcode_offset()));

  for (std::size_t r = 0; r < regions.size(); ++r) {
    const auto sig = signature_vector(regions[r].signatures, layout.sig_dim);
    std::copy(sig.begin(), sig.end(),
              v.begin() + static_cast<std::ptrdiff_t>(layout.region_sig_offset() + r * layout.sig_dim));
  }

  const auto whole = signature_vector(global.whole_signature, layout.whole_sig_dim);
  std::copy(whole.begin(), whole.end(), v.begin() + static_cast<std::ptrdiff_t>(layout.whole_sig_offset()));

  std::vector<WeightedToken> grams;
  for (const auto& [g, w] : global.trigrams) grams.push_back({g, w});
  const auto gram_vec = hash_tokens(grams, layout.trigram_dim);
  std::copy(gram_vec.begin(), gram_vec.end(), v.begin() + static_cast<std::ptrdiff_t>(layout.trigram_offset()));

  v[layout.nop_offset()] = static_cast<double>(global.nops);
  v[layout.ratio_offset()] = global.section_ratio;
  return v;
}

}  // namespace regionscan
