#pragma once

// Per-binary feature extraction: snapshot -> CFG stages -> ranked strings ->
// seed regions -> feature vector.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "regionscan/cfg.hpp"
#include "regionscan/error.hpp"
#include "regionscan/features.hpp"
#include "regionscan/node_mapper.hpp"
#include "regionscan/preprocess.hpp"
#include "regionscan/region_extractor.hpp"
#include "regionscan/snapshot.hpp"
#include "regionscan/string_ranker.hpp"

namespace regionscan {

struct ExtractionConfig {
  int levels = kDefaultLevels;
  std::size_t max_regions = kDefaultMaxRegions;
  std::size_t trigrams = 15;
  std::size_t trigram_dim = 20;
  std::size_t seq_dim = 100;
  std::size_t sig_dim = 100;
  std::size_t whole_sig_dim = 200;
  double ratio_threshold = kDefaultRatioThreshold;
  std::size_t max_functions = kDefaultMaxFunctions;

  FeatureLayout layout() const { return {seq_dim, max_regions, sig_dim, whole_sig_dim, trigram_dim}; }

  bool operator==(const ExtractionConfig&) const = default;
};

inline nlohmann::json to_json(const ExtractionConfig& c) {
  return nlohmann::json{{"levels", c.levels},         {"max_regions", c.max_regions},
                        {"trigrams", c.trigrams},     {"trigram_dim", c.trigram_dim},
                        {"seq_dim", c.seq_dim},       {"sig_dim", c.sig_dim},
                        {"whole_sig_dim", c.whole_sig_dim}, {"ratio_threshold", c.ratio_threshold},
                        {"max_functions", c.max_functions}};
}

/// The three CFG stages of one binary.
struct CfgStages {
  Cfg raw;
  Cfg partial;
  Cfg complete;
};

inline CfgStages preprocess(const DisassemblySnapshot& s) {
  CfgStages st;
  st.raw = build_cfg(s);
  st.partial = remove_loops(st.raw);
  st.complete = merge_chains(st.partial);
  return st;
}

/// Opcode stream of the completely preprocessed CFG; the IDF pass input.
inline std::vector<std::string> complete_opcode_stream(const DisassemblySnapshot& s) {
  return opcode_stream(preprocess(s).complete);
}

struct RegionReport {
  Subgraph subgraph;
  RegionFeatures features;
  /// Ranked string that selected this seed, or -1 for the entry fallback.
  int string_index = -1;
};

struct Extraction {
  std::string binary_id;
  RegionSelection selection;
  std::vector<RankedString> ranked;
  std::vector<RegionReport> regions;
  GlobalFeatures global;
  FeatureVector vector;
  /// Why extraction fell back to the default vector; empty otherwise.
  std::string failure;
};

inline Extraction failed_extraction(std::string binary_id, std::string why, const ExtractionConfig& cfg) {
  Extraction ex;
  ex.binary_id = std::move(binary_id);
  ex.selection = RegionSelection::failed();
  ex.vector = assemble_vector(ex.selection, {}, {}, cfg.layout());
  ex.failure = std::move(why);
  return ex;
}

/// Runs the whole per-binary pipeline. Any library error (empty CFG, function
/// budget exceeded, ...) yields the Failed case with an all-zero vector.
inline Extraction extract_features(const DisassemblySnapshot& s, const ExtractionConfig& cfg, const IdfTable& idf,
                                   const ScoreOverrides* overrides = nullptr) {
  try {
    Extraction ex;
    ex.binary_id = s.binary_id;
    const CfgStages st = preprocess(s);
    const CallXrefGraph xg = build_xref_graph(s, cfg.max_functions);
    const ApiMap api_map = build_api_map(s, st.partial, xg);

    ex.ranked = rank_strings(s.strings, overrides);
    ex.selection = select_seed_nodes(
        st.partial, ex.ranked, [&](const RankedString& r) { return map_string_to_nodes(r, s, st.partial, xg); },
        cfg.max_regions);

    std::vector<RegionFeatures> region_features;
    for (std::size_t k = 0; k < ex.selection.seeds.size(); ++k) {
      RegionReport rep;
      rep.subgraph = extract_subgraph(st.partial, ex.selection.seeds[k], cfg.levels);
      rep.string_index = ex.selection.seed_string[k];
      rep.features.opcode_tokens = sequence_tokens(rep.subgraph, st.partial, TokenKind::Opcode, api_map);
      rep.features.api_tokens = sequence_tokens(rep.subgraph, st.partial, TokenKind::Api, api_map);
      rep.features.signatures = signature_sequence(rep.subgraph.bfs_order, st.partial);
      region_features.push_back(rep.features);
      ex.regions.push_back(std::move(rep));
    }

    ex.global.whole_signature = signature_sequence(rooted_bfs_order(st.complete, st.complete.entry()), st.complete);
    ex.global.trigrams = top_trigrams(opcode_stream(st.complete), idf, cfg.trigrams);
    ex.global.nops = nop_count(s);
    ex.global.section_ratio = section_ratio_flag(s.sections, cfg.ratio_threshold);
    ex.vector = assemble_vector(ex.selection, region_features, ex.global, cfg.layout());
    return ex;
  } catch (const Error& e) {
    return failed_extraction(s.binary_id, e.what(), cfg);
  }
}

/// As above, starting from raw snapshot bytes; parse failures also yield the
/// Failed case, identified by `fallback_id`.
inline Extraction extract_features(std::string_view raw, std::string fallback_id, const ExtractionConfig& cfg,
                                   const IdfTable& idf, const ScoreOverrides* overrides = nullptr) {
  DisassemblySnapshot s;
  try {
    s = parse_snapshot(raw);
  } catch (const Error& e) {
    return failed_extraction(std::move(fallback_id), e.what(), cfg);
  }
  return extract_features(s, cfg, idf, overrides);
}

}  // namespace regionscan
