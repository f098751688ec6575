#pragma once

// Command implementations behind the regionscan executable. Each returns the
// process exit code: 0 success, 1 usage error, 2 data error.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "regionscan/classifier/metrics.hpp"
#include "regionscan/classifier/model_io.hpp"
#include "regionscan/classifier/network.hpp"
#include "regionscan/classifier/scaler.hpp"
#include "regionscan/config.hpp"
#include "regionscan/error.hpp"
#include "regionscan/feature_io.hpp"
#include "regionscan/pipeline.hpp"
#include "regionscan/synthetic.hpp"

namespace regionscan::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read '" + p.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string hex(Address a) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "0x%llx", static_cast<unsigned long long>(a));
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v, const char* sep = ", ") {
  std::ostringstream os;
  for (std::size_t k = 0; k < v.size(); ++k) os << (k ? sep : "") << v[k];
  return os.str();
}

/// Runs fn(i, worker) for i in [0, n) on at most `jobs` threads.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t, std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = next++; i < n; i = next++) fn(i, w);
    });
  }
}

inline std::string format_metrics(const nn::Metrics& m) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << "accuracy=" << m.accuracy << " precision=" << m.precision
     << " recall=" << m.recall << " f1=" << m.f1 << " auc=" << m.auc << " fpr=" << m.fpr << " loss=" << m.loss
     << " (tp=" << m.tp << " fp=" << m.fp << " tn=" << m.tn << " fn=" << m.fn << ")";
  return os.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct ExtractOptions {
  std::string corpus;
  std::string labels;
  std::string config;
  std::string out;
  std::string string_scores;
  std::size_t jobs = 0;
};

inline std::string idf_path_for(const std::string& feature_path) { return feature_path + ".idf.json"; }

inline int cmd_extract(const ExtractOptions& opt, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  std::map<std::string, int> labels;
  Config cfg;
  ScoreOverrides overrides;
  try {
    std::error_code ec;
    if (!fs::is_directory(opt.corpus, ec)) throw DataError("corpus '" + opt.corpus + "' is not a readable directory");
    for (const auto& e : fs::directory_iterator(opt.corpus)) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    labels = load_labels(opt.labels);
    if (!opt.config.empty()) cfg = load_config(opt.config);
    if (!opt.string_scores.empty()) overrides = load_score_overrides(opt.string_scores);
  } catch (const std::exception& e) {
    err << "extract: " << e.what() << '\n';
    return kExitData;
  }
  const ScoreOverrides* ov = opt.string_scores.empty() ? nullptr : &overrides;
  const std::size_t n = files.size();
  std::vector<std::string> raw(n);
  std::vector<std::string> read_error(n);
  for (std::size_t i = 0; i < n; ++i) {
    try {
      raw[i] = detail::read_file(files[i]);
    } catch (const std::exception& e) {
      read_error[i] = e.what();
    }
  }

  // Pass 1: document frequencies, merged from per-worker partial tables.
  const std::size_t jobs = opt.jobs == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opt.jobs;
  std::vector<IdfTable> partial(jobs);
  detail::parallel_for(n, jobs, [&](std::size_t i, std::size_t w) {
    if (!read_error[i].empty()) return;
    try {
      partial[w].add_document(complete_opcode_stream(parse_snapshot(raw[i])));
    } catch (const Error&) {
      // Recorded as Failed in pass 2.
    }
  });
  IdfTable idf;
  for (const auto& p : partial) idf.merge(p);

  // Pass 2: feature vectors.
  std::vector<Extraction> results(n);
  detail::parallel_for(n, jobs, [&](std::size_t i, std::size_t) {
    const std::string stem = files[i].stem().string();
    results[i] = read_error[i].empty() ? extract_features(raw[i], stem, cfg.extraction, idf, ov)
                                       : failed_extraction(stem, read_error[i], cfg.extraction);
  });

  std::ofstream fo(opt.out, std::ios::binary | std::ios::trunc);
  if (!fo) {
    err << "extract: cannot write '" << opt.out << "'\n";
    return kExitData;
  }
  std::map<RegionCase, std::size_t> counts;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& ex = results[i];
    auto it = labels.find(ex.binary_id);
    if (it == labels.end()) it = labels.find(files[i].stem().string());
    if (it == labels.end()) {
      err << "extract: no label for '" << ex.binary_id << "' (" << files[i].filename().string() << ")\n";
      return kExitData;
    }
    if (!ex.failure.empty()) {
      err << "warning: " << files[i].filename().string() << ": " << ex.failure << "; using default features\n";
    }
    ++counts[ex.selection.region_case];
    try {
      fo << feature_record(ex.binary_id, it->second, ex.vector) << '\n';
    } catch (const Error& e) {
      err << "extract: " << e.what() << '\n';
      return kExitData;
    }
  }
  fo.close();
  try {
    save_idf(idf, cfg.extraction, idf_path_for(opt.out));
  } catch (const Error& e) {
    err << "extract: " << e.what() << '\n';
    return kExitData;
  }
  out << "extracted " << n << " snapshots (" << cfg.extraction.layout().size() << " features each) -> " << opt.out
      << '\n'
      << "  TenOrMore=" << counts[RegionCase::TenOrMore] << " OneToNine=" << counts[RegionCase::OneToNine]
      << " NoMalicious=" << counts[RegionCase::NoMalicious] << " Failed=" << counts[RegionCase::Failed] << '\n'
      << "  idf table: " << idf.doc_count << " documents, " << idf.df.size() << " trigrams -> "
      << idf_path_for(opt.out) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string features;
  std::string model_out;
  std::string config;
  std::optional<std::uint64_t> seed;
};

struct TrainReport {
  nn::Metrics train;
  nn::Metrics test;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

/// Split, scale, train and evaluate. Throws on data errors.
inline std::pair<nn::StoredModel, TrainReport> train_model(const FeatureSet& fs, const Config& cfg) {
  const Split sp = stratified_split(fs.labels, cfg.split, cfg.train.seed);
  const nn::Matrix xtr = fs.x.select_rows(sp.train);
  const nn::Matrix xte = fs.x.select_rows(sp.test);
  std::vector<int> ytr, yte;
  for (auto k : sp.train) ytr.push_back(fs.labels[k]);
  for (auto k : sp.test) yte.push_back(fs.labels[k]);

  nn::StoredModel model;
  model.scaler = nn::fit_scaler(xtr);
  model.train = cfg.train;
  model.network = cfg.network;
  model.params = nn::train(model.scaler.transform(xtr), ytr, cfg.network, cfg.train);
  TrainReport rep;
  rep.train_rows = xtr.rows;
  rep.test_rows = xte.rows;
  rep.train = nn::evaluate(model.params, model.scaler, xtr, ytr);
  rep.test = nn::evaluate(model.params, model.scaler, xte, yte);
  return {std::move(model), rep};
}

inline int cmd_train(const TrainOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    Config cfg = opt.config.empty() ? Config{} : load_config(opt.config);
    if (opt.seed) cfg.train.seed = *opt.seed;
    const FeatureSet fs = load_feature_file(opt.features);
    if (fs.x.rows == 0) throw DataError("feature file has no rows");
    auto [model, rep] = train_model(fs, cfg);
    nn::save_model(model, opt.model_out);
    out << "train (" << rep.train_rows << " rows): " << detail::format_metrics(rep.train) << '\n'
        << "test  (" << rep.test_rows << " rows): " << detail::format_metrics(rep.test) << '\n'
        << "model -> " << opt.model_out << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "train: " << e.what() << '\n';
    return kExitData;
  }
}

// ---------------------------------------------------------------------------

struct ClassifyOptions {
  std::string snapshot;
  std::string model;
  std::string idf;
  std::string string_scores;
};

inline int cmd_classify(const ClassifyOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto model = nn::load_model(opt.model);
    const auto [idf, ecfg] = load_idf(opt.idf);
    ScoreOverrides overrides;
    if (!opt.string_scores.empty()) overrides = load_score_overrides(opt.string_scores);
    const DisassemblySnapshot snap = load_snapshot(opt.snapshot);
    const Extraction ex = extract_features(snap, ecfg, idf, opt.string_scores.empty() ? nullptr : &overrides);
    if (ex.vector.size() != model.params.input_width) {
      throw ShapeError("feature width " + std::to_string(ex.vector.size()) + " does not match model input width " +
                       std::to_string(model.params.input_width));
    }
    if (!ex.failure.empty()) err << "warning: " << ex.failure << "; using default features\n";
    std::vector<double> x = ex.vector;
    model.scaler.transform_row(x);
    const double score = nn::predict(x, model.params);
    out << std::setprecision(6) << std::fixed << "binary_id=" << ex.binary_id << " score=" << score
        << " verdict=" << (score >= 0.5 ? "malware" : "benign") << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "classify: " << e.what() << '\n';
    return kExitData;
  }
}

// ---------------------------------------------------------------------------

struct InspectOptions {
  std::string snapshot;
  std::string config;
  std::string string_scores;
};

inline void write_report(const Extraction& ex, const DisassemblySnapshot& snap, std::ostream& out) {
  out << "binary " << ex.binary_id << '\n';
  out << "ranked strings (" << ex.ranked.size() << "):\n";
  for (const auto& r : ex.ranked) {
    std::vector<std::string> refs;
    for (auto a : r.ref_addrs) refs.push_back(detail::hex(a));
    out << "  " << std::fixed << std::setprecision(2) << r.score << "  \"" << r.text << "\"  refs [" << detail::join(refs)
        << "]\n";
  }
  out << "case: " << to_string(ex.selection.region_case);
  if (!ex.failure.empty()) out << " (" << ex.failure << ")";
  out << '\n';
  if (ex.selection.region_case == RegionCase::Failed) return;
  auto addr_of = [&](NodeId n) { return detail::hex(snap.entry_blocks.at(n).start_addr); };
  std::vector<std::string> seed_addrs;
  for (NodeId n : ex.selection.seeds) seed_addrs.push_back(addr_of(n));
  out << "seed nodes: [" << detail::join(seed_addrs) << "]\n";
  if (ex.selection.region_case == RegionCase::NoMalicious) out << "  (no mapped strings; seed = entry node)\n";
  for (std::size_t k = 0; k < ex.regions.size(); ++k) {
    const auto& r = ex.regions[k];
    out << "region " << k << ": seed node " << r.subgraph.seed << " @ " << addr_of(r.subgraph.seed);
    if (r.string_index >= 0) out << " via \"" << ex.ranked[static_cast<std::size_t>(r.string_index)].text << "\"";
    out << '\n';
    out << "  bfs order: [" << detail::join(r.subgraph.bfs_order) << "]\n";
    out << "  opcodes:   " << detail::join(r.features.opcode_tokens) << '\n';
    out << "  apis:      " << detail::join(r.features.api_tokens) << '\n';
    std::vector<unsigned> sig;
    for (auto s : r.features.signatures) sig.push_back(s.value);
    out << "  signature: " << detail::join(sig) << '\n';
  }
  out << "nop count: " << ex.global.nops << "  section ratio flag: " << ex.global.section_ratio << '\n';
}

inline int cmd_inspect(const InspectOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const Config cfg = opt.config.empty() ? Config{} : load_config(opt.config);
    ScoreOverrides overrides;
    if (!opt.string_scores.empty()) overrides = load_score_overrides(opt.string_scores);
    const DisassemblySnapshot snap = load_snapshot(opt.snapshot);
    const Extraction ex =
        extract_features(snap, cfg.extraction, IdfTable{}, opt.string_scores.empty() ? nullptr : &overrides);
    write_report(ex, snap, out);
    return kExitOk;
  } catch (const std::exception& e) {
    err << "inspect: " << e.what() << '\n';
    return kExitData;
  }
}

// ---------------------------------------------------------------------------

struct SynthOptions {
  std::string out_dir;
  std::size_t benign = 200;
  std::size_t malicious = 200;
  std::uint64_t seed = 1;
};

/// Writes <binary_id>.json snapshots and labels.csv into out_dir.
inline int cmd_synth(const SynthOptions& opt, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  try {
    fs::create_directories(opt.out_dir);
    std::ofstream labels(fs::path(opt.out_dir) / "labels.csv", std::ios::binary | std::ios::trunc);
    if (!labels) throw DataError("cannot write labels.csv");
    labels << "binary_id,label\n";
    auto emit = [&](std::size_t idx, bool malicious) {
      const auto s = synthetic::generate_snapshot(opt.seed, idx, malicious);
      std::ofstream f(fs::path(opt.out_dir) / (s.binary_id + ".json"), std::ios::binary | std::ios::trunc);
      if (!f) throw DataError("cannot write snapshot " + s.binary_id);
      f << to_json(s).dump() << '\n';
      labels << s.binary_id << ',' << (malicious ? 1 : 0) << '\n';
    };
    for (std::size_t k = 0; k < opt.benign; ++k) emit(k, false);
    for (std::size_t k = 0; k < opt.malicious; ++k) emit(k, true);
    out << "wrote " << opt.benign << " benign + " << opt.malicious << " malicious snapshots to " << opt.out_dir
        << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "synth: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace regionscan::cli
