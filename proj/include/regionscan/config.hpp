#pragma once

// Run configuration read from a flat JSON object. Every key is optional;
// unknown keys are rejected.

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "regionscan/classifier/model_io.hpp"
#include "regionscan/classifier/network.hpp"
#include "regionscan/error.hpp"
#include "regionscan/pipeline.hpp"

namespace regionscan {

struct Config {
  ExtractionConfig extraction;
  nn::NetworkConfig network;
  nn::TrainConfig train;
  double split = 0.7;
};

inline Config config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{
      "levels",   "max_regions",   "trigrams",   "trigram_dim", "seq_dim", "sig_dim",    "whole_sig_dim",
      "ratio_threshold", "max_functions", "epochs", "batch",     "learning_rate", "optimizer", "widths",
      "batch_norm", "dropout",     "seed",       "split"};
  if (!j.is_object()) throw DataError("config: top level must be an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw DataError("config: unknown key '" + key + "'");
  }
  Config c;
  try {
    auto& e = c.extraction;
    e.levels = j.value("levels", e.levels);
    e.max_regions = j.value("max_regions", e.max_regions);
    e.trigrams = j.value("trigrams", e.trigrams);
    e.trigram_dim = j.value("trigram_dim", e.trigram_dim);
    e.seq_dim = j.value("seq_dim", e.seq_dim);
    e.sig_dim = j.value("sig_dim", e.sig_dim);
    e.whole_sig_dim = j.value("whole_sig_dim", e.whole_sig_dim);
    e.ratio_threshold = j.value("ratio_threshold", e.ratio_threshold);
    e.max_functions = j.value("max_functions", e.max_functions);
    c.train.epochs = j.value("epochs", c.train.epochs);
    c.train.batch_size = j.value("batch", c.train.batch_size);
    c.train.learning_rate = j.value("learning_rate", c.train.learning_rate);
    if (j.contains("optimizer")) c.train.optimizer = nn::optimizer_from_string(j.at("optimizer").get<std::string>());
    c.train.seed = j.value("seed", c.train.seed);
    c.network.widths = j.value("widths", c.network.widths);
    c.network.batch_norm = j.value("batch_norm", c.network.batch_norm);
    c.network.dropout = j.value("dropout", c.network.dropout);
    c.split = j.value("split", c.split);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
  const auto& e = c.extraction;
  if (e.levels < 0) throw DataError("config: levels must be >= 0");
  if (e.max_regions == 0 || e.seq_dim == 0 || e.sig_dim == 0 || e.whole_sig_dim == 0 || e.trigram_dim == 0) {
    throw DataError("config: dimensions and max_regions must be positive");
  }
  if (!(c.split > 0.0 && c.split < 1.0)) throw DataError("config: split must lie in (0, 1)");
  if (c.train.batch_size == 0) throw DataError("config: batch must be positive");
  return c;
}

inline Config load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return config_from_json(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("config is not valid JSON: ") + e.what());
  }
}

}  // namespace regionscan
