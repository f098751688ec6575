#pragma once

// Model container: network weights, batch-norm statistics, scaler and the
// configuration the model was trained with, as versioned JSON.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "regionscan/classifier/network.hpp"
#include "regionscan/classifier/scaler.hpp"
#include "regionscan/error.hpp"

namespace regionscan::nn {

inline constexpr const char* kModelFormat = "regionscan-model";
inline constexpr int kModelVersion = 1;

struct StoredModel {
  ModelParams params;
  ScalerParams scaler;
  TrainConfig train;
  NetworkConfig network;
};

inline const char* to_string(Optimizer o) { return o == Optimizer::Adam ? "adam" : "sgd"; }

inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::Adam;
  if (s == "sgd") return Optimizer::Sgd;
  throw DataError("unknown optimizer '" + s + "' (expected adam or sgd)");
}

inline nlohmann::json to_json(const StoredModel& m) {
  using nlohmann::json;
  json layers = json::array();
  for (const auto& l : m.params.layers) {
    json jl{{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}};
    if (l.bn) {
      jl["batch_norm"] = {{"gamma", l.bn->gamma},
                          {"beta", l.bn->beta},
                          {"running_mean", l.bn->running_mean},
                          {"running_var", l.bn->running_var}};
    }
    layers.push_back(std::move(jl));
  }
  return json{{"format", kModelFormat},
              {"version", kModelVersion},
              {"input_width", m.params.input_width},
              {"widths", m.params.widths()},
              {"dropout", m.params.dropout},
              {"layers", std::move(layers)},
              {"scaler", {{"mean", m.scaler.mean}, {"std", m.scaler.std}}},
              {"train_config",
               {{"epochs", m.train.epochs},
                {"batch_size", m.train.batch_size},
                {"learning_rate", m.train.learning_rate},
                {"optimizer", to_string(m.train.optimizer)},
                {"seed", m.train.seed}}},
              {"network_config",
               {{"widths", m.network.widths}, {"batch_norm", m.network.batch_norm}, {"dropout", m.network.dropout}}}};
}

inline StoredModel model_from_json(const nlohmann::json& j) {
  StoredModel m;
  try {
    if (j.at("format").get<std::string>() != kModelFormat || j.at("version").get<int>() != kModelVersion) {
      throw DataError("model file: unsupported format or version");
    }
    m.params.input_width = j.at("input_width").get<std::size_t>();
    m.params.dropout = j.at("dropout").get<double>();
    std::size_t in = m.params.input_width;
    for (const auto& jl : j.at("layers")) {
      DenseLayer l;
      l.in = jl.at("in").get<std::size_t>();
      l.out = jl.at("out").get<std::size_t>();
      l.weight = jl.at("weight").get<std::vector<double>>();
      l.bias = jl.at("bias").get<std::vector<double>>();
      if (l.in != in || l.weight.size() != l.in * l.out || l.bias.size() != l.out) {
        throw ShapeError("model file: layer shapes do not chain");
      }
      if (auto it = jl.find("batch_norm"); it != jl.end()) {
        BatchNorm bn{it->at("gamma").get<std::vector<double>>(), it->at("beta").get<std::vector<double>>(),
                     it->at("running_mean").get<std::vector<double>>(),
                     it->at("running_var").get<std::vector<double>>()};
        if (bn.gamma.size() != l.out || bn.beta.size() != l.out || bn.running_mean.size() != l.out ||
            bn.running_var.size() != l.out) {
          throw ShapeError("model file: batch-norm width mismatch");
        }
        l.bn = std::move(bn);
      }
      in = l.out;
      m.params.layers.push_back(std::move(l));
    }
    if (m.params.layers.empty() || m.params.layers.back().out != 1) throw ShapeError("model file: last width must be 1");
    m.scaler.mean = j.at("scaler").at("mean").get<std::vector<double>>();
    m.scaler.std = j.at("scaler").at("std").get<std::vector<double>>();
    if (m.scaler.mean.size() != m.params.input_width || m.scaler.std.size() != m.params.input_width) {
      throw ShapeError("model file: scaler width does not match input width");
    }
    const auto& tc = j.at("train_config");
    m.train.epochs = tc.at("epochs").get<std::size_t>();
    m.train.batch_size = tc.at("batch_size").get<std::size_t>();
    m.train.learning_rate = tc.at("learning_rate").get<double>();
    m.train.optimizer = optimizer_from_string(tc.at("optimizer").get<std::string>());
    m.train.seed = tc.at("seed").get<std::uint64_t>();
    const auto& nc = j.at("network_config");
    m.network.widths = nc.at("widths").get<std::vector<std::size_t>>();
    m.network.batch_norm = nc.at("batch_norm").get<bool>();
    m.network.dropout = nc.at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  return m;
}

inline void save_model(const StoredModel& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write model file '" + path + "'");
  out << to_json(m).dump() << '\n';
  if (!out) throw DataError("failed writing model file '" + path + "'");
}

inline StoredModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("model file is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace regionscan::nn
