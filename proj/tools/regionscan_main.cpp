#include <iostream>

#include <CLI11.hpp>

#include "regionscan/cli.hpp"

int main(int argc, char** argv) {
  using namespace regionscan::cli;
  CLI::App app{"Region-focused static malware feature extraction and classification"};
  app.require_subcommand(1);

  ExtractOptions ex;
  auto* extract = app.add_subcommand("extract", "Extract feature vectors from a snapshot corpus");
  extract->add_option("--corpus", ex.corpus, "Directory of snapshot JSON files")->required();
  extract->add_option("--labels", ex.labels, "CSV of binary_id,label")->required();
  extract->add_option("--config", ex.config, "JSON config file");
  extract->add_option("--out", ex.out, "Feature file to write (IDF table goes to <out>.idf.json)")->required();
  extract->add_option("--string-scores", ex.string_scores, "JSON object of string -> score overrides");
  extract->add_option("--jobs", ex.jobs, "Worker threads (0 = hardware concurrency)");

  TrainOptions tr;
  auto* train = app.add_subcommand("train", "Train and evaluate the classifier on a feature file");
  train->add_option("--features", tr.features, "Feature file from extract")->required();
  train->add_option("--model-out", tr.model_out, "Model file to write")->required();
  train->add_option("--config", tr.config, "JSON config file");
  std::uint64_t seed = 0;
  auto* seed_opt = train->add_option("--seed", seed, "Shuffle / init seed");

  ClassifyOptions cl;
  auto* classify = app.add_subcommand("classify", "Score one snapshot with a trained model");
  classify->add_option("--snapshot", cl.snapshot, "Snapshot JSON")->required();
  classify->add_option("--model", cl.model, "Model file")->required();
  classify->add_option("--idf", cl.idf, "IDF table written by extract")->required();
  classify->add_option("--string-scores", cl.string_scores, "JSON object of string -> score overrides");

  InspectOptions in;
  auto* inspect = app.add_subcommand("inspect", "Report ranked strings and detected regions of one snapshot");
  inspect->add_option("--snapshot", in.snapshot, "Snapshot JSON")->required();
  inspect->add_option("--config", in.config, "JSON config file");
  inspect->add_option("--string-scores", in.string_scores, "JSON object of string -> score overrides");

  SynthOptions sy;
  auto* synth = app.add_subcommand("synth", "Write a synthetic benign/malicious snapshot corpus");
  synth->add_option("--out", sy.out_dir, "Output directory")->required();
  synth->add_option("--benign", sy.benign, "Benign sample count");
  synth->add_option("--malicious", sy.malicious, "Malicious sample count");
  synth->add_option("--seed", sy.seed, "Generator seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*extract) return cmd_extract(ex, std::cout, std::cerr);
  if (*train) {
    if (*seed_opt) tr.seed = seed;
    return cmd_train(tr, std::cout, std::cerr);
  }
  if (*classify) return cmd_classify(cl, std::cout, std::cerr);
  if (*inspect) return cmd_inspect(in, std::cout, std::cerr);
  if (*synth) return cmd_synth(sy, std::cout, std::cerr);
  return kExitUsage;
}
