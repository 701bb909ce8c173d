#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vnegnn/expressivity.hpp"
#include "vnegnn/losses.hpp"
#include "vnegnn/model.hpp"

namespace vnegnn {

struct OptimizerConfig {
  double lr = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 8;
  double lr_decay_factor = 0.1;
  int lr_patience = 10;
  int lr_decay_after = 100;  // plateau decay only active past this epoch
  double val_fraction = 0.1;
  std::string select_metric = "loss";  // or "dcc"
};

struct LossConfig {
  double gamma = 4.0;
  double confidence_weight = 1.0;
  std::string bsc_mode = "huber";  // or "squared"
  double huber_delta = 1.0;

  loss::BscMode mode() const;
};

struct DataConfig {
  std::string kind = "synthetic";  // or "pdb_dir"
  std::string path;
  int count = 200;       // synthetic: training graphs
  int nodes = 48;        // synthetic: nodes per graph
  int pockets = 2;       // synthetic: pockets per graph
  int eval_count = 50;   // synthetic: held-out graphs
  double label_radius = 4.0;
  int min_ligand_atoms = 6;
};

struct InferenceConfig {
  double bandwidth = 5.0;
  double threshold = 4.0;
};

struct PathsConfig {
  std::string checkpoint = "checkpoint.json";
  std::string out_dir = ".";
};

// Whole-run configuration; serializes to/from JSON losslessly and rejects
// unknown keys.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string features = "onehot";
  model::ModelConfig model;
  OptimizerConfig optimizer;
  TrainConfig train;
  LossConfig loss;
  DataConfig data;
  InferenceConfig inference;
  kchain::KChainRunConfig kchain;
  PathsConfig paths;

  void validate() const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig from_file(const std::string& path);

  bool operator==(const RunConfig& other) const {
    return to_json() == other.to_json();
  }
};

std::string variant_name(model::Variant v);
model::Variant variant_from_name(const std::string& name);

// The model-identity slice stored inside checkpoints.
std::string model_meta_json(const model::ModelConfig& m);
model::ModelConfig model_meta_from_json(const std::string& text);

}  // namespace vnegnn
