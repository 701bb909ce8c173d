#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "vnegnn/config.hpp"
#include "vnegnn/diff/param_store.hpp"
#include "vnegnn/graphio.hpp"
#include "vnegnn/inference.hpp"
#include "vnegnn/losses.hpp"

namespace vnegnn {

// Reduce-on-plateau: after `active_after` epochs, multiply the rate by
// `factor` whenever the metric fails to improve for `patience` epochs.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, double factor, int patience, int active_after)
      : lr_(lr), factor_(factor), patience_(patience), active_after_(active_after) {}

  double observe(int epoch, double metric);
  double lr() const { return lr_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  int active_after_;
  double best_ = std::numeric_limits<double>::infinity();
  int stall_ = 0;
};

struct Dataset {
  std::vector<io::ProteinGraph> train;
  std::vector<io::ProteinGraph> val;
};

// Synthetic graphs or a directory of PDB files (one graph per chain, sites
// assigned to chains that carry at least one positive label from them).
// 10% validation split by id hash.
Dataset load_dataset(const RunConfig& cfg);

// Held-out synthetic evaluation set drawn from a stream disjoint from the
// training ids.
std::vector<io::ProteinGraph> make_synthetic_eval_set(const RunConfig& cfg);

// One graph's loss under the run config; rotation/dropout randomness comes
// from `rng`. The returned pair is (differentiable total, report).
std::pair<diff::Value, loss::LossReport> graph_loss(
    const io::ProteinGraph& graph, const RunConfig& cfg,
    const diff::ParamStore& params, Rng& rng, bool training);

struct EpochLoss {
  double dice = 0.0, bsc = 0.0, confidence = 0.0, total = 0.0;
};

struct TrainResult {
  diff::ParamStore best_params;
  int best_epoch = -1;
  double best_val_metric = std::numeric_limits<double>::infinity();
  std::vector<EpochLoss> train_curve;
  std::vector<EpochLoss> val_curve;
  std::vector<double> best_val_record;  // best-so-far validation total per epoch
  double final_lr = 0.0;
};

// Full training loop: per-sample grid rotation each epoch, micro-batch
// gradient accumulation, plateau LR decay, best-validation checkpoint.
// Deterministic given (cfg, seed) regardless of worker count.
TrainResult train_model(const RunConfig& cfg, const Dataset& data,
                        std::ostream* log = nullptr);

// Prediction for a single graph: forward with a seeded grid rotation, then
// mean-shift clustering; all clusters returned, sorted by confidence.
std::vector<infer::ClusteredPrediction> predict_graph(
    const io::ProteinGraph& graph, const RunConfig& cfg,
    const diff::ParamStore& params, std::uint64_t rotation_seed);

struct EvalSummary {
  int proteins = 0;
  int skipped_no_sites = 0;
  int total_sites = 0;
  double dcc_rate = 0.0;
  double dca_rate = 0.0;
  std::vector<std::pair<double, std::pair<double, double>>> sweep;  // thr -> rates
  std::vector<std::string> jsonl;  // one line per protein
};

// Top-M selection with M = site count per graph, greedy matching, success
// rates at cfg threshold plus a 1..10 A sweep.
EvalSummary evaluate_graphs(const std::vector<io::ProteinGraph>& graphs,
                            const RunConfig& cfg, const diff::ParamStore& params,
                            std::uint64_t rotation_seed);

std::string loss_curve_csv(const std::vector<EpochLoss>& curve);

}  // namespace vnegnn
