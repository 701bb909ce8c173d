#pragma once

#include <utility>
#include <vector>

#include "vnegnn/diff/value.hpp"
#include "vnegnn/types.hpp"

namespace vnegnn::loss {

enum class BscMode { kSquared, kHuber };

// 1 - (2*sum(y*p) + 1) / (sum(y) + sum(p) + 1). `labels` are 0/1 constants,
// `probs` differentiable values in [0, 1].
diff::Value dice_loss(const std::vector<int>& labels, const diff::Value& probs);

// (1/M) * sum_m min_k rho(y_m - z_k). Squared mode: rho = |r|^2 as printed;
// Huber mode: rho = sum over coordinates of huber_delta(r_c). The minimum is
// taken over the penalty itself, so gradients flow to the matched prediction
// only. M = 0 yields a constant 0 (no supervision) and sets *warned.
diff::Value bsc_loss(const Points& centers, const diff::Value& predictions,
                     BscMode mode, double huber_delta = 1.0,
                     bool* warned = nullptr);

// Piecewise-linear confidence target per prediction from the distance d to
// its nearest center (Angstrom): 1 - d/(2*gamma) when d <= gamma, else c0.
Vec confidence_targets(const Points& centers, const Points& predictions,
                       double gamma = 4.0, double c0 = 0.001);

// (1/K) * sum (c_k - chat_k)^2.
diff::Value confidence_loss(const Vec& targets, const diff::Value& predicted);

struct LossReport {
  double dice = 0.0;
  double bsc = 0.0;
  double confidence = 0.0;
  double total = 0.0;
  // (site index, matched prediction index) under min-matching.
  std::vector<std::pair<int, int>> matched_pairs;
  bool bsc_unsupervised = false;
};

struct TotalLossInputs {
  const std::vector<int>* labels = nullptr;   // N
  diff::Value node_probs;                     // N x 1
  Points site_centers_norm;                   // M x 3, normalized frame
  diff::Value centers_norm;                   // K x 3, normalized frame
  Points site_centers;                        // M x 3, Angstrom
  Points centers_detached;                    // K x 3, Angstrom (no grad)
  diff::Value confidences;                    // K x 1
};

// total = bsc + dice + conf_weight * confidence; dice weight fixed at 1.
std::pair<diff::Value, LossReport> total_loss(const TotalLossInputs& in,
                                              BscMode mode, double huber_delta,
                                              double gamma, double conf_weight);

}  // namespace vnegnn::loss
