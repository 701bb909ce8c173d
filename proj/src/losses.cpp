#include "vnegnn/losses.hpp"

#include <limits>

#include "vnegnn/errors.hpp"

namespace vnegnn::loss {

using diff::Value;

Value dice_loss(const std::vector<int>& labels, const Value& probs) {
  if (static_cast<Eigen::Index>(labels.size()) != probs.rows() || probs.cols() != 1)
    throw ContractError("dice_loss: " + std::to_string(labels.size()) +
                        " labels vs " + std::to_string(probs.rows()) +
                        "x" + std::to_string(probs.cols()) + " probabilities");
  Mat y(labels.size(), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i), 0) = labels[i];
  Value yv = diff::constant(y);
  Value num = diff::add_scalar(diff::scale(diff::sum(diff::cmul(yv, probs)), 2.0), 1.0);
  Value den = diff::add_scalar(diff::sum(probs), 1.0 + y.sum());
  return diff::add_scalar(diff::scale(diff::vdiv(num, den), -1.0), 1.0);
}

Value bsc_loss(const Points& centers, const Value& predictions, BscMode mode,
               double huber_delta, bool* warned) {
  const int m = static_cast<int>(centers.rows());
  const int k = static_cast<int>(predictions.rows());
  if (warned) *warned = false;
  if (m == 0) {
    if (warned) *warned = true;
    return diff::constant(0.0);
  }
  if (k == 0) throw ContractError("bsc_loss: no predictions");

  // Residual block: row (i*k + j) = centers[i] - predictions[j].
  std::vector<int> rep_pred(static_cast<std::size_t>(m) * k);
  Mat rep_centers(static_cast<Eigen::Index>(m) * k, 3);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) {
      rep_pred[static_cast<std::size_t>(i) * k + j] = j;
      rep_centers.row(static_cast<Eigen::Index>(i) * k + j) = centers.row(i);
    }
  Value resid = diff::sub(diff::constant(std::move(rep_centers)),
                          diff::gather_rows(predictions, std::move(rep_pred)));
  Value penalty;
  if (mode == BscMode::kSquared) {
    penalty = diff::row_sum(diff::cmul(resid, resid));
  } else {
    penalty = diff::row_sum(diff::huber(resid, huber_delta));
  }
  Value grid = diff::reshape_rowmajor(penalty, m, k);
  return diff::mean(diff::row_min(grid));
}

Vec confidence_targets(const Points& centers, const Points& predictions,
                       double gamma, double c0) {
  Vec out = Vec::Constant(predictions.rows(), c0);
  if (centers.rows() == 0) return out;
  for (Eigen::Index kdx = 0; kdx < predictions.rows(); ++kdx) {
    double d = (centers.rowwise() - predictions.row(kdx)).rowwise().norm().minCoeff();
    out[kdx] = d <= gamma ? 1.0 - d / (2.0 * gamma) : c0;
  }
  return out;
}

Value confidence_loss(const Vec& targets, const Value& predicted) {
  if (targets.size() != predicted.rows() || predicted.cols() != 1)
    throw ContractError("confidence_loss: " + std::to_string(targets.size()) +
                        " targets vs " + std::to_string(predicted.rows()) +
                        " predictions");
  Value diffv = diff::sub(predicted, diff::constant(Mat(targets)));
  return diff::mean(diff::cmul(diffv, diffv));
}

std::pair<Value, LossReport> total_loss(const TotalLossInputs& in, BscMode mode,
                                        double huber_delta, double gamma,
                                        double conf_weight) {
  LossReport report;
  Value dice = dice_loss(*in.labels, in.node_probs);
  Value bsc = bsc_loss(in.site_centers_norm, in.centers_norm, mode, huber_delta,
                       &report.bsc_unsupervised);
  Vec targets = confidence_targets(in.site_centers, in.centers_detached, gamma);
  Value conf = confidence_loss(targets, in.confidences);
  Value total = diff::add(diff::add(bsc, dice), diff::scale(conf, conf_weight));

  report.dice = dice.val()(0, 0);
  report.bsc = bsc.val()(0, 0);
  report.confidence = conf.val()(0, 0);
  report.total = total.val()(0, 0);
  for (Eigen::Index m = 0; m < in.site_centers_norm.rows(); ++m) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < in.centers_norm.rows(); ++j) {
      double d = (in.site_centers_norm.row(m) - in.centers_norm.val().row(j)).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(j);
      }
    }
    report.matched_pairs.emplace_back(static_cast<int>(m), best);
  }
  return {total, report};
}

}  // namespace vnegnn::loss
