#include "vnegnn/inference.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>

#include "vnegnn/errors.hpp"

namespace vnegnn::infer {

MeanShiftResult mean_shift(const Points& points, double bandwidth,
                           int max_iters, double tol) {
  if (bandwidth <= 0.0) throw ArgumentError("mean_shift: bandwidth must be > 0");
  MeanShiftResult result;
  const int n = static_cast<int>(points.rows());
  if (n == 0) {
    result.modes.resize(0, 3);
    return result;
  }

  Points converged(n, 3);
  for (int i = 0; i < n; ++i) {
    Vec3 p = points.row(i).transpose();
    for (int it = 0; it < max_iters; ++it) {
      Vec3 sum = Vec3::Zero();
      int count = 0;
      for (int j = 0; j < n; ++j) {
        if ((points.row(j).transpose() - p).norm() <= bandwidth) {
          sum += points.row(j).transpose();
          ++count;
        }
      }
      Vec3 next = sum / count;  // window always contains p itself
      double shift = (next - p).norm();
      p = next;
      if (shift < tol) break;
    }
    converged.row(i) = p.transpose();
  }

  // Union modes within bandwidth/2 of each other.
  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if ((converged.row(i) - converged.row(j)).norm() <= 0.5 * bandwidth)
        parent[find(i)] = find(j);

  std::vector<int> cluster_of_root(n, -1);
  int n_clusters = 0;
  result.assignment.resize(n);
  for (int i = 0; i < n; ++i) {
    int r = find(i);
    if (cluster_of_root[r] < 0) cluster_of_root[r] = n_clusters++;
    result.assignment[i] = cluster_of_root[r];
  }
  result.modes = Points::Zero(n_clusters, 3);
  std::vector<int> counts(n_clusters, 0);
  for (int i = 0; i < n; ++i) {
    result.modes.row(result.assignment[i]) += converged.row(i);
    ++counts[result.assignment[i]];
  }
  for (int c = 0; c < n_clusters; ++c) result.modes.row(c) /= counts[c];
  return result;
}

std::vector<ClusteredPrediction> cluster_predictions(
    const std::vector<model::SitePrediction>& predictions, double bandwidth) {
  const int n = static_cast<int>(predictions.size());
  if (n == 0) return {};
  Points centers(n, 3);
  for (int i = 0; i < n; ++i) centers.row(i) = predictions[i].center.transpose();
  MeanShiftResult ms = mean_shift(centers, bandwidth);

  const int n_clusters = static_cast<int>(ms.modes.rows());
  std::vector<ClusteredPrediction> out(n_clusters);
  for (int i = 0; i < n; ++i) {
    ClusteredPrediction& c = out[ms.assignment[i]];
    c.center += predictions[i].center;
    c.confidence += predictions[i].confidence;
    ++c.member_count;
  }
  for (ClusteredPrediction& c : out) {
    c.center /= c.member_count;
    c.confidence /= c.member_count;
  }
  std::sort(out.begin(), out.end(),
            [](const ClusteredPrediction& a, const ClusteredPrediction& b) {
              if (a.confidence != b.confidence) return a.confidence > b.confidence;
              if (a.center.x() != b.center.x()) return a.center.x() < b.center.x();
              if (a.center.y() != b.center.y()) return a.center.y() < b.center.y();
              return a.center.z() < b.center.z();
            });
  return out;
}

std::vector<ClusteredPrediction> select_top_m(
    const std::vector<ClusteredPrediction>& clusters, int m) {
  if (m < 0) throw ArgumentError("select_top_m: m must be >= 0");
  int take = std::min<int>(m, static_cast<int>(clusters.size()));
  return {clusters.begin(), clusters.begin() + take};
}

DccDcaResult dcc_dca(const std::vector<ClusteredPrediction>& selected,
                     const Points& site_centers,
                     const std::vector<Points>& site_atoms, double threshold) {
  const int n_sites = static_cast<int>(site_centers.rows());
  const int n_preds = static_cast<int>(selected.size());
  DccDcaResult result;
  result.matches.resize(n_sites);
  for (int m = 0; m < n_sites; ++m) result.matches[m].site = m;
  if (n_sites == 0 || n_preds == 0) return result;

  // All (prediction, site) center distances, nearest pairs first; each side
  // consumed at most once.
  struct Pair {
    double d;
    int pred, site;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n_sites) * n_preds);
  for (int p = 0; p < n_preds; ++p)
    for (int m = 0; m < n_sites; ++m)
      pairs.push_back(
          {(selected[p].center - site_centers.row(m).transpose()).norm(), p, m});
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.site < b.site;
  });

  std::vector<bool> pred_used(n_preds, false), site_used(n_sites, false);
  for (const Pair& pr : pairs) {
    if (pred_used[pr.pred] || site_used[pr.site]) continue;
    pred_used[pr.pred] = true;
    site_used[pr.site] = true;
    SiteMatch& match = result.matches[pr.site];
    match.prediction = pr.pred;
    match.center_distance = pr.d;
    match.ligand_distance =
        (site_atoms[pr.site].rowwise() - selected[pr.pred].center.transpose())
            .rowwise()
            .norm()
            .minCoeff();
    match.dcc_success = match.center_distance <= threshold;
    match.dca_success = match.ligand_distance <= threshold;
    if (match.dcc_success) ++result.dcc_successes;
    if (match.dca_success) ++result.dca_successes;
  }
  return result;
}

}  // namespace vnegnn::infer
