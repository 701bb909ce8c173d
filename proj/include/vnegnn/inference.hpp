#pragma once

#include <limits>
#include <vector>

#include "vnegnn/model.hpp"
#include "vnegnn/types.hpp"

namespace vnegnn::infer {

struct MeanShiftResult {
  std::vector<int> assignment;  // cluster id per input point
  Points modes;                 // one row per cluster
};

// Flat-kernel mean shift: each point iterates to the mean of the input points
// within `bandwidth` until the displacement drops below `tol` or `max_iters`
// is hit; converged modes within bandwidth/2 merge into one cluster.
MeanShiftResult mean_shift(const Points& points, double bandwidth,
                           int max_iters = 300, double tol = 1e-6);

struct ClusteredPrediction {
  Vec3 center = Vec3::Zero();  // mean of member centers
  double confidence = 0.0;     // mean of member confidences
  int member_count = 0;
};

// Clusters predictions by mean shift on their centers and sorts by confidence
// (descending); ties broken by ascending lexicographic center coordinates.
std::vector<ClusteredPrediction> cluster_predictions(
    const std::vector<model::SitePrediction>& predictions, double bandwidth);

std::vector<ClusteredPrediction> select_top_m(
    const std::vector<ClusteredPrediction>& clusters, int m);

struct SiteMatch {
  int site = -1;
  int prediction = -1;        // -1 when no prediction was left for this site
  double center_distance = std::numeric_limits<double>::infinity();
  double ligand_distance = std::numeric_limits<double>::infinity();
  bool dcc_success = false;
  bool dca_success = false;
};

struct DccDcaResult {
  int dcc_successes = 0;
  int dca_successes = 0;
  std::vector<SiteMatch> matches;  // one per ground-truth site
};

// Greedy nearest-first one-to-one matching of predictions to sites; DCC
// succeeds when the matched center distance is <= threshold, DCA when the
// predicted center is within threshold of any ligand atom of the matched site.
DccDcaResult dcc_dca(const std::vector<ClusteredPrediction>& selected,
                     const Points& site_centers,
                     const std::vector<Points>& site_atoms,
                     double threshold = 4.0);

}  // namespace vnegnn::infer
