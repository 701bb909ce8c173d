#pragma once

#include <string>
#include <vector>

#include "vnegnn/diff/mlp.hpp"
#include "vnegnn/diff/param_store.hpp"
#include "vnegnn/graphio.hpp"
#include "vnegnn/types.hpp"

namespace vnegnn::model {

enum class Variant { kHeterogeneous, kHomogeneous };

struct ModelConfig {
  int layers = 5;
  int feature_dim = 100;   // width of node/virtual features after embedding
  int message_dim = 100;
  int virtual_nodes = 8;
  double coord_scale = 5.0;  // coordinates divided on entry, centers rescaled on exit
  double dropout = 0.1;
  Variant variant = Variant::kHeterogeneous;
  int input_feature_dim = io::kFeatureDim;

  void validate() const;
};

// The quadruple flowing through the layers: physical coordinates/features and
// virtual coordinates/features. K may be zero.
struct GraphState {
  diff::Value coords;       // N x 3
  diff::Value features;     // N x D
  diff::Value vn_coords;    // K x 3
  diff::Value vn_features;  // K x D
};

// Directed edges (src -> dst) plus per-target 1/|N(i)|.
struct EdgeList {
  std::vector<int> src;
  std::vector<int> dst;
  Vec inv_deg;
  int n_nodes = 0;
};

EdgeList edges_from_incoming(const std::vector<std::vector<int>>& incoming);

// Creates every parameter of the network in a deterministic order.
void init_params(const ModelConfig& cfg, diff::ParamStore& params, Rng& rng);

// Plain EGNN layer: squared-distance messages, sum aggregation, coordinate
// update with 1/|N(i)| prefactor, feature update without residual. Nodes with
// no incoming edges keep their coordinates.
std::pair<diff::Value, diff::Value> egnn_layer(
    const ModelConfig& cfg, const diff::Value& coords,
    const diff::Value& features, const EdgeList& edges,
    const diff::ParamStore& params, const std::string& prefix, Rng& rng,
    bool training);

// One heterogeneous layer: phase I physical<->physical (mean aggregation,
// residual updates, unsquared distances), phase II all-physical -> virtual,
// phase III all-virtual -> physical. Distinct parameter sets per phase; with
// K = 0 only phase I runs.
GraphState vn_layer(const ModelConfig& cfg, const GraphState& state,
                    const EdgeList& physical_edges,
                    const diff::ParamStore& params, int layer_index, Rng& rng,
                    bool training);

// Initial virtual coordinates: Fibonacci grid at the coordinate centroid with
// radius = distance to the farthest point, randomly rotated about the centroid.
Points init_virtual_coords(const Points& coords, int k, Rng& rng);

struct SitePrediction {
  Vec3 center = Vec3::Zero();  // Angstrom
  double confidence = 0.0;     // in [0, 1]
  int source_count = 1;
};

struct ForwardResult {
  diff::Value node_probs;    // N x 1, sigmoid readout of final features
  diff::Value centers_norm;  // K x 3 in the normalized frame (for the loss)
  diff::Value centers;       // K x 3 in Angstrom
  diff::Value confidences;   // K x 1

  std::vector<SitePrediction> predictions() const;
};

// Full pass: normalization, virtual-node init, L layers (heterogeneous
// three-phase or homogeneous union-graph per cfg.variant), readouts.
// `z0_override` (Angstrom) replaces the sampled grid when provided.
// Throws NumericError naming the layer and phase if values go non-finite.
ForwardResult forward(const io::ProteinGraph& graph, const ModelConfig& cfg,
                      const diff::ParamStore& params, Rng& rng, bool training,
                      const Points* z0_override = nullptr);

}  // namespace vnegnn::model
