#include "vnegnn/model.hpp"

#include <cmath>

#include "vnegnn/errors.hpp"
#include "vnegnn/geometry.hpp"

namespace vnegnn::model {

using diff::Value;

namespace {

constexpr double kDistEps = 1e-8;

diff::MlpSpec edge_spec(const ModelConfig& cfg, int in_a, int in_b) {
  diff::MlpSpec s;
  s.widths = {in_a + in_b + 1, cfg.message_dim, cfg.message_dim};
  s.use_layer_norm = true;
  s.dropout_rate = cfg.dropout;
  return s;
}

diff::MlpSpec coord_spec(const ModelConfig& cfg) {
  diff::MlpSpec s;
  s.widths = {cfg.message_dim, cfg.message_dim, 1};
  s.zero_init_output = true;
  return s;
}

diff::MlpSpec feat_spec(const ModelConfig& cfg) {
  diff::MlpSpec s;
  s.widths = {cfg.feature_dim + cfg.message_dim, cfg.message_dim, cfg.feature_dim};
  s.use_layer_norm = true;
  s.dropout_rate = cfg.dropout;
  return s;
}

diff::MlpSpec confidence_spec(const ModelConfig& cfg) {
  diff::MlpSpec s;
  s.widths = {cfg.feature_dim, cfg.message_dim, 1};
  s.output_activation = diff::OutputActivation::kSigmoid;
  return s;
}

void init_block(const ModelConfig& cfg, diff::ParamStore& params,
                const std::string& prefix, Rng& rng) {
  mlp_init(edge_spec(cfg, cfg.feature_dim, cfg.feature_dim), params,
           prefix + ".edge", rng);
  mlp_init(coord_spec(cfg), params, prefix + ".coord", rng);
  mlp_init(feat_spec(cfg), params, prefix + ".feat", rng);
}

struct MessageOut {
  Value messages;   // E x message_dim (post layer-norm / dropout)
  Value coord_sum;  // n_dst x 3, unnormalized sum of weighted directions
  Value message_sum;  // n_dst x message_dim, unnormalized sum
};

// Shared core of every phase: gather endpoints, build [feat_dst, feat_src,
// dist] messages, run the edge/coord MLPs and scatter back to the targets.
MessageOut run_messages(const Value& coords_dst_space, const Value& feats_dst,
                        const Value& coords_src_space, const Value& feats_src,
                        const std::vector<int>& src, const std::vector<int>& dst,
                        int n_dst, bool squared_distance,
                        const diff::MlpSpec& e_spec, const diff::MlpSpec& x_spec,
                        const diff::ParamStore& params, const std::string& prefix,
                        Rng& rng, bool training) {
  Value xi = gather_rows(coords_dst_space, dst);
  Value xj = gather_rows(coords_src_space, src);
  Value diffv = sub(xi, xj);
  Value sq = row_sum(cmul(diffv, diffv));
  Value dist = vsqrt(sq);
  Value hi = gather_rows(feats_dst, dst);
  Value hj = gather_rows(feats_src, src);
  std::vector<Value> parts{hi, hj, squared_distance ? sq : dist};
  Value msg_in = concat_cols(parts);
  Value m = mlp_forward(e_spec, params, prefix + ".edge", msg_in, rng, training);
  Value w = mlp_forward(x_spec, params, prefix + ".coord", m, rng, training);
  Value dir = row_scale(diffv, reciprocal_shift(dist, kDistEps));
  MessageOut out;
  out.messages = m;
  out.coord_sum = scatter_sum_rows(row_scale(dir, w), dst, n_dst);
  out.message_sum = scatter_sum_rows(m, dst, n_dst);
  return out;
}

void check_finite(const Value& v, int layer, const char* phase, const char* what) {
  if (!v.val().allFinite())
    throw NumericError("non-finite " + std::string(what) + " after layer " +
                       std::to_string(layer) + " " + phase);
}

Value embed(const diff::ParamStore& params, const Value& raw) {
  return add_row_broadcast(matmul(raw, params.get("embed.w")),
                           params.get("embed.b"));
}

std::vector<int> iota_vec(int from, int count) {
  std::vector<int> v(count);
  for (int i = 0; i < count; ++i) v[i] = from + i;
  return v;
}

}  // namespace

void ModelConfig::validate() const {
  if (layers < 1) throw ConfigError("model: layers must be >= 1");
  if (feature_dim < 1 || message_dim < 1)
    throw ConfigError("model: feature/message dims must be >= 1");
  if (virtual_nodes < 0) throw ConfigError("model: virtual_nodes must be >= 0");
  if (coord_scale <= 0.0) throw ConfigError("model: coord_scale must be > 0");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("model: dropout must be in [0, 1)");
}

EdgeList edges_from_incoming(const std::vector<std::vector<int>>& incoming) {
  EdgeList e;
  e.n_nodes = static_cast<int>(incoming.size());
  e.inv_deg = Vec::Zero(e.n_nodes);
  for (int i = 0; i < e.n_nodes; ++i) {
    for (int j : incoming[i]) {
      e.src.push_back(j);
      e.dst.push_back(i);
    }
    if (!incoming[i].empty())
      e.inv_deg[i] = 1.0 / static_cast<double>(incoming[i].size());
  }
  return e;
}

void init_params(const ModelConfig& cfg, diff::ParamStore& params, Rng& rng) {
  cfg.validate();
  double bound = 1.0 / std::sqrt(static_cast<double>(cfg.input_feature_dim));
  params.create("embed.w", cfg.input_feature_dim, cfg.feature_dim, rng, bound);
  params.create("embed.b", 1, cfg.feature_dim, rng, bound);
  for (int l = 0; l < cfg.layers; ++l) {
    std::string base = "layer" + std::to_string(l);
    if (cfg.variant == Variant::kHeterogeneous) {
      init_block(cfg, params, base + ".aa", rng);
      init_block(cfg, params, base + ".av", rng);
      init_block(cfg, params, base + ".va", rng);
    } else {
      init_block(cfg, params, base, rng);
    }
  }
  double rb = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
  params.create("readout.w", cfg.feature_dim, 1, rng, rb);
  params.create("readout.b", 1, 1, rng, rb);
  mlp_init(confidence_spec(cfg), params, "confidence", rng);
}

std::pair<Value, Value> egnn_layer(const ModelConfig& cfg, const Value& coords,
                                   const Value& features, const EdgeList& edges,
                                   const diff::ParamStore& params,
                                   const std::string& prefix, Rng& rng,
                                   bool training) {
  diff::MlpSpec e_spec = edge_spec(cfg, cfg.feature_dim, cfg.feature_dim);
  diff::MlpSpec x_spec = coord_spec(cfg);
  diff::MlpSpec h_spec = feat_spec(cfg);

  MessageOut mo =
      run_messages(coords, features, coords, features, edges.src, edges.dst,
                   edges.n_nodes, /*squared_distance=*/true, e_spec, x_spec,
                   params, prefix, rng, training);
  Value inv_deg = diff::constant(Mat(edges.inv_deg));
  Value new_coords = add(coords, row_scale(mo.coord_sum, inv_deg));
  // Sum aggregation; empty neighborhoods contribute a zero message sum.
  std::vector<Value> parts{features, mo.message_sum};
  Value upd = mlp_forward(h_spec, params, prefix + ".feat", concat_cols(parts),
                          rng, training);
  return {new_coords, upd};
}

GraphState vn_layer(const ModelConfig& cfg, const GraphState& state,
                    const EdgeList& physical_edges,
                    const diff::ParamStore& params, int layer_index, Rng& rng,
                    bool training) {
  const int n = static_cast<int>(state.coords.rows());
  const int k = state.vn_coords.valid() ? static_cast<int>(state.vn_coords.rows()) : 0;
  const std::string base = "layer" + std::to_string(layer_index);

  diff::MlpSpec e_spec = edge_spec(cfg, cfg.feature_dim, cfg.feature_dim);
  diff::MlpSpec x_spec = coord_spec(cfg);
  diff::MlpSpec h_spec = feat_spec(cfg);

  // Phase I: physical <-> physical, mean aggregation, residual updates.
  MessageOut aa = run_messages(state.coords, state.features, state.coords,
                               state.features, physical_edges.src,
                               physical_edges.dst, n, /*squared_distance=*/false,
                               e_spec, x_spec, params, base + ".aa", rng, training);
  Value inv_deg = diff::constant(Mat(physical_edges.inv_deg));
  Value x_half = add(state.coords, row_scale(aa.coord_sum, inv_deg));
  std::vector<Value> aa_parts{state.features, row_scale(aa.message_sum, inv_deg)};
  Value h_half =
      add(state.features, mlp_forward(h_spec, params, base + ".aa.feat",
                                      concat_cols(aa_parts), rng, training));
  check_finite(x_half, layer_index, "phase I", "coordinates");
  check_finite(h_half, layer_index, "phase I", "features");

  GraphState out;
  out.coords = x_half;
  out.features = h_half;
  out.vn_coords = state.vn_coords;
  out.vn_features = state.vn_features;
  if (k == 0) return out;  // no virtual nodes: phase I only

  // Phase II: every physical node messages every virtual node; only (Z, V)
  // change.
  std::vector<int> src_pv, dst_pv;
  src_pv.reserve(static_cast<std::size_t>(n) * k);
  dst_pv.reserve(static_cast<std::size_t>(n) * k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < n; ++i) {
      src_pv.push_back(i);
      dst_pv.push_back(j);
    }
  MessageOut av = run_messages(state.vn_coords, state.vn_features, x_half,
                               h_half, src_pv, dst_pv, k,
                               /*squared_distance=*/false, e_spec, x_spec,
                               params, base + ".av", rng, training);
  double inv_n = 1.0 / static_cast<double>(n);
  Value z_next = add(state.vn_coords, diff::scale(av.coord_sum, inv_n));
  std::vector<Value> av_parts{state.vn_features, diff::scale(av.message_sum, inv_n)};
  Value v_next =
      add(state.vn_features, mlp_forward(h_spec, params, base + ".av.feat",
                                         concat_cols(av_parts), rng, training));
  check_finite(z_next, layer_index, "phase II", "virtual coordinates");
  check_finite(v_next, layer_index, "phase II", "virtual features");

  // Phase III: every virtual node messages every physical node; only (X, H)
  // change.
  std::vector<int> src_vp, dst_vp;
  src_vp.reserve(static_cast<std::size_t>(n) * k);
  dst_vp.reserve(static_cast<std::size_t>(n) * k);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < k; ++i) {
      src_vp.push_back(i);
      dst_vp.push_back(j);
    }
  MessageOut va = run_messages(x_half, h_half, z_next, v_next, src_vp, dst_vp,
                               n, /*squared_distance=*/false, e_spec, x_spec,
                               params, base + ".va", rng, training);
  double inv_k = 1.0 / static_cast<double>(k);
  Value x_next = add(x_half, diff::scale(va.coord_sum, inv_k));
  std::vector<Value> va_parts{h_half, diff::scale(va.message_sum, inv_k)};
  Value h_next =
      add(h_half, mlp_forward(h_spec, params, base + ".va.feat",
                              concat_cols(va_parts), rng, training));
  check_finite(x_next, layer_index, "phase III", "coordinates");
  check_finite(h_next, layer_index, "phase III", "features");

  out.coords = x_next;
  out.features = h_next;
  out.vn_coords = z_next;
  out.vn_features = v_next;
  return out;
}

Points init_virtual_coords(const Points& coords, int k, Rng& rng) {
  if (k < 1) throw ArgumentError("init_virtual_coords: k must be >= 1");
  Vec3 center = geom::centroid(coords);
  double radius = (coords.rowwise() - center.transpose()).rowwise().norm().maxCoeff();
  radius = std::max(radius, 1.0);  // degenerate single-point inputs
  geom::SphereGrid grid = geom::fibonacci_grid(k, center, radius);
  geom::RigidTransform rot = geom::random_rotation(rng);
  return geom::rotate_about(rot.rotation, center, grid.points);
}

std::vector<SitePrediction> ForwardResult::predictions() const {
  std::vector<SitePrediction> out;
  for (Eigen::Index i = 0; i < centers.rows(); ++i) {
    SitePrediction p;
    p.center = centers.val().row(i).transpose();
    p.confidence = confidences.val()(i, 0);
    out.push_back(p);
  }
  return out;
}

ForwardResult forward(const io::ProteinGraph& graph, const ModelConfig& cfg,
                      const diff::ParamStore& params, Rng& rng, bool training,
                      const Points* z0_override) {
  cfg.validate();
  const int n = graph.num_nodes();
  const int k = cfg.virtual_nodes;
  if (n < 1) throw EmptyStructureError("forward: empty graph");
  if (graph.features.cols() != cfg.input_feature_dim)
    throw DimensionError("forward: graph features have " +
                         std::to_string(graph.features.cols()) +
                         " columns, config expects " +
                         std::to_string(cfg.input_feature_dim));

  const double s = cfg.coord_scale;
  Points z0(0, 3);
  if (k > 0) {
    z0 = z0_override ? *z0_override : init_virtual_coords(graph.coords, k, rng);
    if (z0.rows() != k)
      throw DimensionError("forward: z0 override has " + std::to_string(z0.rows()) +
                           " rows, expected " + std::to_string(k));
  }

  Mat h_raw = graph.features;
  Mat v_raw = h_raw.colwise().mean().replicate(std::max(k, 0), 1);

  ForwardResult res;
  if (cfg.variant == Variant::kHeterogeneous) {
    GraphState state;
    state.coords = diff::constant(Mat(graph.coords / s));
    state.features = embed(params, diff::constant(h_raw));
    state.vn_coords = diff::constant(Mat(z0 / s));
    state.vn_features = embed(params, diff::constant(v_raw));
    EdgeList edges = edges_from_incoming(graph.incoming);
    for (int l = 0; l < cfg.layers; ++l)
      state = vn_layer(cfg, state, edges, params, l, rng, training);
    Value logits = add_row_broadcast(matmul(state.features, params.get("readout.w")),
                                     params.get("readout.b"));
    res.node_probs = diff::sigmoid(logits);
    res.centers_norm = state.vn_coords;
    res.centers = diff::scale(state.vn_coords, s);
    res.confidences = mlp_forward(confidence_spec(cfg), params, "confidence",
                                  state.vn_features, rng, training);
  } else {
    // Homogeneous: one EGNN over the union graph, virtual nodes fully
    // connected to the physical nodes, shared parameter set per layer.
    Mat coords_u(n + k, 3);
    coords_u.topRows(n) = graph.coords / s;
    if (k > 0) coords_u.bottomRows(k) = z0 / s;
    Mat feats_u(n + k, h_raw.cols());
    feats_u.topRows(n) = h_raw;
    if (k > 0) feats_u.bottomRows(k) = v_raw;

    std::vector<std::vector<int>> incoming(n + k);
    for (int i = 0; i < n; ++i) {
      incoming[i] = graph.incoming[i];
      for (int j = 0; j < k; ++j) incoming[i].push_back(n + j);
    }
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < n; ++i) incoming[n + j].push_back(i);
    EdgeList edges = edges_from_incoming(incoming);

    Value coords = diff::constant(std::move(coords_u));
    Value feats = embed(params, diff::constant(std::move(feats_u)));
    for (int l = 0; l < cfg.layers; ++l) {
      auto [c2, f2] = egnn_layer(cfg, coords, feats, edges, params,
                                 "layer" + std::to_string(l), rng, training);
      coords = c2;
      feats = f2;
      check_finite(coords, l, "union pass", "coordinates");
      check_finite(feats, l, "union pass", "features");
    }
    Value h_phys = gather_rows(feats, iota_vec(0, n));
    Value logits = add_row_broadcast(matmul(h_phys, params.get("readout.w")),
                                     params.get("readout.b"));
    res.node_probs = diff::sigmoid(logits);
    Value z_final = gather_rows(coords, iota_vec(n, k));
    res.centers_norm = z_final;
    res.centers = diff::scale(z_final, s);
    Value v_final = gather_rows(feats, iota_vec(n, k));
    res.confidences = mlp_forward(confidence_spec(cfg), params, "confidence",
                                  v_final, rng, training);
  }
  check_finite(res.node_probs, cfg.layers, "readout", "node probabilities");
  check_finite(res.centers, cfg.layers, "readout", "centers");
  check_finite(res.confidences, cfg.layers, "readout", "confidences");
  return res;
}

}  // namespace vnegnn::model
