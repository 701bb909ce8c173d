#include "vnegnn/expressivity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <sstream>
#include <thread>

#include "vnegnn/errors.hpp"
#include "vnegnn/model.hpp"
#include "vnegnn/threading.hpp"

namespace vnegnn::kchain {

namespace {

struct ChainGraph {
  Points coords;
  std::vector<std::vector<int>> incoming;
  int label = 0;
};

ChainGraph union_graph(const io::KChainInstance& inst, bool with_virtual_node) {
  ChainGraph g;
  const int n = static_cast<int>(inst.coords.rows());
  g.label = inst.label;
  if (!with_virtual_node) {
    g.coords = inst.coords;
    g.incoming = io::kchain_adjacency(n);
    return g;
  }
  g.coords.resize(n + 1, 3);
  g.coords.topRows(n) = inst.coords;
  g.coords.row(n) = inst.virtual_seed.transpose();
  g.incoming = io::kchain_adjacency(n);
  g.incoming.resize(n + 1);
  for (int i = 0; i < n; ++i) {
    g.incoming[i].push_back(n);
    g.incoming[n].push_back(i);
  }
  return g;
}

Mat chain_features(int n_physical, int n_virtual) {
  Mat f = Mat::Zero(n_physical + n_virtual, 2);
  f.topRows(n_physical).col(0).setOnes();
  f.bottomRows(n_virtual).col(1).setOnes();
  return f;
}

diff::Value classify_logit(const ChainGraph& g, const model::ModelConfig& cfg,
                           const diff::ParamStore& params, Rng& rng) {
  const int total = static_cast<int>(g.coords.rows());
  model::EdgeList edges = model::edges_from_incoming(g.incoming);
  int n_virtual = cfg.virtual_nodes;
  diff::Value coords = diff::constant(Mat(g.coords));
  diff::Value feats = diff::add_row_broadcast(
      diff::matmul(diff::constant(chain_features(total - n_virtual, n_virtual)),
                   params.get("embed.w")),
      params.get("embed.b"));
  for (int l = 0; l < cfg.layers; ++l) {
    auto [c2, f2] = model::egnn_layer(cfg, coords, feats, edges, params,
                                      "layer" + std::to_string(l), rng, false);
    coords = c2;
    feats = f2;
  }
  Mat pool = Mat::Constant(1, total, 1.0 / total);
  diff::Value pooled = diff::matmul(diff::constant(pool), feats);
  return diff::add(diff::matmul(pooled, params.get("pool.w")),
                   params.get("pool.b"));
}

// BFS node set within `hops` of `start`.
std::vector<int> khop_nodes(const std::vector<std::vector<int>>& incoming,
                            int start, int hops) {
  std::vector<int> dist(incoming.size(), -1);
  std::deque<int> queue{start};
  dist[start] = 0;
  while (!queue.empty()) {
    int u = queue.front();
    queue.pop_front();
    if (dist[u] == hops) continue;
    for (int v : incoming[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }
  std::vector<int> nodes;
  for (std::size_t i = 0; i < incoming.size(); ++i)
    if (dist[i] >= 0) nodes.push_back(static_cast<int>(i));
  return nodes;
}

// Sorted multiset of pairwise distances within the k-hop neighborhood.
std::vector<double> khop_signature(const ChainGraph& g, int node, int hops) {
  std::vector<int> nodes = khop_nodes(g.incoming, node, hops);
  std::vector<double> sig;
  for (std::size_t a = 0; a < nodes.size(); ++a)
    for (std::size_t b = a + 1; b < nodes.size(); ++b)
      sig.push_back((g.coords.row(nodes[a]) - g.coords.row(nodes[b])).norm());
  std::sort(sig.begin(), sig.end());
  return sig;
}

bool signatures_equal(const std::vector<double>& a, const std::vector<double>& b,
                      double tol = 1e-9) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

// All adjacency-preserving bijections between two graphs with equal degree
// sequences (the graphs here have at most a dozen nodes).
void enumerate_isomorphisms(const std::vector<std::vector<int>>& adj1,
                            const std::vector<std::vector<int>>& adj2,
                            std::vector<int>& mapping, std::vector<bool>& used,
                            std::size_t at,
                            std::vector<std::vector<int>>& out) {
  const std::size_t n = adj1.size();
  if (at == n) {
    out.push_back(mapping);
    return;
  }
  for (std::size_t cand = 0; cand < n; ++cand) {
    if (used[cand]) continue;
    if (adj1[at].size() != adj2[cand].size()) continue;
    bool ok = true;
    for (int nb : adj1[at]) {
      if (static_cast<std::size_t>(nb) < at) {
        // already-mapped neighbor must map to a neighbor of cand
        int img = mapping[nb];
        if (std::find(adj2[cand].begin(), adj2[cand].end(), img) ==
            adj2[cand].end()) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) continue;
    // non-neighbors must stay non-neighbors
    for (std::size_t prev = 0; prev < at && ok; ++prev) {
      bool adj_1 = std::find(adj1[at].begin(), adj1[at].end(),
                             static_cast<int>(prev)) != adj1[at].end();
      bool adj_2 = std::find(adj2[cand].begin(), adj2[cand].end(),
                             mapping[prev]) != adj2[cand].end();
      if (adj_1 != adj_2) ok = false;
    }
    if (!ok) continue;
    mapping[at] = static_cast<int>(cand);
    used[cand] = true;
    enumerate_isomorphisms(adj1, adj2, mapping, used, at + 1, out);
    used[cand] = false;
  }
}

}  // namespace

void KChainRunConfig::validate() const {
  if (n < 2) throw ConfigError("kchain: n must be >= 2");
  if (reruns < 1) throw ConfigError("kchain: reruns must be >= 1");
  if (steps < 1) throw ConfigError("kchain: steps must be >= 1");
  if (layers.empty() || dims.empty())
    throw ConfigError("kchain: empty layer/dim grid");
}

double run_kchain_once(int n, int n_layers, int dim, bool with_virtual_node,
                       int steps, double lr, Rng& rng) {
  auto [inst_a, inst_b] = io::make_kchain_pair(n, rng);
  ChainGraph ga = union_graph(inst_a, with_virtual_node);
  ChainGraph gb = union_graph(inst_b, with_virtual_node);

  model::ModelConfig cfg;
  cfg.layers = n_layers;
  cfg.feature_dim = dim;
  cfg.message_dim = dim;
  cfg.virtual_nodes = with_virtual_node ? 1 : 0;
  cfg.dropout = 0.0;
  cfg.input_feature_dim = 2;

  cfg.variant = model::Variant::kHomogeneous;
  diff::ParamStore params;
  model::init_params(cfg, params, rng);
  double pb = 1.0 / std::sqrt(static_cast<double>(dim));
  params.create("pool.w", dim, 1, rng, pb);
  params.create("pool.b", 1, 1, rng, pb);
  const model::ModelConfig& block_cfg = cfg;

  diff::AdamWConfig opt;
  opt.lr = lr;
  opt.weight_decay = 0.0;
  Mat label_a = Mat::Constant(1, 1, static_cast<double>(ga.label));
  Mat label_b = Mat::Constant(1, 1, static_cast<double>(gb.label));
  for (int step = 0; step < steps; ++step) {
    diff::Value la = classify_logit(ga, block_cfg, params, rng);
    diff::Value lb = classify_logit(gb, block_cfg, params, rng);
    diff::Value lost =
        diff::scale(diff::add(diff::bce_with_logits(la, label_a),
                              diff::bce_with_logits(lb, label_b)),
                    0.5);
    params.zero_grad();
    diff::backward(lost);
    params.adamw_step(opt);
    if (lost.val()(0, 0) < 1e-6) break;  // both members firmly classified
  }

  int correct = 0;
  double pa = 1.0 / (1.0 + std::exp(-classify_logit(ga, block_cfg, params, rng).val()(0, 0)));
  double pb2 = 1.0 / (1.0 + std::exp(-classify_logit(gb, block_cfg, params, rng).val()(0, 0)));
  if ((pa > 0.5) == (ga.label == 1)) ++correct;
  if ((pb2 > 0.5) == (gb.label == 1)) ++correct;
  return 50.0 * correct;
}

KChainGrid run_kchain(const KChainRunConfig& config) {
  config.validate();
  KChainGrid grid;
  grid.with_virtual_node = config.with_virtual_node;
  grid.n = config.n;
  grid.layers = config.layers;
  grid.dims = config.dims;

  int n_threads = config.threads > 0 ? config.threads : worker_count();
  int cell_id = 0;
  for (int dim : config.dims) {
    for (int n_layers : config.layers) {
      std::vector<double> scores(config.reruns, 0.0);
      auto worker = [&](int tid) {
        for (int r = tid; r < config.reruns; r += n_threads) {
          Rng rr(Rng::mix(Rng::mix(config.seed, 1000003ULL * cell_id), r));
          scores[r] = run_kchain_once(config.n, n_layers, dim,
                                      config.with_virtual_node, config.steps,
                                      config.lr, rr);
        }
      };
      std::vector<std::thread> pool;
      for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker, t);
      worker(0);
      for (auto& th : pool) th.join();

      KChainCell cell;
      cell.layers = n_layers;
      cell.dim = dim;
      double sum = 0.0;
      for (double s : scores) sum += s;
      cell.mean = sum / config.reruns;
      double var = 0.0;
      for (double s : scores) var += (s - cell.mean) * (s - cell.mean);
      cell.stddev = std::sqrt(var / config.reruns);
      grid.cells.push_back(cell);
      ++cell_id;
    }
  }
  return grid;
}

const KChainCell& KChainGrid::at(int dim, int n_layers) const {
  for (const KChainCell& c : cells)
    if (c.dim == dim && c.layers == n_layers) return c;
  throw ContractError("kchain grid: no cell for dim " + std::to_string(dim) +
                      ", layers " + std::to_string(n_layers));
}

std::string KChainGrid::to_csv() const {
  std::ostringstream os;
  os << "variant,dim,layers,mean,std\n";
  for (const KChainCell& c : cells)
    os << (with_virtual_node ? "vn-egnn" : "egnn") << "," << c.dim << ","
       << c.layers << "," << c.mean << "," << c.stddev << "\n";
  return os.str();
}

std::string KChainGrid::to_table() const {
  std::ostringstream os;
  os << (with_virtual_node ? "VN-EGNN" : "EGNN") << " on " << n
     << "-chain pairs\n";
  os << "  Dim.";
  for (int l : layers) os << " | " << l << (l == 1 ? " Layer " : " Layers");
  os << "\n";
  for (int d : dims) {
    os << "  " << d;
    for (int l : layers) {
      const KChainCell& c = at(d, l);
      char buf[40];
      std::snprintf(buf, sizeof(buf), " | %.1f +- %.1f", c.mean, c.stddev);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

int gwl_hop_check(const io::KChainInstance& a, const io::KChainInstance& b,
                  bool with_virtual_node) {
  ChainGraph ga = union_graph(a, with_virtual_node);
  ChainGraph gb = union_graph(b, with_virtual_node);
  const int n = static_cast<int>(ga.coords.rows());

  std::vector<std::vector<int>> isos;
  std::vector<int> mapping(n, -1);
  std::vector<bool> used(n, false);
  enumerate_isomorphisms(ga.incoming, gb.incoming, mapping, used, 0, isos);
  if (isos.empty())
    throw ContractError("gwl_hop_check: members are not isomorphic as graphs");

  for (int hops = 1; hops <= n; ++hops) {
    std::vector<std::vector<double>> sig_a(n), sig_b(n);
    for (int i = 0; i < n; ++i) {
      sig_a[i] = khop_signature(ga, i, hops);
      sig_b[i] = khop_signature(gb, i, hops);
    }
    bool distinct_under_all = true;
    for (const std::vector<int>& iso : isos) {
      bool some_node_differs = false;
      for (int i = 0; i < n; ++i)
        if (!signatures_equal(sig_a[i], sig_b[iso[i]])) {
          some_node_differs = true;
          break;
        }
      if (!some_node_differs) {
        distinct_under_all = false;
        break;
      }
    }
    if (distinct_under_all) return hops;
  }
  throw ContractError("gwl_hop_check: pair is geometrically indistinguishable");
}

}  // namespace vnegnn::kchain
