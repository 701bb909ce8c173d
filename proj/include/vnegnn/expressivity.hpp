#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vnegnn/graphio.hpp"
#include "vnegnn/rng.hpp"

namespace vnegnn::kchain {

struct KChainRunConfig {
  int n = 4;
  std::vector<int> layers = {1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<int> dims = {8, 16, 32, 64, 128};
  int reruns = 100;
  int steps = 200;  // AdamW steps per rerun, full batch on the 2-graph set
  double lr = 1e-2;
  bool with_virtual_node = false;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct KChainCell {
  int layers = 0;
  int dim = 0;
  double mean = 0.0;  // of per-rerun scores in {0, 50, 100}
  double stddev = 0.0;
};

struct KChainGrid {
  bool with_virtual_node = false;
  int n = 0;
  std::vector<int> layers;
  std::vector<int> dims;
  std::vector<KChainCell> cells;  // dims-major, layers within

  const KChainCell& at(int dim, int n_layers) const;
  std::string to_csv() const;
  // Text table: one row per dim, one column per layer count.
  std::string to_table() const;
};

// Trains a fresh classifier per rerun (graph-level sigmoid readout on
// mean-pooled final features) to separate the two members of a fresh chain
// pair; a rerun scores 100 when both members are classified correctly at the
// final step, 50 when one is.
KChainGrid run_kchain(const KChainRunConfig& config);

// Single rerun; exposed for tests.
double run_kchain_once(int n, int n_layers, int dim, bool with_virtual_node,
                       int steps, double lr, Rng& rng);

// Smallest k at which the pair's k-hop neighborhood signatures (sorted
// multisets of pairwise distances within each k-hop subgraph) differ under
// every adjacency-preserving bijection. With the shared-position virtual node
// attached to all nodes this is 1.
int gwl_hop_check(const io::KChainInstance& a, const io::KChainInstance& b,
                  bool with_virtual_node);

}  // namespace vnegnn::kchain
