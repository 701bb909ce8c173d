#pragma once

#include <string>
#include <vector>

#include "vnegnn/rng.hpp"
#include "vnegnn/types.hpp"

namespace vnegnn::io {

struct ResidueAtom {
  char chain_id = ' ';
  int residue_index = 0;
  std::string residue_name;  // 3-letter code as read from the file
  std::string atom_name;
  std::string element;
  Vec3 position = Vec3::Zero();
  bool is_alpha_carbon = false;
};

struct LigandRecord {
  std::string id;  // "<chain>:<resSeq>:<resName>"
  Points heavy_atoms;
};

struct ParseResult {
  std::vector<ResidueAtom> atoms;
  std::vector<LigandRecord> ligands;
  int skipped_lines = 0;
};

// Fixed-column ATOM/HETATM reader. ATOM records with atom name "CA" are
// flagged as alpha carbons; HETATM groups (excluding water HOH) become
// ligands keyed by (chain, resSeq, resName); hydrogens are dropped.
// Malformed lines are skipped and counted. Throws EmptyStructureError when
// no ATOM record parses.
ParseResult parse_pdb_lite(const std::string& text);

// Alpha-carbon neighborhood graph with node labels and site centers.
struct ProteinGraph {
  std::string id;
  Points coords;                        // N x 3
  std::vector<std::string> residues;    // N names
  Mat features;                         // N x D0, filled by encode_features
  std::vector<std::vector<int>> incoming;  // up to 10 nearest within 10 A
  std::vector<int> labels;              // N, 0/1
  Points site_centers;                  // M x 3
  std::vector<Points> site_atoms;       // M ligand heavy-atom sets

  int num_nodes() const { return static_cast<int>(coords.rows()); }
  int num_sites() const { return static_cast<int>(site_centers.rows()); }
};

inline constexpr double kNeighborCutoff = 10.0;  // Angstrom
inline constexpr int kMaxNeighbors = 10;

ProteinGraph build_graph(const Points& ca_positions,
                         const std::vector<std::string>& residue_names,
                         const std::vector<LigandRecord>& ligands,
                         double label_radius);

// One-hot over the 20 canonical residues (alphabetical) + UNK + a reserved
// virtual-node category. Each row sums to 1; the virtual slot stays zero for
// physical nodes.
inline constexpr int kFeatureDim = 22;
inline constexpr int kUnkIndex = 20;
inline constexpr int kVirtualIndex = 21;
int residue_feature_index(const std::string& name);
Mat encode_features(const std::vector<std::string>& residue_names);

// Drops ligands with fewer heavy atoms than `min_heavy_atoms`.
std::vector<LigandRecord> filter_ligands(std::vector<LigandRecord> ligands,
                                         int min_heavy_atoms);

// Random node blob with `n_pockets` cavity motifs: a ring of 8 distinguished
// nodes around each planted center. Centers are recorded as sites (ring nodes
// double as the site atoms); labels mark nodes within the label radius of a
// planted center.
ProteinGraph make_synthetic(Rng& rng, int n_nodes, int n_pockets,
                            double label_radius = 4.0);

// Geometric chain pair for the expressivity benchmark: n collinear,
// unit-spaced interior nodes plus two end points; the members differ only in
// the orientation of one end point.
struct KChainInstance {
  Points coords;  // (n+2) x 3, order: end0, chain..., end1
  int label = 0;
  Vec3 virtual_seed = Vec3::Zero();
};

std::pair<KChainInstance, KChainInstance> make_kchain_pair(int n, Rng& rng);

// Path-graph incoming lists for a chain instance.
std::vector<std::vector<int>> kchain_adjacency(int n_total);

// Debug dump (nodes, edges, labels, centers); schema described in README.
std::string graph_to_json(const ProteinGraph& g);

}  // namespace vnegnn::io
