#include "vnegnn/graphio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "vnegnn/errors.hpp"
#include "vnegnn/geometry.hpp"

namespace vnegnn::io {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Column slice by 1-based PDB positions, tolerant of short lines.
std::string field(const std::string& line, int from, int to) {
  if (static_cast<int>(line.size()) < from) return {};
  return trim(line.substr(from - 1, to - from + 1));
}

bool parse_double(const std::string& s, double* out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    *out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(*out);
  } catch (...) {
    return false;
  }
}

bool is_hydrogen(const std::string& element, const std::string& atom_name) {
  if (element == "H" || element == "D") return true;
  // Fall back to the atom name when the element column is blank.
  if (element.empty() && !atom_name.empty()) {
    char c = atom_name[0];
    if (c >= '0' && c <= '9' && atom_name.size() > 1) c = atom_name[1];
    return c == 'H' || c == 'D';
  }
  return false;
}

const std::array<const char*, 20> kCanonical = {
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL"};

}  // namespace

ParseResult parse_pdb_lite(const std::string& text) {
  ParseResult result;
  // Ligand atoms grouped by (chain, resSeq, resName), in first-seen order.
  std::vector<std::string> ligand_order;
  std::map<std::string, std::vector<Vec3>> ligand_atoms;

  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    bool is_atom = line.rfind("ATOM  ", 0) == 0;
    bool is_het = line.rfind("HETATM", 0) == 0;
    if (!is_atom && !is_het) continue;

    std::string name = field(line, 13, 16);
    std::string res_name = field(line, 18, 20);
    std::string chain = field(line, 22, 22);
    std::string res_seq = field(line, 23, 26);
    std::string element = field(line, 77, 78);
    double x, y, z;
    if (!parse_double(field(line, 31, 38), &x) ||
        !parse_double(field(line, 39, 46), &y) ||
        !parse_double(field(line, 47, 54), &z) || res_name.empty()) {
      ++result.skipped_lines;
      continue;
    }

    if (is_atom) {
      ResidueAtom atom;
      atom.chain_id = chain.empty() ? ' ' : chain[0];
      atom.residue_index = res_seq.empty() ? 0 : std::atoi(res_seq.c_str());
      atom.residue_name = res_name;
      atom.atom_name = name;
      atom.element = element;
      atom.position = Vec3(x, y, z);
      atom.is_alpha_carbon = (name == "CA");
      if (is_hydrogen(element, name)) continue;
      result.atoms.push_back(std::move(atom));
    } else {
      if (res_name == "HOH") continue;
      if (is_hydrogen(element, name)) continue;
      std::string key = chain + ":" + res_seq + ":" + res_name;
      auto it = ligand_atoms.find(key);
      if (it == ligand_atoms.end()) {
        ligand_order.push_back(key);
        it = ligand_atoms.emplace(key, std::vector<Vec3>{}).first;
      }
      it->second.push_back(Vec3(x, y, z));
    }
  }

  if (result.atoms.empty())
    throw EmptyStructureError("parse_pdb_lite: no parsable ATOM record");

  for (const std::string& key : ligand_order) {
    const auto& atoms = ligand_atoms[key];
    LigandRecord lig;
    lig.id = key;
    lig.heavy_atoms.resize(static_cast<Eigen::Index>(atoms.size()), 3);
    for (std::size_t i = 0; i < atoms.size(); ++i)
      lig.heavy_atoms.row(static_cast<Eigen::Index>(i)) = atoms[i].transpose();
    result.ligands.push_back(std::move(lig));
  }
  return result;
}

ProteinGraph build_graph(const Points& ca_positions,
                         const std::vector<std::string>& residue_names,
                         const std::vector<LigandRecord>& ligands,
                         double label_radius) {
  const int n = static_cast<int>(ca_positions.rows());
  if (n == 0) throw EmptyStructureError("build_graph: no nodes");
  if (label_radius <= 0.0)
    throw ArgumentError("build_graph: label radius must be > 0");
  if (static_cast<int>(residue_names.size()) != n)
    throw DimensionError("build_graph: " + std::to_string(n) + " positions vs " +
                         std::to_string(residue_names.size()) + " residue names");

  ProteinGraph g;
  g.coords = ca_positions;
  g.residues = residue_names;
  g.features = encode_features(residue_names);
  g.incoming.resize(n);

  // Incoming edges: the up-to-10 nearest other nodes closer than 10 A,
  // ordered by (distance, index) for determinism.
  std::vector<std::pair<double, int>> cand;
  for (int i = 0; i < n; ++i) {
    cand.clear();
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double d = (ca_positions.row(i) - ca_positions.row(j)).norm();
      if (d < kNeighborCutoff) cand.emplace_back(d, j);
    }
    std::sort(cand.begin(), cand.end());
    int take = std::min<int>(kMaxNeighbors, static_cast<int>(cand.size()));
    g.incoming[i].reserve(take);
    for (int t = 0; t < take; ++t) g.incoming[i].push_back(cand[t].second);
  }

  g.labels.assign(n, 0);
  g.site_centers.resize(static_cast<Eigen::Index>(ligands.size()), 3);
  for (std::size_t m = 0; m < ligands.size(); ++m) {
    const Points& atoms = ligands[m].heavy_atoms;
    if (atoms.rows() == 0)
      throw ArgumentError("build_graph: ligand without heavy atoms: " +
                          ligands[m].id);
    g.site_centers.row(static_cast<Eigen::Index>(m)) = atoms.colwise().mean();
    g.site_atoms.push_back(atoms);
    for (int i = 0; i < n; ++i) {
      double dmin = (atoms.rowwise() - ca_positions.row(i)).rowwise().norm().minCoeff();
      if (dmin <= label_radius) g.labels[i] = 1;
    }
  }
  return g;
}

int residue_feature_index(const std::string& name) {
  for (std::size_t i = 0; i < kCanonical.size(); ++i)
    if (name == kCanonical[i]) return static_cast<int>(i);
  return kUnkIndex;
}

Mat encode_features(const std::vector<std::string>& residue_names) {
  Mat h = Mat::Zero(static_cast<Eigen::Index>(residue_names.size()), kFeatureDim);
  for (std::size_t i = 0; i < residue_names.size(); ++i)
    h(static_cast<Eigen::Index>(i), residue_feature_index(residue_names[i])) = 1.0;
  return h;
}

std::vector<LigandRecord> filter_ligands(std::vector<LigandRecord> ligands,
                                         int min_heavy_atoms) {
  std::erase_if(ligands, [min_heavy_atoms](const LigandRecord& l) {
    return l.heavy_atoms.rows() < min_heavy_atoms;
  });
  return ligands;
}

ProteinGraph make_synthetic(Rng& rng, int n_nodes, int n_pockets,
                            double label_radius) {
  if (n_nodes < 20) throw ArgumentError("make_synthetic: need n_nodes >= 20");
  if (n_pockets < 1 || n_pockets > 4)
    throw ArgumentError("make_synthetic: n_pockets must be in [1, 4]");
  constexpr int kRingSize = 8;
  constexpr double kRingRadius = 3.0;
  constexpr double kBlobRadius = 14.0;
  constexpr double kCenterSeparation = 12.0;
  constexpr double kCavityClearance = 5.0;
  if (n_nodes < kRingSize * n_pockets + 4)
    throw ArgumentError("make_synthetic: too few nodes for pocket count");

  // Pocket centers: rejection-sampled for pairwise separation.
  std::vector<Vec3> centers;
  for (int p = 0; p < n_pockets; ++p) {
    for (int attempt = 0;; ++attempt) {
      Vec3 c(rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0), rng.uniform(-9.0, 9.0));
      bool ok = true;
      for (const Vec3& prev : centers)
        if ((c - prev).norm() < kCenterSeparation) ok = false;
      if (ok || attempt > 5000) {
        centers.push_back(c);
        break;
      }
    }
  }

  Points coords(n_nodes, 3);
  std::vector<std::string> residues(n_nodes);
  int at = 0;
  for (int p = 0; p < n_pockets; ++p) {
    // Evenly spaced ring in a random plane; its mean is exactly the center.
    geom::RigidTransform rot = geom::random_rotation(rng);
    for (int r = 0; r < kRingSize; ++r) {
      double a = 2.0 * std::numbers::pi * r / kRingSize;
      Vec3 local(kRingRadius * std::cos(a), kRingRadius * std::sin(a), 0.0);
      coords.row(at) = (centers[p] + rot.rotation * local).transpose();
      residues[at] = "TRP";
      ++at;
    }
  }
  while (at < n_nodes) {
    Vec3 c(rng.uniform(-kBlobRadius, kBlobRadius),
           rng.uniform(-kBlobRadius, kBlobRadius),
           rng.uniform(-kBlobRadius, kBlobRadius));
    if (c.norm() > kBlobRadius) continue;
    bool near_cavity = false;
    for (const Vec3& ctr : centers)
      if ((c - ctr).norm() < kCavityClearance) near_cavity = true;
    if (near_cavity) continue;
    coords.row(at) = c.transpose();
    // Any canonical residue except the ring class.
    int idx = rng.uniform_int(0, 18);
    if (idx >= 17) ++idx;  // skip TRP
    residues[at] = kCanonical[idx];
    ++at;
  }

  std::vector<LigandRecord> sites;
  for (int p = 0; p < n_pockets; ++p) {
    LigandRecord lig;
    lig.id = "pocket-" + std::to_string(p);
    lig.heavy_atoms = coords.middleRows(p * kRingSize, kRingSize);
    sites.push_back(std::move(lig));
  }

  ProteinGraph g = build_graph(coords, residues, sites, label_radius);
  // Labels for the synthetic task are defined against the planted centers.
  for (int i = 0; i < n_nodes; ++i) {
    g.labels[i] = 0;
    for (const Vec3& ctr : centers)
      if ((coords.row(i).transpose() - ctr).norm() <= label_radius) g.labels[i] = 1;
  }
  return g;
}

std::pair<KChainInstance, KChainInstance> make_kchain_pair(int n, Rng& rng) {
  if (n < 2) throw ArgumentError("make_kchain_pair: n must be >= 2");
  const int total = n + 2;
  KChainInstance a, b;
  a.coords.resize(total, 3);
  // end0, n chain nodes at unit spacing, end1; members differ in end1 only.
  a.coords.row(0) = Vec3(-1.0, 1.0, 0.0).transpose();
  for (int i = 0; i < n; ++i)
    a.coords.row(1 + i) = Vec3(static_cast<double>(i), 0.0, 0.0).transpose();
  a.coords.row(total - 1) = Vec3(static_cast<double>(n), 1.0, 0.0).transpose();
  b = a;
  b.coords.row(total - 1) = Vec3(static_cast<double>(n), -1.0, 0.0).transpose();
  a.label = 0;
  b.label = 1;

  // Shared virtual-node seed on a sphere around the chain midpoint.
  Vec3 midpoint(0.5 * (n - 1), 0.0, 0.0);
  double radius = 0.5 * (n + 1) + 1.0;
  Vec3 dir(rng.gaussian(), rng.gaussian(), rng.gaussian());
  while (dir.norm() < 1e-9) dir = Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
  Vec3 seed = midpoint + radius * dir.normalized();

  // Random joint pose so reruns see different absolute placements.
  geom::RigidTransform pose = geom::random_rotation(rng);
  for (int d = 0; d < 3; ++d) pose.translation[d] = rng.uniform(-5.0, 5.0);
  a.coords = geom::apply_transform(pose, a.coords);
  b.coords = geom::apply_transform(pose, b.coords);
  Vec3 posed_seed = pose.rotation * seed + pose.translation;
  a.virtual_seed = posed_seed;
  b.virtual_seed = posed_seed;
  return {a, b};
}

std::vector<std::vector<int>> kchain_adjacency(int n_total) {
  std::vector<std::vector<int>> incoming(n_total);
  for (int i = 0; i + 1 < n_total; ++i) {
    incoming[i].push_back(i + 1);
    incoming[i + 1].push_back(i);
  }
  return incoming;
}

std::string graph_to_json(const ProteinGraph& g) {
  nlohmann::json j;
  j["id"] = g.id;
  nlohmann::json nodes = nlohmann::json::array();
  for (int i = 0; i < g.num_nodes(); ++i) {
    nodes.push_back({{"index", i},
                     {"pos", {g.coords(i, 0), g.coords(i, 1), g.coords(i, 2)}},
                     {"residue", g.residues[i]},
                     {"label", g.labels[i]}});
  }
  j["nodes"] = std::move(nodes);
  nlohmann::json edges = nlohmann::json::array();
  for (int i = 0; i < g.num_nodes(); ++i)
    for (int src : g.incoming[i]) edges.push_back({src, i});
  j["edges"] = std::move(edges);
  nlohmann::json centers = nlohmann::json::array();
  for (int m = 0; m < g.num_sites(); ++m)
    centers.push_back(
        {g.site_centers(m, 0), g.site_centers(m, 1), g.site_centers(m, 2)});
  j["centers"] = std::move(centers);
  return j.dump();
}

}  // namespace vnegnn::io
