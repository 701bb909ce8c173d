#include "vnegnn/train.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "vnegnn/errors.hpp"
#include "vnegnn/threading.hpp"

namespace vnegnn {

namespace fs = std::filesystem;

double PlateauSchedule::observe(int epoch, double metric) {
  if (metric < best_) {
    best_ = metric;
    stall_ = 0;
  } else {
    ++stall_;
  }
  if (epoch >= active_after_ && stall_ >= patience_) {
    lr_ *= factor_;
    stall_ = 0;
  }
  return lr_;
}

namespace {

constexpr std::uint64_t kRotationStream = 0x526f7461;  // grid rotation draws
constexpr std::uint64_t kDropoutStream = 0x44726f70;   // dropout masks

bool is_validation_id(const std::string& id, double val_fraction) {
  if (val_fraction <= 0.0) return false;
  int buckets = static_cast<int>(1.0 / val_fraction + 0.5);
  return Rng::hash_id(id) % static_cast<std::uint64_t>(buckets) == 0;
}

std::vector<io::ProteinGraph> load_pdb_dir(const RunConfig& cfg) {
  std::vector<io::ProteinGraph> graphs;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(cfg.data.path)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    if (ext == ".pdb" || ext == ".ent") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& file : files) {
    std::ifstream is(file);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    io::ParseResult parsed;
    try {
      parsed = io::parse_pdb_lite(text);
    } catch (const EmptyStructureError&) {
      continue;
    }
    auto ligands = io::filter_ligands(parsed.ligands, cfg.data.min_ligand_atoms);

    std::map<char, std::vector<const io::ResidueAtom*>> chains;
    for (const io::ResidueAtom& atom : parsed.atoms)
      if (atom.is_alpha_carbon) chains[atom.chain_id].push_back(&atom);
    for (const auto& [chain_id, atoms] : chains) {
      if (atoms.size() < 5) continue;
      Points coords(static_cast<Eigen::Index>(atoms.size()), 3);
      std::vector<std::string> names(atoms.size());
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        coords.row(static_cast<Eigen::Index>(i)) = atoms[i]->position.transpose();
        names[i] = atoms[i]->residue_name;
      }
      // A ligand belongs to this chain when it labels at least one CA.
      std::vector<io::LigandRecord> chain_ligands;
      for (const io::LigandRecord& lig : ligands) {
        double dmin = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < coords.rows(); ++i)
          dmin = std::min(dmin, (lig.heavy_atoms.rowwise() - coords.row(i))
                                    .rowwise()
                                    .norm()
                                    .minCoeff());
        if (dmin <= cfg.data.label_radius) chain_ligands.push_back(lig);
      }
      io::ProteinGraph g = io::build_graph(coords, names, chain_ligands,
                                           cfg.data.label_radius);
      g.id = file.stem().string() + ":" + chain_id;
      graphs.push_back(std::move(g));
    }
  }
  if (graphs.empty())
    throw EmptyStructureError("no usable structures in " + cfg.data.path);
  return graphs;
}

}  // namespace

Dataset load_dataset(const RunConfig& cfg) {
  std::vector<io::ProteinGraph> pool;
  if (cfg.data.kind == "synthetic") {
    Rng base(cfg.seed);
    for (int i = 0; i < cfg.data.count; ++i) {
      Rng g = base.split(Rng::mix(0x53796e74, static_cast<std::uint64_t>(i)));
      io::ProteinGraph graph = io::make_synthetic(g, cfg.data.nodes,
                                                  cfg.data.pockets,
                                                  cfg.data.label_radius);
      graph.id = "synth-" + std::to_string(i);
      pool.push_back(std::move(graph));
    }
  } else {
    pool = load_pdb_dir(cfg);
  }
  Dataset out;
  for (auto& g : pool) {
    if (is_validation_id(g.id, cfg.train.val_fraction))
      out.val.push_back(std::move(g));
    else
      out.train.push_back(std::move(g));
  }
  if (out.train.empty()) throw EmptyStructureError("empty training split");
  if (out.val.empty() && cfg.train.val_fraction > 0.0) {
    // Tiny datasets may hash everything into one split; keep one for val.
    out.val.push_back(out.train.back());
    out.train.pop_back();
  }
  return out;
}

std::vector<io::ProteinGraph> make_synthetic_eval_set(const RunConfig& cfg) {
  std::vector<io::ProteinGraph> out;
  Rng base(cfg.seed);
  for (int i = 0; i < cfg.data.eval_count; ++i) {
    Rng g = base.split(Rng::mix(0x4576616c, static_cast<std::uint64_t>(i)));
    io::ProteinGraph graph =
        io::make_synthetic(g, cfg.data.nodes, cfg.data.pockets, cfg.data.label_radius);
    graph.id = "eval-" + std::to_string(i);
    out.push_back(std::move(graph));
  }
  return out;
}

std::pair<diff::Value, loss::LossReport> graph_loss(
    const io::ProteinGraph& graph, const RunConfig& cfg,
    const diff::ParamStore& params, Rng& rng, bool training) {
  model::ForwardResult fwd =
      model::forward(graph, cfg.model, params, rng, training);
  loss::TotalLossInputs in;
  in.labels = &graph.labels;
  in.node_probs = fwd.node_probs;
  in.site_centers_norm = graph.site_centers / cfg.model.coord_scale;
  in.centers_norm = fwd.centers_norm;
  in.site_centers = graph.site_centers;
  in.centers_detached = fwd.centers.val();
  in.confidences = fwd.confidences;
  return loss::total_loss(in, cfg.loss.mode(), cfg.loss.huber_delta,
                          cfg.loss.gamma, cfg.loss.confidence_weight);
}

namespace {

EpochLoss mean_losses(const std::vector<loss::LossReport>& reports) {
  EpochLoss out;
  if (reports.empty()) return out;
  for (const auto& r : reports) {
    out.dice += r.dice;
    out.bsc += r.bsc;
    out.confidence += r.confidence;
    out.total += r.total;
  }
  double inv = 1.0 / static_cast<double>(reports.size());
  out.dice *= inv;
  out.bsc *= inv;
  out.confidence *= inv;
  out.total *= inv;
  return out;
}

double eval_dcc_rate(const std::vector<io::ProteinGraph>& graphs,
                     const RunConfig& cfg, const diff::ParamStore& params,
                     std::uint64_t rotation_seed);

}  // namespace

TrainResult train_model(const RunConfig& cfg, const Dataset& data,
                        std::ostream* log) {
  cfg.validate();
  Rng init_rng(Rng::mix(cfg.seed, 0x496e6974));
  diff::ParamStore params;
  model::init_params(cfg.model, params, init_rng);

  PlateauSchedule schedule(cfg.optimizer.lr, cfg.train.lr_decay_factor,
                           cfg.train.lr_patience, cfg.train.lr_decay_after);
  TrainResult result;
  result.best_params = params.fork();

  const int n_train = static_cast<int>(data.train.size());
  const int n_workers = std::min(worker_count(), cfg.train.batch_size);

  for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
    // Seeded shuffle; sample order is a function of (seed, epoch) only.
    std::vector<int> order(n_train);
    for (int i = 0; i < n_train; ++i) order[i] = i;
    Rng shuffle_rng(Rng::mix(cfg.seed, Rng::mix(0x53687566, epoch)));
    for (int i = n_train - 1; i > 0; --i)
      std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

    std::vector<loss::LossReport> epoch_reports;
    for (int start = 0; start < n_train; start += cfg.train.batch_size) {
      int count = std::min(cfg.train.batch_size, n_train - start);
      // Per-sample forks keep gradient reduction order independent of the
      // worker count, so results are bit-identical for any thread setting.
      std::vector<diff::ParamStore> forks;
      forks.reserve(count);
      for (int b = 0; b < count; ++b) forks.push_back(params.fork());
      std::vector<loss::LossReport> reports(count);

      auto run_sample = [&](int b) {
        const io::ProteinGraph& g = data.train[order[start + b]];
        std::uint64_t sample_stream =
            Rng::mix(Rng::hash_id(g.id), static_cast<std::uint64_t>(epoch));
        Rng rng(Rng::mix(cfg.seed, sample_stream));
        auto [total, report] = graph_loss(g, cfg, forks[b], rng, true);
        diff::backward(total);
        reports[b] = report;
      };
      if (n_workers <= 1 || count == 1) {
        for (int b = 0; b < count; ++b) run_sample(b);
      } else {
        std::vector<std::thread> pool;
        for (int t = 1; t < n_workers; ++t)
          pool.emplace_back([&, t] {
            for (int b = t; b < count; b += n_workers) run_sample(b);
          });
        for (int b = 0; b < count; b += n_workers) run_sample(b);
        for (auto& th : pool) th.join();
      }

      params.zero_grad();
      for (int b = 0; b < count; ++b) params.accumulate_grads_from(forks[b]);
      params.scale_grads(1.0 / static_cast<double>(count));
      diff::AdamWConfig opt;
      opt.lr = schedule.lr();
      opt.weight_decay = cfg.optimizer.weight_decay;
      opt.beta1 = cfg.optimizer.beta1;
      opt.beta2 = cfg.optimizer.beta2;
      opt.eps = cfg.optimizer.eps;
      params.adamw_step(opt);
      for (int b = 0; b < count; ++b)
        epoch_reports.push_back(std::move(reports[b]));
    }
    result.train_curve.push_back(mean_losses(epoch_reports));

    // Validation pass (no dropout), grid rotation derived per (epoch, id).
    std::vector<loss::LossReport> val_reports;
    for (const io::ProteinGraph& g : data.val) {
      std::uint64_t sample_stream =
          Rng::mix(Rng::hash_id(g.id), static_cast<std::uint64_t>(epoch));
      Rng rng(Rng::mix(cfg.seed, sample_stream));
      auto [total, report] = graph_loss(g, cfg, params, rng, false);
      val_reports.push_back(report);
    }
    EpochLoss val = mean_losses(val_reports);
    result.val_curve.push_back(val);

    double metric = val.total;
    if (cfg.train.select_metric == "dcc")
      metric = -eval_dcc_rate(data.val, cfg, params,
                              Rng::mix(cfg.seed, 0x44434356));
    if (metric < result.best_val_metric) {
      result.best_val_metric = metric;
      result.best_epoch = epoch;
      result.best_params = params.fork();
    }
    result.best_val_record.push_back(result.best_val_metric);
    result.final_lr = schedule.observe(epoch, metric);

    if (log) {
      (*log) << "epoch " << epoch << " train " << result.train_curve.back().total
             << " val " << val.total << " lr " << result.final_lr << "\n";
    }
  }
  return result;
}

std::vector<infer::ClusteredPrediction> predict_graph(
    const io::ProteinGraph& graph, const RunConfig& cfg,
    const diff::ParamStore& params, std::uint64_t rotation_seed) {
  Rng rng(Rng::mix(rotation_seed, Rng::hash_id(graph.id)));
  model::ForwardResult fwd =
      model::forward(graph, cfg.model, params, rng, false);
  return infer::cluster_predictions(fwd.predictions(), cfg.inference.bandwidth);
}

namespace {

double eval_dcc_rate(const std::vector<io::ProteinGraph>& graphs,
                     const RunConfig& cfg, const diff::ParamStore& params,
                     std::uint64_t rotation_seed) {
  int successes = 0, sites = 0;
  for (const io::ProteinGraph& g : graphs) {
    if (g.num_sites() == 0) continue;
    auto clusters = predict_graph(g, cfg, params, rotation_seed);
    auto selected = infer::select_top_m(clusters, g.num_sites());
    auto result = infer::dcc_dca(selected, g.site_centers, g.site_atoms,
                                 cfg.inference.threshold);
    successes += result.dcc_successes;
    sites += g.num_sites();
  }
  return sites == 0 ? 0.0 : static_cast<double>(successes) / sites;
}

}  // namespace

EvalSummary evaluate_graphs(const std::vector<io::ProteinGraph>& graphs,
                            const RunConfig& cfg, const diff::ParamStore& params,
                            std::uint64_t rotation_seed) {
  EvalSummary summary;
  std::vector<double> thresholds;
  for (int t = 1; t <= 10; ++t) thresholds.push_back(static_cast<double>(t));
  std::vector<int> sweep_dcc(thresholds.size(), 0), sweep_dca(thresholds.size(), 0);
  int dcc = 0, dca = 0;

  for (const io::ProteinGraph& g : graphs) {
    if (g.num_sites() == 0) {
      ++summary.skipped_no_sites;
      continue;
    }
    ++summary.proteins;
    summary.total_sites += g.num_sites();
    auto clusters = predict_graph(g, cfg, params, rotation_seed);
    auto selected = infer::select_top_m(clusters, g.num_sites());
    auto result = infer::dcc_dca(selected, g.site_centers, g.site_atoms,
                                 cfg.inference.threshold);
    dcc += result.dcc_successes;
    dca += result.dca_successes;
    for (std::size_t t = 0; t < thresholds.size(); ++t) {
      for (const infer::SiteMatch& match : result.matches) {
        if (match.prediction < 0) continue;
        if (match.center_distance <= thresholds[t]) ++sweep_dcc[t];
        if (match.ligand_distance <= thresholds[t]) ++sweep_dca[t];
      }
    }

    nlohmann::json j;
    j["id"] = g.id;
    j["m"] = g.num_sites();
    nlohmann::json sel = nlohmann::json::array();
    for (const auto& c : selected)
      sel.push_back({{"center", {c.center.x(), c.center.y(), c.center.z()}},
                     {"confidence", c.confidence},
                     {"members", c.member_count}});
    j["selected"] = std::move(sel);
    nlohmann::json matches = nlohmann::json::array();
    for (const infer::SiteMatch& match : result.matches) {
      nlohmann::json jm;
      jm["site"] = match.site;
      jm["prediction"] = match.prediction;
      if (match.prediction >= 0) {
        jm["dcc_distance"] = match.center_distance;
        jm["dca_distance"] = match.ligand_distance;
      }
      jm["dcc"] = match.dcc_success;
      jm["dca"] = match.dca_success;
      matches.push_back(std::move(jm));
    }
    j["matches"] = std::move(matches);
    summary.jsonl.push_back(j.dump());
  }

  if (summary.total_sites > 0) {
    summary.dcc_rate = static_cast<double>(dcc) / summary.total_sites;
    summary.dca_rate = static_cast<double>(dca) / summary.total_sites;
    for (std::size_t t = 0; t < thresholds.size(); ++t)
      summary.sweep.push_back(
          {thresholds[t],
           {static_cast<double>(sweep_dcc[t]) / summary.total_sites,
            static_cast<double>(sweep_dca[t]) / summary.total_sites}});
  }
  return summary;
}

std::string loss_curve_csv(const std::vector<EpochLoss>& curve) {
  std::ostringstream os;
  os << "epoch,dice,bsc,confidence,total\n";
  for (std::size_t e = 0; e < curve.size(); ++e)
    os << e << "," << curve[e].dice << "," << curve[e].bsc << ","
       << curve[e].confidence << "," << curve[e].total << "\n";
  return os.str();
}

}  // namespace vnegnn
