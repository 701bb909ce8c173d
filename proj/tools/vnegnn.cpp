#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "vnegnn/config.hpp"
#include "vnegnn/errors.hpp"
#include "vnegnn/expressivity.hpp"
#include "vnegnn/train.hpp"

namespace fs = std::filesystem;
using namespace vnegnn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitParse = 3;
constexpr int kExitCheckpoint = 4;

struct CliOverrides {
  std::string config_path;
  std::map<std::string, double> numeric;
  std::map<std::string, std::string> text;
  std::map<std::string, int> integer;
};

void add_common_flags(CLI::App* cmd, CliOverrides& ov) {
  cmd->add_option("--config", ov.config_path, "JSON config file");
  auto num = [&](const char* flag, const char* key, const char* help) {
    cmd->add_option_function<double>(
        flag, [&ov, key](double v) { ov.numeric[key] = v; }, help);
  };
  auto integer = [&](const char* flag, const char* key, const char* help) {
    cmd->add_option_function<int>(
        flag, [&ov, key](int v) { ov.integer[key] = v; }, help);
  };
  auto text = [&](const char* flag, const char* key, const char* help) {
    cmd->add_option_function<std::string>(
        flag, [&ov, key](std::string v) { ov.text[key] = std::move(v); }, help);
  };
  num("--lr", "lr", "learning rate");
  integer("--layers", "layers", "message passing layers");
  integer("--virtual-nodes", "virtual_nodes", "number of virtual nodes");
  num("--bandwidth", "bandwidth", "mean-shift bandwidth (A)");
  num("--gamma", "gamma", "confidence target range (A)");
  num("--label-radius", "label_radius", "node labeling radius (A)");
  text("--variant", "variant", "heterogeneous | homogeneous");
  integer("--seed", "seed", "master seed");
  num("--threshold", "threshold", "DCC/DCA success threshold (A)");
  integer("--epochs", "epochs", "training epochs");
  integer("--feature-dim", "feature_dim", "node feature width");
  integer("--message-dim", "message_dim", "message width");
  text("--checkpoint", "checkpoint", "checkpoint path");
  text("--out-dir", "out_dir", "output directory");
  text("--dataset", "dataset", "dataset path (PDB directory)");
}

RunConfig resolve_config(const CliOverrides& ov) {
  RunConfig cfg;
  if (!ov.config_path.empty()) cfg = RunConfig::from_file(ov.config_path);
  for (const auto& [key, v] : ov.integer) {
    if (key == "layers") cfg.model.layers = v;
    else if (key == "virtual_nodes") cfg.model.virtual_nodes = v;
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(v);
    else if (key == "epochs") cfg.train.epochs = v;
    else if (key == "feature_dim") cfg.model.feature_dim = v;
    else if (key == "message_dim") cfg.model.message_dim = v;
  }
  for (const auto& [key, v] : ov.numeric) {
    if (key == "lr") cfg.optimizer.lr = v;
    else if (key == "bandwidth") cfg.inference.bandwidth = v;
    else if (key == "gamma") cfg.loss.gamma = v;
    else if (key == "label_radius") cfg.data.label_radius = v;
    else if (key == "threshold") cfg.inference.threshold = v;
  }
  for (const auto& [key, v] : ov.text) {
    if (key == "variant") cfg.model.variant = variant_from_name(v);
    else if (key == "checkpoint") cfg.paths.checkpoint = v;
    else if (key == "out_dir") cfg.paths.out_dir = v;
    else if (key == "dataset") {
      cfg.data.kind = "pdb_dir";
      cfg.data.path = v;
    }
  }
  cfg.kchain.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << content;
}

// Architecture fields must agree between an explicit request and the stored
// checkpoint.
void check_model_match(const model::ModelConfig& want,
                       const model::ModelConfig& have) {
  if (want.layers != have.layers || want.feature_dim != have.feature_dim ||
      want.message_dim != have.message_dim ||
      want.virtual_nodes != have.virtual_nodes ||
      want.variant != have.variant ||
      want.input_feature_dim != have.input_feature_dim)
    throw CheckpointError(
        "checkpoint model does not match the requested configuration (" +
        model_meta_json(want) + " vs " + model_meta_json(have) + ")");
}

diff::ParamStore load_checkpoint(RunConfig& cfg, const CliOverrides& ov) {
  std::string meta;
  diff::ParamStore params = diff::ParamStore::load(cfg.paths.checkpoint, &meta);
  if (meta.empty()) throw CheckpointError("checkpoint has no model metadata");
  model::ModelConfig stored = model_meta_from_json(meta);
  bool explicit_arch = ov.integer.count("layers") || ov.integer.count("virtual_nodes") ||
                       ov.integer.count("feature_dim") ||
                       ov.integer.count("message_dim") || ov.text.count("variant");
  if (!explicit_arch && !ov.config_path.empty()) {
    std::ifstream is(ov.config_path);
    std::string text((std::istreambuf_iterator<char>(is)),
                     std::istreambuf_iterator<char>());
    auto j = nlohmann::json::parse(text, nullptr, false);
    if (!j.is_discarded() && j.contains("model")) explicit_arch = true;
  }
  if (explicit_arch) check_model_match(cfg.model, stored);
  cfg.model = stored;
  return params;
}

int cmd_train(const CliOverrides& ov) {
  RunConfig cfg = resolve_config(ov);
  Dataset data;
  try {
    data = load_dataset(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  std::cerr << "training on " << data.train.size() << " graphs, validating on "
            << data.val.size() << "\n";
  TrainResult result = train_model(cfg, data, &std::cerr);

  fs::path out_dir(cfg.paths.out_dir);
  fs::create_directories(out_dir);
  result.best_params.save((out_dir / cfg.paths.checkpoint).string(),
                          model_meta_json(cfg.model));
  write_file(out_dir / "loss.csv", loss_curve_csv(result.train_curve));
  write_file(out_dir / "val_loss.csv", loss_curve_csv(result.val_curve));
  std::cerr << "best epoch " << result.best_epoch << ", checkpoint written to "
            << (out_dir / cfg.paths.checkpoint) << "\n";
  return kExitOk;
}

int cmd_predict(const CliOverrides& ov, const std::string& pdb_path) {
  RunConfig cfg = resolve_config(ov);
  diff::ParamStore params = load_checkpoint(cfg, ov);

  std::ifstream is(pdb_path);
  if (!is) {
    std::cerr << "error: cannot open " << pdb_path << "\n";
    return kExitParse;
  }
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  io::ParseResult parsed;
  try {
    parsed = io::parse_pdb_lite(text);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  }
  auto ligands = io::filter_ligands(parsed.ligands, cfg.data.min_ligand_atoms);

  std::map<char, std::vector<const io::ResidueAtom*>> chains;
  for (const io::ResidueAtom& atom : parsed.atoms)
    if (atom.is_alpha_carbon) chains[atom.chain_id].push_back(&atom);

  nlohmann::json out;
  out["id"] = fs::path(pdb_path).stem().string();
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& [chain_id, atoms] : chains) {
    if (atoms.empty()) continue;
    Points coords(static_cast<Eigen::Index>(atoms.size()), 3);
    std::vector<std::string> names(atoms.size());
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      coords.row(static_cast<Eigen::Index>(i)) = atoms[i]->position.transpose();
      names[i] = atoms[i]->residue_name;
    }
    io::ProteinGraph g =
        io::build_graph(coords, names, ligands, cfg.data.label_radius);
    g.id = out["id"].get<std::string>() + ":" + chain_id;
    auto clusters = predict_graph(g, cfg, params, cfg.seed);
    for (const auto& c : clusters)
      preds.push_back({{"chain", std::string(1, chain_id)},
                       {"center", {c.center.x(), c.center.y(), c.center.z()}},
                       {"confidence", c.confidence},
                       {"members", c.member_count}});
  }
  out["predictions"] = std::move(preds);
  std::cout << out.dump() << "\n";
  return kExitOk;
}

int cmd_evaluate(const CliOverrides& ov) {
  RunConfig cfg = resolve_config(ov);
  diff::ParamStore params = load_checkpoint(cfg, ov);

  std::vector<io::ProteinGraph> graphs;
  try {
    if (cfg.data.kind == "synthetic") {
      graphs = make_synthetic_eval_set(cfg);
    } else {
      Dataset all;
      RunConfig no_split = cfg;
      no_split.train.val_fraction = 0.0;
      all = load_dataset(no_split);
      graphs = std::move(all.train);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }

  EvalSummary summary = evaluate_graphs(graphs, cfg, params, cfg.seed);
  fs::path out_dir(cfg.paths.out_dir);
  fs::create_directories(out_dir);
  std::string jsonl;
  for (const std::string& line : summary.jsonl) jsonl += line + "\n";
  write_file(out_dir / "evaluation.jsonl", jsonl);
  std::ostringstream csv;
  csv << "threshold,dcc_rate,dca_rate\n";
  for (const auto& [thr, rates] : summary.sweep)
    csv << thr << "," << rates.first << "," << rates.second << "\n";
  write_file(out_dir / "metrics.csv", csv.str());

  std::cout << "proteins " << summary.proteins << " (skipped without sites: "
            << summary.skipped_no_sites << ")\n"
            << "sites " << summary.total_sites << "\n"
            << "dcc_rate " << summary.dcc_rate << " at "
            << cfg.inference.threshold << " A\n"
            << "dca_rate " << summary.dca_rate << " at "
            << cfg.inference.threshold << " A\n";
  return kExitOk;
}

int cmd_kchain(const CliOverrides& ov) {
  RunConfig cfg = resolve_config(ov);
  fs::path out_dir(cfg.paths.out_dir);
  fs::create_directories(out_dir);
  std::string csv;
  for (bool with_vn : {false, true}) {
    kchain::KChainRunConfig kc = cfg.kchain;
    kc.with_virtual_node = with_vn;
    kchain::KChainGrid grid = kchain::run_kchain(kc);
    std::cout << grid.to_table() << "\n";
    std::string part = grid.to_csv();
    if (!csv.empty()) part = part.substr(part.find('\n') + 1);  // drop header
    csv += part;
  }
  write_file(out_dir / "kchain.csv", csv);
  return kExitOk;
}

int cmd_dump(const CliOverrides& ov, const std::string& pdb_path) {
  RunConfig cfg = resolve_config(ov);
  std::ifstream is(pdb_path);
  if (!is) {
    std::cerr << "error: cannot open " << pdb_path << "\n";
    return kExitParse;
  }
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  io::ParseResult parsed = io::parse_pdb_lite(text);
  auto ligands = io::filter_ligands(parsed.ligands, cfg.data.min_ligand_atoms);
  std::vector<const io::ResidueAtom*> cas;
  for (const io::ResidueAtom& atom : parsed.atoms)
    if (atom.is_alpha_carbon) cas.push_back(&atom);
  if (cas.empty()) throw EmptyStructureError("no alpha carbons in " + pdb_path);
  Points coords(static_cast<Eigen::Index>(cas.size()), 3);
  std::vector<std::string> names(cas.size());
  for (std::size_t i = 0; i < cas.size(); ++i) {
    coords.row(static_cast<Eigen::Index>(i)) = cas[i]->position.transpose();
    names[i] = cas[i]->residue_name;
  }
  io::ProteinGraph g = io::build_graph(coords, names, ligands, cfg.data.label_radius);
  g.id = fs::path(pdb_path).stem().string();
  std::cout << io::graph_to_json(g) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Virtual-node equivariant GNN for binding-site center prediction"};
  app.require_subcommand(1);

  CliOverrides ov_train, ov_predict, ov_eval, ov_kchain, ov_dump;
  std::string predict_pdb, dump_pdb;

  CLI::App* train = app.add_subcommand("train", "Train a model");
  add_common_flags(train, ov_train);
  CLI::App* predict = app.add_subcommand("predict", "Predict binding sites for a PDB file");
  add_common_flags(predict, ov_predict);
  predict->add_option("pdb", predict_pdb, "input PDB file")->required();
  CLI::App* evaluate = app.add_subcommand("evaluate", "DCC/DCA evaluation on a dataset");
  add_common_flags(evaluate, ov_eval);
  CLI::App* kchain_cmd = app.add_subcommand("kchain", "Chain-pair separability grid");
  add_common_flags(kchain_cmd, ov_kchain);
  CLI::App* dump = app.add_subcommand("dump", "Dump the graph built from a PDB file as JSON");
  add_common_flags(dump, ov_dump);
  dump->add_option("pdb", dump_pdb, "input PDB file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(ov_train);
    if (predict->parsed()) return cmd_predict(ov_predict, predict_pdb);
    if (evaluate->parsed()) return cmd_evaluate(ov_eval);
    if (kchain_cmd->parsed()) return cmd_kchain(ov_kchain);
    if (dump->parsed()) return cmd_dump(ov_dump, dump_pdb);
  } catch (const CheckpointError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const EmptyStructureError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
