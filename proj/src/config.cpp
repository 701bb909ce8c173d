#include "vnegnn/config.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "vnegnn/errors.hpp"

namespace vnegnn {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

}  // namespace

loss::BscMode LossConfig::mode() const {
  if (bsc_mode == "huber") return loss::BscMode::kHuber;
  if (bsc_mode == "squared") return loss::BscMode::kSquared;
  throw ConfigError("config: bsc_mode must be 'huber' or 'squared'");
}

std::string variant_name(model::Variant v) {
  return v == model::Variant::kHeterogeneous ? "heterogeneous" : "homogeneous";
}

model::Variant variant_from_name(const std::string& name) {
  if (name == "heterogeneous") return model::Variant::kHeterogeneous;
  if (name == "homogeneous") return model::Variant::kHomogeneous;
  throw ConfigError("config: variant must be 'heterogeneous' or 'homogeneous'");
}

void RunConfig::validate() const {
  model.validate();
  if (features != "onehot")
    throw ConfigError("config: features must be 'onehot'");
  if (optimizer.lr <= 0.0) throw ConfigError("config: lr must be > 0");
  if (train.epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (train.batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (train.val_fraction < 0.0 || train.val_fraction >= 1.0)
    throw ConfigError("config: val_fraction must be in [0, 1)");
  if (train.select_metric != "loss" && train.select_metric != "dcc")
    throw ConfigError("config: select_metric must be 'loss' or 'dcc'");
  if (data.kind != "synthetic" && data.kind != "pdb_dir")
    throw ConfigError("config: data.kind must be 'synthetic' or 'pdb_dir'");
  if (data.label_radius <= 0.0)
    throw ConfigError("config: label_radius must be > 0");
  if (inference.bandwidth <= 0.0)
    throw ConfigError("config: bandwidth must be > 0");
  if (inference.threshold <= 0.0)
    throw ConfigError("config: threshold must be > 0");
  loss.mode();
  kchain.validate();
}

std::string RunConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["features"] = features;
  j["model"] = {{"layers", model.layers},
                {"feature_dim", model.feature_dim},
                {"message_dim", model.message_dim},
                {"virtual_nodes", model.virtual_nodes},
                {"coord_scale", model.coord_scale},
                {"dropout", model.dropout},
                {"variant", variant_name(model.variant)}};
  j["optimizer"] = {{"lr", optimizer.lr},
                    {"weight_decay", optimizer.weight_decay},
                    {"beta1", optimizer.beta1},
                    {"beta2", optimizer.beta2},
                    {"eps", optimizer.eps}};
  j["train"] = {{"epochs", train.epochs},
                {"batch_size", train.batch_size},
                {"lr_decay_factor", train.lr_decay_factor},
                {"lr_patience", train.lr_patience},
                {"lr_decay_after", train.lr_decay_after},
                {"val_fraction", train.val_fraction},
                {"select_metric", train.select_metric}};
  j["loss"] = {{"gamma", loss.gamma},
               {"confidence_weight", loss.confidence_weight},
               {"bsc_mode", loss.bsc_mode},
               {"huber_delta", loss.huber_delta}};
  j["data"] = {{"kind", data.kind},
               {"path", data.path},
               {"count", data.count},
               {"nodes", data.nodes},
               {"pockets", data.pockets},
               {"eval_count", data.eval_count},
               {"label_radius", data.label_radius},
               {"min_ligand_atoms", data.min_ligand_atoms}};
  j["inference"] = {{"bandwidth", inference.bandwidth},
                    {"threshold", inference.threshold}};
  j["kchain"] = {{"n", kchain.n},
                 {"layers", kchain.layers},
                 {"dims", kchain.dims},
                 {"reruns", kchain.reruns},
                 {"steps", kchain.steps},
                 {"lr", kchain.lr},
                 {"with_virtual_node", kchain.with_virtual_node},
                 {"threads", kchain.threads}};
  j["paths"] = {{"checkpoint", paths.checkpoint}, {"out_dir", paths.out_dir}};
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  RunConfig c;
  check_keys(j, "config",
             {"seed", "features", "model", "optimizer", "train", "loss", "data",
              "inference", "kchain", "paths"});
  read(j, "seed", &c.seed);
  read(j, "features", &c.features);
  if (j.contains("model")) {
    const json& m = j["model"];
    check_keys(m, "model",
               {"layers", "feature_dim", "message_dim", "virtual_nodes",
                "coord_scale", "dropout", "variant"});
    read(m, "layers", &c.model.layers);
    read(m, "feature_dim", &c.model.feature_dim);
    read(m, "message_dim", &c.model.message_dim);
    read(m, "virtual_nodes", &c.model.virtual_nodes);
    read(m, "coord_scale", &c.model.coord_scale);
    read(m, "dropout", &c.model.dropout);
    if (m.contains("variant"))
      c.model.variant = variant_from_name(m["variant"].get<std::string>());
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    check_keys(o, "optimizer", {"lr", "weight_decay", "beta1", "beta2", "eps"});
    read(o, "lr", &c.optimizer.lr);
    read(o, "weight_decay", &c.optimizer.weight_decay);
    read(o, "beta1", &c.optimizer.beta1);
    read(o, "beta2", &c.optimizer.beta2);
    read(o, "eps", &c.optimizer.eps);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    check_keys(t, "train",
               {"epochs", "batch_size", "lr_decay_factor", "lr_patience",
                "lr_decay_after", "val_fraction", "select_metric"});
    read(t, "epochs", &c.train.epochs);
    read(t, "batch_size", &c.train.batch_size);
    read(t, "lr_decay_factor", &c.train.lr_decay_factor);
    read(t, "lr_patience", &c.train.lr_patience);
    read(t, "lr_decay_after", &c.train.lr_decay_after);
    read(t, "val_fraction", &c.train.val_fraction);
    read(t, "select_metric", &c.train.select_metric);
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    check_keys(l, "loss",
               {"gamma", "confidence_weight", "bsc_mode", "huber_delta"});
    read(l, "gamma", &c.loss.gamma);
    read(l, "confidence_weight", &c.loss.confidence_weight);
    read(l, "bsc_mode", &c.loss.bsc_mode);
    read(l, "huber_delta", &c.loss.huber_delta);
  }
  if (j.contains("data")) {
    const json& d = j["data"];
    check_keys(d, "data",
               {"kind", "path", "count", "nodes", "pockets", "eval_count",
                "label_radius", "min_ligand_atoms"});
    read(d, "kind", &c.data.kind);
    read(d, "path", &c.data.path);
    read(d, "count", &c.data.count);
    read(d, "nodes", &c.data.nodes);
    read(d, "pockets", &c.data.pockets);
    read(d, "eval_count", &c.data.eval_count);
    read(d, "label_radius", &c.data.label_radius);
    read(d, "min_ligand_atoms", &c.data.min_ligand_atoms);
  }
  if (j.contains("inference")) {
    const json& i = j["inference"];
    check_keys(i, "inference", {"bandwidth", "threshold"});
    read(i, "bandwidth", &c.inference.bandwidth);
    read(i, "threshold", &c.inference.threshold);
  }
  if (j.contains("kchain")) {
    const json& k = j["kchain"];
    check_keys(k, "kchain",
               {"n", "layers", "dims", "reruns", "steps", "lr",
                "with_virtual_node", "threads"});
    read(k, "n", &c.kchain.n);
    read(k, "layers", &c.kchain.layers);
    read(k, "dims", &c.kchain.dims);
    read(k, "reruns", &c.kchain.reruns);
    read(k, "steps", &c.kchain.steps);
    read(k, "lr", &c.kchain.lr);
    read(k, "with_virtual_node", &c.kchain.with_virtual_node);
    read(k, "threads", &c.kchain.threads);
  }
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, "paths", {"checkpoint", "out_dir"});
    read(p, "checkpoint", &c.paths.checkpoint);
    read(p, "out_dir", &c.paths.out_dir);
  }
  c.kchain.seed = c.seed;
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

std::string model_meta_json(const model::ModelConfig& m) {
  json j = {{"layers", m.layers},
            {"feature_dim", m.feature_dim},
            {"message_dim", m.message_dim},
            {"virtual_nodes", m.virtual_nodes},
            {"coord_scale", m.coord_scale},
            {"dropout", m.dropout},
            {"variant", variant_name(m.variant)},
            {"input_feature_dim", m.input_feature_dim}};
  return j.dump();
}

model::ModelConfig model_meta_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint meta is not valid JSON: ") +
                          e.what());
  }
  model::ModelConfig m;
  read(j, "layers", &m.layers);
  read(j, "feature_dim", &m.feature_dim);
  read(j, "message_dim", &m.message_dim);
  read(j, "virtual_nodes", &m.virtual_nodes);
  read(j, "coord_scale", &m.coord_scale);
  read(j, "dropout", &m.dropout);
  if (j.contains("variant"))
    m.variant = variant_from_name(j["variant"].get<std::string>());
  read(j, "input_feature_dim", &m.input_feature_dim);
  return m;
}

}  // namespace vnegnn
