#include "vnegnn/diff/param_store.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace vnegnn::diff {

namespace {
constexpr const char* kMagic = "VNEGNN-CKPT-1";
}

Value ParamStore::create(const std::string& name, int rows, int cols, Rng& rng,
                         double init_bound) {
  if (params_.count(name))
    throw ContractError("parameter already exists: " + name);
  Mat m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-init_bound, init_bound);
  Value v(std::move(m));
  params_.emplace(name, v);
  return v;
}

Value ParamStore::create_zero(const std::string& name, int rows, int cols) {
  return create_const(name, rows, cols, 0.0);
}

Value ParamStore::create_const(const std::string& name, int rows, int cols,
                               double x) {
  if (params_.count(name))
    throw ContractError("parameter already exists: " + name);
  Value v(Mat::Constant(rows, cols, x));
  params_.emplace(name, v);
  return v;
}

Value ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : params_) v.zero_grad();
}

void ParamStore::adamw_step(const AdamWConfig& cfg) {
  if (cfg.lr <= 0.0) throw ConfigError("adamw: learning rate must be > 0");
  ++step_;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (auto& [name, p] : params_) {
    const Mat& g = p.grad();
    Moments& mo = opt_[name];
    if (mo.m.size() == 0) {
      mo.m = Mat::Zero(p.rows(), p.cols());
      mo.v = Mat::Zero(p.rows(), p.cols());
    }
    mo.m = cfg.beta1 * mo.m + (1.0 - cfg.beta1) * g;
    mo.v = cfg.beta2 * mo.v.array() + (1.0 - cfg.beta2) * g.array().square();
    Mat mhat = mo.m / bc1;
    Mat vhat = mo.v / bc2;
    p.mutable_val().array() -=
        cfg.lr * (mhat.array() / (vhat.array().sqrt() + cfg.eps) +
                  cfg.weight_decay * p.val().array());
  }
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, p] : params_) n += static_cast<std::size_t>(p.val().size());
  return n;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, p] : params_) out.push_back(name);
  return out;
}

ParamStore ParamStore::fork() const {
  ParamStore out;
  for (const auto& [name, p] : params_) out.params_.emplace(name, Value(p.val()));
  return out;
}

void ParamStore::accumulate_grads_from(const ParamStore& other) {
  for (auto& [name, p] : params_) {
    auto it = other.params_.find(name);
    if (it == other.params_.end())
      throw ContractError("accumulate_grads_from: missing parameter " + name);
    p.grad() += it->second.grad();
  }
}

void ParamStore::scale_grads(double s) {
  for (auto& [name, p] : params_) p.grad() *= s;
}

std::string ParamStore::serialize(const std::string& meta_json) const {
  nlohmann::json j;
  j["magic"] = kMagic;
  if (!meta_json.empty()) j["meta"] = nlohmann::json::parse(meta_json);
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, p] : params_) {
    nlohmann::json entry;
    entry["rows"] = p.rows();
    entry["cols"] = p.cols();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(p.val().size()));
    for (Eigen::Index r = 0; r < p.rows(); ++r)
      for (Eigen::Index c = 0; c < p.cols(); ++c) data.push_back(p.val()(r, c));
    entry["data"] = std::move(data);
    params[name] = std::move(entry);
  }
  j["params"] = std::move(params);
  return j.dump();
}

ParamStore ParamStore::deserialize(const std::string& text,
                                   std::string* meta_json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.contains("magic") || j["magic"] != kMagic)
    throw CheckpointError("checkpoint magic mismatch (expected VNEGNN-CKPT-1)");
  ParamStore out;
  for (auto& [name, entry] : j.at("params").items()) {
    int rows = entry.at("rows").get<int>();
    int cols = entry.at("cols").get<int>();
    const auto& data = entry.at("data");
    if (static_cast<int>(data.size()) != rows * cols)
      throw CheckpointError("checkpoint data size mismatch for " + name);
    Mat m(rows, cols);
    std::size_t k = 0;
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
    out.params_.emplace(name, Value(std::move(m)));
  }
  if (meta_json) {
    *meta_json = j.contains("meta") ? j["meta"].dump() : std::string();
  }
  return out;
}

void ParamStore::save(const std::string& path, const std::string& meta_json) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot open checkpoint for writing: " + path);
  os << serialize(meta_json);
}

ParamStore ParamStore::load(const std::string& path, std::string* meta_json) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint: " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return deserialize(text, meta_json);
}

}  // namespace vnegnn::diff
