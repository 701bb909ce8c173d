#pragma once

#include <map>
#include <string>
#include <vector>

#include "vnegnn/diff/value.hpp"
#include "vnegnn/rng.hpp"

namespace vnegnn::diff {

struct AdamWConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Named leaf values plus AdamW moment state. Parameter names are unique;
// iteration is in name order, so updates are deterministic.
class ParamStore {
 public:
  Value create(const std::string& name, int rows, int cols, Rng& rng,
               double init_bound);
  Value create_zero(const std::string& name, int rows, int cols);
  Value create_const(const std::string& name, int rows, int cols, double v);

  Value get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grad();
  // Decoupled weight decay update; increments the shared step counter.
  void adamw_step(const AdamWConfig& cfg);
  long step_count() const { return step_; }

  std::size_t size() const { return params_.size(); }
  std::size_t parameter_count() const;
  std::vector<std::string> names() const;

  // Independent copy with fresh leaves and zero moments; used by data-parallel
  // workers that accumulate gradients locally.
  ParamStore fork() const;
  void accumulate_grads_from(const ParamStore& other);
  void scale_grads(double s);

  // Checkpoint I/O (JSON, row-major data, "VNEGNN-CKPT-1" magic). `meta` is
  // stored alongside the parameters and returned on load.
  void save(const std::string& path, const std::string& meta_json) const;
  static ParamStore load(const std::string& path, std::string* meta_json);

  std::string serialize(const std::string& meta_json) const;
  static ParamStore deserialize(const std::string& text, std::string* meta_json);

 private:
  struct Moments {
    Mat m, v;
  };
  std::map<std::string, Value> params_;
  std::map<std::string, Moments> opt_;
  long step_ = 0;
};

}  // namespace vnegnn::diff
