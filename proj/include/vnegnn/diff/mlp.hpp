#pragma once

#include <string>
#include <vector>

#include "vnegnn/diff/param_store.hpp"
#include "vnegnn/diff/value.hpp"

namespace vnegnn::diff {

enum class OutputActivation { kIdentity, kSigmoid };

// A small fully connected network: affine maps with SiLU between them,
// optional layer normalization and dropout on the output path.
struct MlpSpec {
  std::vector<int> widths;  // input, hidden..., output
  OutputActivation output_activation = OutputActivation::kIdentity;
  bool use_layer_norm = false;
  double dropout_rate = 0.0;
  bool zero_init_output = false;

  void validate() const;
  int input_width() const { return widths.front(); }
  int output_width() const { return widths.back(); }
};

// Creates all parameters for `spec` under `prefix` (w0/b0, w1/b1, ...,
// optionally ln.g/ln.b). Affine weights use uniform fan-in init.
void mlp_init(const MlpSpec& spec, ParamStore& params, const std::string& prefix,
              Rng& rng);

Value mlp_forward(const MlpSpec& spec, const ParamStore& params,
                  const std::string& prefix, const Value& input, Rng& rng,
                  bool training);

// Row-wise layer normalization with learned gain/bias (1xD each).
Value layer_norm(const Value& x, const Value& gain, const Value& bias,
                 double eps = 1e-5);

}  // namespace vnegnn::diff
