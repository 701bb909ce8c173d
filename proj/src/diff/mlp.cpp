#include "vnegnn/diff/mlp.hpp"

#include <cmath>

namespace vnegnn::diff {

void MlpSpec::validate() const {
  if (widths.size() < 3)
    throw ConfigError("MlpSpec: needs at least one hidden layer");
  for (int w : widths)
    if (w <= 0) throw ConfigError("MlpSpec: widths must be positive");
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ConfigError("MlpSpec: dropout rate must be in [0, 1)");
}

void mlp_init(const MlpSpec& spec, ParamStore& params,
              const std::string& prefix, Rng& rng) {
  spec.validate();
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    int fan_in = spec.widths[l];
    int fan_out = spec.widths[l + 1];
    std::string tag = std::to_string(l);
    bool last = l + 2 == spec.widths.size();
    if (last && spec.zero_init_output) {
      params.create_zero(prefix + ".w" + tag, fan_in, fan_out);
      params.create_zero(prefix + ".b" + tag, 1, fan_out);
    } else {
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      params.create(prefix + ".w" + tag, fan_in, fan_out, rng, bound);
      params.create(prefix + ".b" + tag, 1, fan_out, rng, bound);
    }
  }
  if (spec.use_layer_norm) {
    params.create_const(prefix + ".ln.g", 1, spec.output_width(), 1.0);
    params.create_zero(prefix + ".ln.b", 1, spec.output_width());
  }
}

Value mlp_forward(const MlpSpec& spec, const ParamStore& params,
                  const std::string& prefix, const Value& input, Rng& rng,
                  bool training) {
  if (input.cols() != spec.input_width())
    throw DimensionError("mlp_forward(" + prefix + "): input has " +
                         std::to_string(input.cols()) + " columns, expected " +
                         std::to_string(spec.input_width()));
  Value x = input;
  for (std::size_t l = 0; l + 1 < spec.widths.size(); ++l) {
    std::string tag = std::to_string(l);
    x = matmul(x, params.get(prefix + ".w" + tag));
    x = add_row_broadcast(x, params.get(prefix + ".b" + tag));
    if (l + 2 < spec.widths.size()) x = silu(x);
  }
  if (spec.output_activation == OutputActivation::kSigmoid) x = sigmoid(x);
  if (spec.use_layer_norm)
    x = layer_norm(x, params.get(prefix + ".ln.g"), params.get(prefix + ".ln.b"));
  x = dropout(x, spec.dropout_rate, rng, training);
  return x;
}

Value layer_norm(const Value& x, const Value& gain, const Value& bias,
                 double eps) {
  Value mu = row_mean(x);
  Value centered = add_col_broadcast(x, mu, -1.0);
  Value var = row_mean(cmul(centered, centered));
  Value inv_std = reciprocal_shift(vsqrt(add_scalar(var, eps)), 0.0);
  Value normed = row_scale(centered, inv_std);
  return add_row_broadcast(mul_row_broadcast(normed, gain), bias);
}

}  // namespace vnegnn::diff
