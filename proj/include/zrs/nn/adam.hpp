#pragma once

#include <nlohmann/json.hpp>

#include "zrs/nn/graph.hpp"

namespace zrs::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.95;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

void to_json(nlohmann::json& j, const AdamConfig& c);
void from_json(const nlohmann::json& j, AdamConfig& c);

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  long step = 0;
};

/// Bias-corrected Adam update of every parameter from its grad. Throws
/// DivergenceError("divergence detected") on a non-finite gradient, before
/// touching any parameter.
void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& cfg);

}  // namespace zrs::nn
