#include "zrs/nn/adam.hpp"

#include <cmath>

namespace zrs::nn {

void AdamConfig::validate() const {
  if (!(learning_rate > 0)) throw Error("adam: learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw Error("adam: betas must lie in [0, 1)");
  if (!(epsilon > 0)) throw Error("adam: epsilon must be > 0");
}

void to_json(nlohmann::json& j, const AdamConfig& c) {
  j = {{"learning_rate", c.learning_rate},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"epsilon", c.epsilon}};
}

void from_json(const nlohmann::json& j, AdamConfig& c) {
  AdamConfig d;
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.beta1 = j.value("beta1", d.beta1);
  c.beta2 = j.value("beta2", d.beta2);
  c.epsilon = j.value("epsilon", d.epsilon);
}

void adam_step(ParameterSet& params, AdamState& state, const AdamConfig& cfg) {
  cfg.validate();
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!params[i].grad.allFinite())
      throw DivergenceError("divergence detected: non-finite gradient in '" +
                            params[i].name() + "'");
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m.push_back(Mat::Zero(params[i].value.rows(), params[i].value.cols()));
      state.v.push_back(Mat::Zero(params[i].value.rows(), params[i].value.cols()));
    }
    state.step = 0;
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw Error("adam: gradient shape mismatch for '" + p.name() + "'");
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * p.grad;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg.learning_rate * (state.m[i].array() / c1) /
                       ((state.v[i].array() / c2).sqrt() + cfg.epsilon);
  }
}

}  // namespace zrs::nn
