#pragma once

#include <functional>
#include <string>

#include "zrs/nn/graph.hpp"

namespace zrs::nn {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Denominator floor of the relative error, so entries whose true
  /// gradient is ~0 are judged on absolute error.
  double floor = 1e-6;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Central differences against analytic gradients. `value` evaluates the
/// loss; `gradient` must leave d(loss)/d(param) in every Parameter::grad.
GradCheckReport grad_check(ParameterSet& params,
                           const std::function<double()>& value,
                           const std::function<void()>& gradient,
                           const GradCheckOptions& opts = {});

/// Convenience form for losses expressed as a graph.
GradCheckReport grad_check(ParameterSet& params,
                           const std::function<Var(Graph&)>& loss,
                           const GradCheckOptions& opts = {});

}  // namespace zrs::nn
