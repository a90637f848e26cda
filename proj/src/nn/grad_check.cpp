#include "zrs/nn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace zrs::nn {

GradCheckReport grad_check(ParameterSet& params,
                           const std::function<double()>& value,
                           const std::function<void()>& gradient,
                           const GradCheckOptions& opts) {
  params.zero_grad();
  gradient();
  std::vector<Mat> analytic;
  for (std::size_t i = 0; i < params.size(); ++i) analytic.push_back(params[i].grad);

  GradCheckReport report;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    for (Eigen::Index k = 0; k < p.value.size(); ++k) {
      const double orig = p.value(k);
      p.value(k) = orig + opts.step;
      const double up = value();
      p.value(k) = orig - opts.step;
      const double down = value();
      p.value(k) = orig;
      const double numeric = (up - down) / (2.0 * opts.step);
      const double a = analytic[i](k);
      const double denom = std::max({std::abs(a), std::abs(numeric), opts.floor});
      double rel = std::abs(a - numeric) / denom;
      if (std::isnan(rel)) rel = std::numeric_limits<double>::infinity();
      ++report.checked;
      if (report.worst_index < 0 || rel > report.max_relative_error) {
        report.max_relative_error = rel;
        report.worst_parameter = p.name();
        report.worst_index = k;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
  }
  report.passed = report.max_relative_error <= opts.tolerance;
  return report;
}

GradCheckReport grad_check(ParameterSet& params,
                           const std::function<Var(Graph&)>& loss,
                           const GradCheckOptions& opts) {
  auto value = [&] {
    Graph g;
    return loss(g).scalar();
  };
  auto gradient = [&] {
    Graph g;
    Var root = loss(g);
    g.backward(root);
  };
  return grad_check(params, value, gradient, opts);
}

}  // namespace zrs::nn
