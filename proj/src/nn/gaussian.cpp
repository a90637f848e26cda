#include "zrs/nn/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace zrs::nn {

namespace {
const double kLog2Pi = std::log(2.0 * std::numbers::pi);
}

DiagGaussian::DiagGaussian(Vector m, Vector lv)
    : mean(std::move(m)), log_var(std::move(lv)) {
  if (mean.size() != log_var.size())
    throw Error("DiagGaussian: mean/log_var length mismatch");
  log_var = log_var.cwiseMax(kLogVarMin).cwiseMin(kLogVarMax);
}

DiagGaussian DiagGaussian::isotropic(Vector mean, double variance) {
  const auto n = mean.size();
  return DiagGaussian(std::move(mean), Vector::Constant(n, std::log(variance)));
}

double diag_gaussian_log_prob(const Vector& x, const DiagGaussian& g) {
  if (x.size() != g.mean.size()) throw Error("log_prob: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index d = 0; d < x.size(); ++d) {
    const double r = x(d) - g.mean(d);
    s += -0.5 * kLog2Pi - 0.5 * g.log_var(d) - 0.5 * r * r * std::exp(-g.log_var(d));
  }
  return s;
}

double diag_gaussian_kl(const DiagGaussian& q, const DiagGaussian& p) {
  if (q.mean.size() != p.mean.size()) throw Error("kl: dimension mismatch");
  double s = 0.0;
  for (Eigen::Index d = 0; d < q.mean.size(); ++d) {
    const double vq = std::exp(q.log_var(d));
    const double vp = std::exp(p.log_var(d));
    const double dm = q.mean(d) - p.mean(d);
    s += 0.5 * (p.log_var(d) - q.log_var(d) + (vq + dm * dm) / vp - 1.0);
  }
  return s;
}

Vector reparam_sample(const DiagGaussian& g, const Vector& noise) {
  if (noise.size() != g.mean.size()) throw Error("reparam: dimension mismatch");
  return g.mean.array() + (0.5 * g.log_var.array()).exp() * noise.array();
}

Var gaussian_log_prob_rows(Var x, Var mean, Var log_var) {
  // -0.5 * sum(log2pi + lv + (x - m)^2 exp(-lv))
  Var resid2 = square(sub(x, mean));
  Var weighted = mul(resid2, exp(neg(log_var)));
  Var inner = add_scalar(add(log_var, weighted), kLog2Pi);
  return scale(row_sum(inner), -0.5);
}

Var gaussian_log_prob_rows(Var x, Var mean, double log_var) {
  Var resid2 = square(sub(x, mean));
  const double d = static_cast<double>(x.cols());
  Var quad = scale(row_sum(resid2), -0.5 * std::exp(-log_var));
  return add_scalar(quad, -0.5 * d * (kLog2Pi + log_var));
}

Var gaussian_kl_rows(const GaussianVars& q, Var p_mean, double p_log_var) {
  // 0.5 * sum(plv - qlv + (exp(qlv) + (qm - pm)^2) / exp(plv) - 1)
  const double inv_vp = std::exp(-p_log_var);
  Var dm2 = square(sub(q.mean, p_mean));
  Var ratio = scale(add(exp(q.log_var), dm2), inv_vp);
  Var inner = add_scalar(sub(ratio, q.log_var), p_log_var - 1.0);
  return scale(row_sum(inner), 0.5);
}

Var reparameterize(const GaussianVars& q, const Mat& noise) {
  Graph& g = q.mean.graph();
  Var std_dev = exp(scale(q.log_var, 0.5));
  return add(q.mean, mul(std_dev, g.constant(noise)));
}

}  // namespace zrs::nn
