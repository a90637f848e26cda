#pragma once

#include "zrs/common.hpp"
#include "zrs/nn/ops.hpp"

namespace zrs::nn {

inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

/// Diagonal Gaussian in (mean, log-variance) form.
struct DiagGaussian {
  Vector mean;
  Vector log_var;

  DiagGaussian() = default;
  DiagGaussian(Vector m, Vector lv);
  /// Isotropic N(mean, variance * I).
  static DiagGaussian isotropic(Vector mean, double variance);
};

double diag_gaussian_log_prob(const Vector& x, const DiagGaussian& g);
/// KL(q || p) >= 0.
double diag_gaussian_kl(const DiagGaussian& q, const DiagGaussian& p);
Vector reparam_sample(const DiagGaussian& g, const Vector& noise);

/// Batched graph versions; one distribution per row.
struct GaussianVars {
  Var mean;
  Var log_var;
};

/// log N(x_r; mean_r, diag(exp(log_var_r))) per row -> B x 1.
Var gaussian_log_prob_rows(Var x, Var mean, Var log_var);
/// Same with a constant isotropic log-variance.
Var gaussian_log_prob_rows(Var x, Var mean, double log_var);
/// KL(q_r || N(p_mean_r, exp(p_log_var) I)) per row -> B x 1.
Var gaussian_kl_rows(const GaussianVars& q, Var p_mean, double p_log_var);
/// mean + exp(0.5 log_var) * noise, noise held constant.
Var reparameterize(const GaussianVars& q, const Mat& noise);

}  // namespace zrs::nn
