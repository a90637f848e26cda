#pragma once

#include <random>

#include <nlohmann/json.hpp>

#include "zrs/common.hpp"

namespace zrs {

/// Normal-inverse-Wishart prior over a Gaussian's (mean, covariance).
struct NiwPrior {
  Vector m0;
  double kappa0 = 1.0;
  Matrix psi0;
  double nu0 = 0.0;

  int dim() const { return static_cast<int>(m0.size()); }
  /// Throws unless kappa0 > 0, nu0 > dim + 1 and psi0 is symmetric positive
  /// definite with matching shape.
  void validate() const;

  /// m0 = data mean, kappa0 = 1, psi0 = diagonal of the data covariance,
  /// nu0 = dim + 3. `frames` holds one frame per column.
  static NiwPrior from_data(const Matrix& frames);
};

void to_json(nlohmann::json& j, const NiwPrior& p);
void from_json(const nlohmann::json& j, NiwPrior& p);

/// Count, sum and sum of outer products of a set of frames.
struct SuffStats {
  double n = 0;
  Vector sum;
  Matrix outer;

  SuffStats() = default;
  explicit SuffStats(int dim)
      : sum(Vector::Zero(dim)), outer(Matrix::Zero(dim, dim)) {}

  void add(const Eigen::Ref<const Vector>& x);
  void remove(const Eigen::Ref<const Vector>& x);
  SuffStats& operator+=(const SuffStats& o);
  friend SuffStats operator+(SuffStats a, const SuffStats& b) { return a += b; }
};

struct NiwPosterior {
  Vector m;
  double kappa = 0;
  Matrix psi;
  double nu = 0;
};

NiwPosterior posterior(const NiwPrior& prior, const SuffStats& s);

/// log p(X) with the Gaussian parameters integrated out under the prior.
double log_marginal(const NiwPrior& prior, const SuffStats& s);

/// Multivariate Student-t posterior predictive log density at x.
double log_predictive(const SuffStats& s, const NiwPrior& prior, const Vector& x);

/// Multivariate log-gamma, log Gamma_d(a).
double log_multi_gamma(double a, int d);

/// A Gaussian with cached Cholesky factor for fast density evaluation.
struct GaussianParams {
  Vector mean;
  Matrix cov;
  Matrix chol;  // lower
  double log_det = 0;

  static GaussianParams make(Vector mean, Matrix cov);
  /// Log density of every column of `frames`.
  Vector log_density(const Matrix& frames) const;
  double log_density(const Vector& x) const;
};

/// (mu, Sigma) ~ NIW posterior of `s`.
GaussianParams sample_niw(const NiwPrior& prior, const SuffStats& s,
                          std::mt19937_64& rng);

/// Sigma ~ inverse-Wishart(psi, nu) via the Bartlett decomposition.
Matrix sample_inverse_wishart(const Matrix& psi, double nu, std::mt19937_64& rng);

}  // namespace zrs
