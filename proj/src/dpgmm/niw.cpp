#include "zrs/dpgmm/niw.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <spdlog/spdlog.h>

namespace zrs {

namespace {

constexpr double kLogPi = 1.1447298858494002;
constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kJitter = 1e-6;

/// Cholesky of a symmetric matrix, adding kJitter * I once when it is not
/// numerically positive definite.
Eigen::LLT<Matrix> robust_llt(const Matrix& a, const char* what) {
  Matrix sym = 0.5 * (a + a.transpose());
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return llt;
  spdlog::warn("dpgmm: singular {} regularized with {}*I", what, kJitter);
  sym.diagonal().array() += kJitter;
  llt.compute(sym);
  if (llt.info() != Eigen::Success) throw Error(std::string("dpgmm: ") + what + " is not positive definite");
  return llt;
}

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

void NiwPrior::validate() const {
  const auto d = m0.size();
  if (d < 1) throw Error("niw prior: empty mean");
  if (!(kappa0 > 0)) throw Error("niw prior: kappa0 must be > 0");
  if (!(nu0 > static_cast<double>(d) + 1)) throw Error("niw prior: nu0 must exceed dim + 1");
  if (psi0.rows() != d || psi0.cols() != d) throw Error("niw prior: psi0 shape mismatch");
  if (!psi0.isApprox(psi0.transpose(), 1e-12)) throw Error("niw prior: psi0 not symmetric");
  Eigen::LLT<Matrix> llt(psi0);
  if (llt.info() != Eigen::Success) throw Error("niw prior: psi0 not positive definite");
}

NiwPrior NiwPrior::from_data(const Matrix& frames) {
  if (frames.cols() == 0) throw Error("niw prior: no frames");
  const auto d = frames.rows();
  NiwPrior p;
  p.m0 = frames.rowwise().mean();
  Vector var = Vector::Constant(d, 1.0);
  if (frames.cols() > 1) {
    var = (frames.colwise() - p.m0).array().square().rowwise().sum() /
          static_cast<double>(frames.cols() - 1);
  }
  var = var.cwiseMax(1e-6);
  p.psi0 = var.asDiagonal();
  p.kappa0 = 1.0;
  p.nu0 = static_cast<double>(d) + 3.0;
  return p;
}

void to_json(nlohmann::json& j, const NiwPrior& p) {
  std::vector<double> m(p.m0.data(), p.m0.data() + p.m0.size());
  std::vector<std::vector<double>> psi;
  for (Eigen::Index r = 0; r < p.psi0.rows(); ++r) {
    psi.emplace_back();
    for (Eigen::Index c = 0; c < p.psi0.cols(); ++c) psi.back().push_back(p.psi0(r, c));
  }
  j = {{"m0", m}, {"kappa0", p.kappa0}, {"psi0", psi}, {"nu0", p.nu0}};
}

void from_json(const nlohmann::json& j, NiwPrior& p) {
  const auto m = j.at("m0").get<std::vector<double>>();
  const auto psi = j.at("psi0").get<std::vector<std::vector<double>>>();
  const auto d = static_cast<Eigen::Index>(m.size());
  p.m0 = Eigen::Map<const Vector>(m.data(), d);
  p.psi0.resize(d, d);
  if (static_cast<Eigen::Index>(psi.size()) != d) throw Error("niw prior: psi0 shape mismatch");
  for (Eigen::Index r = 0; r < d; ++r) {
    if (static_cast<Eigen::Index>(psi[static_cast<std::size_t>(r)].size()) != d)
      throw Error("niw prior: psi0 shape mismatch");
    for (Eigen::Index c = 0; c < d; ++c)
      p.psi0(r, c) = psi[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  p.kappa0 = j.at("kappa0").get<double>();
  p.nu0 = j.at("nu0").get<double>();
}

void SuffStats::add(const Eigen::Ref<const Vector>& x) {
  n += 1;
  sum += x;
  outer.noalias() += x * x.transpose();
}

void SuffStats::remove(const Eigen::Ref<const Vector>& x) {
  n -= 1;
  sum -= x;
  outer.noalias() -= x * x.transpose();
}

SuffStats& SuffStats::operator+=(const SuffStats& o) {
  n += o.n;
  sum += o.sum;
  outer += o.outer;
  return *this;
}

NiwPosterior posterior(const NiwPrior& prior, const SuffStats& s) {
  NiwPosterior q;
  q.kappa = prior.kappa0 + s.n;
  q.nu = prior.nu0 + s.n;
  q.m = (prior.kappa0 * prior.m0 + s.sum) / q.kappa;
  q.psi = prior.psi0 + s.outer + prior.kappa0 * prior.m0 * prior.m0.transpose() -
          q.kappa * q.m * q.m.transpose();
  q.psi = 0.5 * (q.psi + q.psi.transpose());
  return q;
}

double log_multi_gamma(double a, int d) {
  double r = 0.25 * d * (d - 1) * kLogPi;
  for (int j = 1; j <= d; ++j) r += std::lgamma(a + 0.5 * (1 - j));
  return r;
}

double log_marginal(const NiwPrior& prior, const SuffStats& s) {
  const int d = prior.dim();
  const auto q = posterior(prior, s);
  const double ld0 = log_det(robust_llt(prior.psi0, "prior scale"));
  const double ldn = log_det(robust_llt(q.psi, "scatter"));
  return -0.5 * s.n * d * kLogPi + log_multi_gamma(0.5 * q.nu, d) -
         log_multi_gamma(0.5 * prior.nu0, d) + 0.5 * prior.nu0 * ld0 - 0.5 * q.nu * ldn +
         0.5 * d * (std::log(prior.kappa0) - std::log(q.kappa));
}

double log_predictive(const SuffStats& s, const NiwPrior& prior, const Vector& x) {
  const int d = prior.dim();
  if (x.size() != d) throw Error("log_predictive: dimension mismatch");
  const auto q = posterior(prior, s);
  const double dof = q.nu - d + 1;
  const Matrix scale = q.psi * ((q.kappa + 1) / (q.kappa * dof));
  const auto llt = robust_llt(scale, "predictive scale");
  const Vector diff = x - q.m;
  const double maha = llt.matrixL().solve(diff).squaredNorm();
  return std::lgamma(0.5 * (dof + d)) - std::lgamma(0.5 * dof) -
         0.5 * d * (std::log(dof) + kLogPi) - 0.5 * log_det(llt) -
         0.5 * (dof + d) * std::log1p(maha / dof);
}

GaussianParams GaussianParams::make(Vector mean, Matrix cov) {
  GaussianParams g;
  g.mean = std::move(mean);
  auto llt = robust_llt(cov, "covariance");
  g.chol = llt.matrixL();
  g.cov = g.chol * g.chol.transpose();
  g.log_det = 2.0 * g.chol.diagonal().array().log().sum();
  return g;
}

Vector GaussianParams::log_density(const Matrix& frames) const {
  Matrix diff = frames.colwise() - mean;
  chol.triangularView<Eigen::Lower>().solveInPlace(diff);
  const double c = -0.5 * (static_cast<double>(mean.size()) * kLog2Pi + log_det);
  return (c - 0.5 * diff.colwise().squaredNorm().array()).matrix().transpose();
}

double GaussianParams::log_density(const Vector& x) const {
  Vector diff = x - mean;
  chol.triangularView<Eigen::Lower>().solveInPlace(diff);
  return -0.5 * (static_cast<double>(mean.size()) * kLog2Pi + log_det + diff.squaredNorm());
}

Matrix sample_inverse_wishart(const Matrix& psi, double nu, std::mt19937_64& rng) {
  const auto d = psi.rows();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a = Matrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    std::chi_squared_distribution<double> chi2(nu - static_cast<double>(i));
    a(i, i) = std::sqrt(chi2(rng));
    for (Eigen::Index j = 0; j < i; ++j) a(i, j) = normal(rng);
  }
  const Matrix l = robust_llt(psi, "scale").matrixL();
  // Sigma = L A^{-T} A^{-1} L^T
  Matrix c = a.transpose().triangularView<Eigen::Upper>().solve<Eigen::OnTheRight>(l);
  return c * c.transpose();
}

GaussianParams sample_niw(const NiwPrior& prior, const SuffStats& s,
                          std::mt19937_64& rng) {
  const auto q = posterior(prior, s);
  Matrix cov = sample_inverse_wishart(q.psi, q.nu, rng);
  auto g = GaussianParams::make(q.m, cov);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(q.m.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  g.mean = q.m + g.chol * z / std::sqrt(q.kappa);
  return g;
}

}  // namespace zrs
