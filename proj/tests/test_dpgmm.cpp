#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "zrs/corpus/synth.hpp"
#include "zrs/dpgmm/niw.hpp"
#include "zrs/dpgmm/sampler.hpp"

using namespace zrs;

namespace {

NiwPrior unit_prior_1d() {
  NiwPrior p;
  p.m0 = Vector::Zero(1);
  p.kappa0 = 1;
  p.psi0 = Matrix::Identity(1, 1);
  p.nu0 = 3;
  return p;
}

/// 1-D Student-t posterior predictive written out from the conjugate
/// update of a normal-inverse-chi-square style prior.
double student_t_1d(const std::vector<double>& data, const NiwPrior& p, double x) {
  const double n = static_cast<double>(data.size());
  double mean = 0;
  for (double v : data) mean += v;
  if (n > 0) mean /= n;
  double scatter = 0;
  for (double v : data) scatter += (v - mean) * (v - mean);
  const double k0 = p.kappa0, m0 = p.m0(0), nu0 = p.nu0, psi0 = p.psi0(0, 0);
  const double kn = k0 + n, nun = nu0 + n;
  const double mn = (k0 * m0 + n * mean) / kn;
  const double psin = psi0 + scatter + k0 * n / kn * (mean - m0) * (mean - m0);
  const double df = nun;  // nu - d + 1 with d = 1
  const double scale2 = psin * (kn + 1) / (kn * df);
  return std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * std::numbers::pi * scale2) -
         (df + 1) / 2 * std::log1p((x - mn) * (x - mn) / (df * scale2));
}

SuffStats stats_of(const std::vector<double>& data) {
  SuffStats s(1);
  for (double v : data) s.add(Vector::Constant(1, v));
  return s;
}

struct Blobs {
  Matrix x;
  std::vector<int> truth;
};

Blobs two_blobs(std::uint64_t seed, int per_blob = 1000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0, 1);
  Blobs b{Matrix(2 * per_blob, 2), {}};
  for (int i = 0; i < 2 * per_blob; ++i) {
    const double m = i < per_blob ? -5 : 5;
    b.x(i, 0) = m + n(rng);
    b.x(i, 1) = m + n(rng);
    b.truth.push_back(i < per_blob ? 0 : 1);
  }
  return b;
}

int big_clusters(const DpgmmState& st) {
  int k = 0;
  for (double c : st.counts()) k += c >= 10;
  return k;
}

}  // namespace

TEST(Niw, StudentTOracleEmptyCluster) {
  const auto p = unit_prior_1d();
  const double got = log_predictive(SuffStats(1), p, Vector::Zero(1));
  EXPECT_NEAR(got, student_t_1d({}, p, 0.0), 1e-10);
  // df 3, scale^2 2/3: Gamma(2) / (Gamma(1.5) sqrt(2 pi))
  EXPECT_NEAR(got, -std::log(std::tgamma(1.5) * std::sqrt(2 * std::numbers::pi)), 1e-10);
}

TEST(Niw, StudentTOracleWithData) {
  auto p = unit_prior_1d();
  p.m0(0) = 0.4;
  p.kappa0 = 0.5;
  p.psi0(0, 0) = 2.0;
  p.nu0 = 4.5;
  const std::vector<double> data{1.0, -0.3, 2.2, 0.7};
  for (double x : {-3.0, 0.0, 0.9, 5.0})
    EXPECT_NEAR(log_predictive(stats_of(data), p, Vector::Constant(1, x)), student_t_1d(data, p, x),
                1e-10);
}

TEST(Niw, PredictiveSymmetricAroundPosteriorMean) {
  const auto p = unit_prior_1d();
  const auto s = stats_of({0.5, 1.5, 2.0});
  const double m = posterior(p, s).m(0);
  for (double d : {0.1, 1.0, 3.0})
    EXPECT_NEAR(log_predictive(s, p, Vector::Constant(1, m + d)),
                log_predictive(s, p, Vector::Constant(1, m - d)), 1e-12);
}

TEST(Niw, AddingAPointRaisesPredictiveThere) {
  const auto p = unit_prior_1d();
  auto s = stats_of({0.0, 0.2});
  const Vector x = Vector::Constant(1, 2.5);
  const double before = log_predictive(s, p, x);
  s.add(x);
  EXPECT_GT(log_predictive(s, p, x), before);
}

TEST(Niw, MarginalChainRuleMatchesPredictive) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  NiwPrior p;
  p.m0 = Vector::Zero(3);
  p.kappa0 = 0.7;
  p.psi0 = Matrix::Identity(3, 3) * 1.5;
  p.psi0(0, 1) = p.psi0(1, 0) = 0.3;
  p.nu0 = 6;
  SuffStats s(3);
  for (int i = 0; i < 6; ++i) {
    Vector x(3);
    for (int d = 0; d < 3; ++d) x(d) = n(rng);
    const double before = log_marginal(p, s);
    const double pred = log_predictive(s, p, x);
    s.add(x);
    EXPECT_NEAR(log_marginal(p, s) - before, pred, 1e-9);
  }
}

TEST(Niw, InverseWishartMeanMonteCarlo) {
  std::mt19937_64 rng(4);
  Matrix psi(2, 2);
  psi << 2.0, 0.5, 0.5, 1.0;
  const double nu = 8;
  Matrix acc = Matrix::Zero(2, 2);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) acc += sample_inverse_wishart(psi, nu, rng);
  const Matrix expected = psi / (nu - 2 - 1);
  EXPECT_LT((acc / draws - expected).cwiseAbs().maxCoeff(), 0.02);
}

TEST(Niw, PriorValidation) {
  auto p = unit_prior_1d();
  p.nu0 = 1.5;
  EXPECT_THROW(p.validate(), Error);
  p = unit_prior_1d();
  p.kappa0 = 0;
  EXPECT_THROW(p.validate(), Error);
  p = unit_prior_1d();
  p.psi0(0, 0) = -1;
  EXPECT_THROW(p.validate(), Error);
}

TEST(Niw, MultiGammaOneDimIsLogGamma) {
  EXPECT_NEAR(log_multi_gamma(3.7, 1), std::lgamma(3.7), 1e-12);
  EXPECT_NEAR(log_multi_gamma(3.7, 2), 0.5 * std::log(std::numbers::pi) + std::lgamma(3.7) + std::lgamma(3.2),
              1e-12);
}

TEST(Metrics, AriAndNmiKnownValues) {
  const std::vector<int> a{0, 0, 1, 1, 2, 2};
  const std::vector<int> relabeled{5, 5, 3, 3, 9, 9};
  EXPECT_DOUBLE_EQ(adjusted_rand_index(a, relabeled), 1.0);
  EXPECT_NEAR(normalized_mutual_info(a, relabeled), 1.0, 1e-12);
  // Hand-computed: contingency {2,1 | 0,1 ...}
  const std::vector<int> x{0, 0, 0, 1, 1, 1};
  const std::vector<int> y{0, 0, 1, 1, 2, 2};
  // sum C(n_ij,2) = 1 + 1 = 2; rows 3,3 -> 6; cols 2,2,2 -> 3; total 15.
  const double expected = (2 - 6.0 * 3 / 15) / (0.5 * (6 + 3) - 6.0 * 3 / 15);
  EXPECT_NEAR(adjusted_rand_index(x, y), expected, 1e-12);
  EXPECT_THROW(adjusted_rand_index(x, {0}), Error);
}

TEST(Fit, SingleFrame) {
  DpgmmConfig cfg;
  cfg.iterations = 5;
  const auto st = fit(Matrix::Constant(1, 3, 0.5), cfg);
  EXPECT_EQ(st.num_clusters(), 1);
  EXPECT_EQ(st.assignments, std::vector<int>{0});
  EXPECT_EQ(st.counts()[0], 1.0);
}

TEST(Fit, IdenticalPointsDoNotCrash) {
  DpgmmConfig cfg;
  cfg.iterations = 10;
  const auto st = fit(Matrix::Constant(50, 2, 1.25), cfg);
  ASSERT_GE(st.num_clusters(), 1);
  const auto c = st.counts();
  EXPECT_EQ(std::accumulate(c.begin(), c.end(), 0.0), 50.0);
}

TEST(Fit, TwoBlobs) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto b = two_blobs(seed);
    DpgmmConfig cfg;
    cfg.seed = seed;
    const auto st = fit(b.x, cfg);
    EXPECT_EQ(big_clusters(st), 2) << "seed " << seed;
    EXPECT_GE(adjusted_rand_index(st.assignments, b.truth), 0.99) << "seed " << seed;
    const auto c = st.counts();
    EXPECT_EQ(std::accumulate(c.begin(), c.end(), 0.0), 2000.0);
    EXPECT_EQ(st.log_joint_trace.size(), 100u);
  }
}

TEST(Fit, DeterministicGivenSeedAndShards) {
  const auto b = two_blobs(5, 300);
  DpgmmConfig cfg;
  cfg.iterations = 30;
  cfg.shards = 4;
  cfg.seed = 9;
  cfg.threads = 1;
  const auto a = fit(b.x, cfg);
  cfg.threads = 0;
  const auto c = fit(b.x, cfg);
  EXPECT_EQ(a.assignments, c.assignments);
  EXPECT_EQ(a.log_joint_trace, c.log_joint_trace);
}

TEST(Fit, ExchangeabilitySmoke) {
  const auto b = two_blobs(6);
  std::vector<int> perm(2000);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  Matrix xp(2000, 2);
  std::vector<int> tp(2000);
  for (int i = 0; i < 2000; ++i) {
    xp.row(i) = b.x.row(perm[static_cast<std::size_t>(i)]);
    tp[static_cast<std::size_t>(i)] = b.truth[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  DpgmmConfig cfg;
  cfg.iterations = 50;
  cfg.seed = 1;
  const double a = adjusted_rand_index(fit(b.x, cfg).assignments, b.truth);
  cfg.seed = 2;
  const double p = adjusted_rand_index(fit(xp, cfg).assignments, tp);
  EXPECT_LT(std::abs(a - p), 0.02);
}

TEST(Fit, ForcedTruthWithoutSplitMergeKeepsClusters) {
  const auto b = two_blobs(7);
  DpgmmConfig cfg;
  cfg.iterations = 30;
  cfg.split_merge = false;
  cfg.initial_labels = b.truth;
  const auto st = fit(b.x, cfg);
  EXPECT_EQ(st.num_clusters(), 2);
  for (double c : st.counts()) EXPECT_GE(c, 10);
}

TEST(Fit, SyntheticPhonesWithoutSpeakerOffsets) {
  SynthConfig s;
  s.num_languages = 1;
  s.num_speakers_per_language = 2;
  s.num_phones = 3;
  s.num_utterances = 30;
  s.speaker_offset_scale = 0;
  s.emission_noise_scale = 0.1;
  s.feature_dim = 4;
  const auto corpus = generate_synthetic_corpus(s);
  Matrix x(static_cast<Eigen::Index>(corpus.features.total_frames()), 4);
  std::vector<int> truth;
  Eigen::Index row = 0;
  for (const auto& [id, f] : corpus.features.entries()) {
    x.middleRows(row, f.rows()) = f.cast<double>();
    row += f.rows();
    const auto& l = corpus.labels.at(id);
    truth.insert(truth.end(), l.begin(), l.end());
  }
  DpgmmConfig cfg;
  cfg.iterations = 50;
  const auto st = fit(x, cfg);
  EXPECT_GE(st.num_clusters(), 3);
  EXPECT_GE(normalized_mutual_info(st.assignments, truth), 0.8);
}

TEST(Predict, ReproducesFitAssignments) {
  const auto b = two_blobs(8);
  DpgmmConfig cfg;
  cfg.iterations = 40;
  const auto st = fit(b.x, cfg);
  const auto p = predict(st, b.x);
  int same = 0;
  for (std::size_t i = 0; i < p.size(); ++i) same += p[i] == st.assignments[i];
  EXPECT_GE(same, static_cast<int>(0.99 * p.size()));
  EXPECT_TRUE(predict(st, Matrix(0, 2)).empty());
  EXPECT_THROW(predict(st, Matrix::Zero(3, 5)), Error);
}

TEST(Predict, FrameAtComponentMean) {
  DpgmmState st;
  st.prior = NiwPrior::from_data(Matrix::Random(2, 10));
  for (double m : {-20.0, 0.0, 20.0}) {
    DpgmmCluster c;
    c.params = GaussianParams::make(Vector::Constant(2, m), Matrix::Identity(2, 2));
    c.log_weight = std::log(1.0 / 3);
    st.clusters.push_back(c);
  }
  Matrix x(3, 2);
  x << 20, 20, -20, -20, 0, 0;
  EXPECT_EQ(predict(st, x), (std::vector<int>{2, 0, 1}));
}

TEST(Fit, ConfigErrors) {
  DpgmmConfig cfg;
  cfg.iterations = 0;
  EXPECT_THROW(fit(Matrix::Zero(3, 2), cfg), Error);
  cfg = {};
  cfg.prior = unit_prior_1d();
  EXPECT_THROW(fit(Matrix::Zero(3, 2), cfg), Error);
  cfg = {};
  EXPECT_THROW(fit(Matrix(0, 2), cfg), Error);
}

TEST(Fit, SidecarFields) {
  const auto b = two_blobs(3, 100);
  DpgmmConfig cfg;
  cfg.iterations = 10;
  const auto st = fit(b.x, cfg);
  const auto j = sidecar(st);
  EXPECT_EQ(j.at("num_clusters").get<int>(), st.num_clusters());
  EXPECT_EQ(j.at("log_joint_trace").size(), 10u);
}

TEST(Presets, ConfigJsonRoundTrip) {
  DpgmmConfig cfg;
  cfg.iterations = 7;
  cfg.shards = 3;
  cfg.prior = unit_prior_1d();
  nlohmann::json j = cfg;
  const auto back = j.get<DpgmmConfig>();
  EXPECT_EQ(back.iterations, 7);
  EXPECT_EQ(back.shards, 3);
  ASSERT_TRUE(back.prior.has_value());
  EXPECT_EQ(back.prior->nu0, 3.0);
}
