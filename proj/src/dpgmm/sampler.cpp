#include "zrs/dpgmm/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

namespace zrs {

void DpgmmConfig::validate() const {
  if (!(concentration > 0)) throw Error("dpgmm: concentration must be > 0");
  if (iterations < 1) throw Error("dpgmm: iterations must be >= 1");
  if (shards < 1) throw Error("dpgmm: shards must be >= 1");
  if (threads < 0) throw Error("dpgmm: threads must be >= 0");
  if (min_split_age < 0) throw Error("dpgmm: min_split_age must be >= 0");
  if (prior) prior->validate();
}

void to_json(nlohmann::json& j, const DpgmmConfig& c) {
  j = {{"concentration", c.concentration}, {"iterations", c.iterations},
       {"shards", c.shards},               {"threads", c.threads},
       {"seed", c.seed},
       {"split_merge", c.split_merge},     {"min_split_age", c.min_split_age}};
  if (c.prior) j["prior"] = *c.prior;
}

void from_json(const nlohmann::json& j, DpgmmConfig& c) {
  c = DpgmmConfig{};
  c.concentration = j.value("concentration", c.concentration);
  c.iterations = j.value("iterations", c.iterations);
  c.shards = j.value("shards", c.shards);
  c.threads = j.value("threads", c.threads);
  c.seed = j.value("seed", c.seed);
  c.split_merge = j.value("split_merge", c.split_merge);
  c.min_split_age = j.value("min_split_age", c.min_split_age);
  if (j.contains("prior") && !j.at("prior").is_null()) c.prior = j.at("prior").get<NiwPrior>();
}

std::vector<double> DpgmmState::counts() const {
  std::vector<double> out;
  for (const auto& c : clusters) out.push_back(c.stats.n);
  return out;
}

namespace {

struct Cluster {
  SuffStats stats;
  SuffStats sub[2];
  GaussianParams params;
  GaussianParams sub_params[2];
  double log_weight = 0;
  double sub_log_weight[2] = {0, 0};
  int age = 0;
};

/// Frames are stored one per column.
class Sampler {
 public:
  Sampler(const Matrix& x, const DpgmmConfig& cfg, NiwPrior prior)
      : x_(x), cfg_(cfg), prior_(std::move(prior)), rng_(mix_seed(cfg.seed, 0xd9)),
        z_(static_cast<std::size_t>(x.cols()), 0),
        s_(static_cast<std::size_t>(x.cols()), 0) {}

  void init() {
    const auto N = static_cast<std::size_t>(x_.cols());
    int k_max = 0;
    if (!cfg_.initial_labels.empty()) {
      if (cfg_.initial_labels.size() != N) throw Error("dpgmm: initial_labels length mismatch");
      for (std::size_t i = 0; i < N; ++i) {
        if (cfg_.initial_labels[i] < 0) throw Error("dpgmm: negative initial label");
        z_[i] = cfg_.initial_labels[i];
        k_max = std::max(k_max, z_[i]);
      }
    }
    clusters_.assign(static_cast<std::size_t>(k_max + 1), Cluster{});
    recompute_stats();
    drop_empty();
    seed_subclusters(std::vector<bool>(clusters_.size(), true));
    for (auto& c : clusters_) c.age = cfg_.min_split_age;
  }

  void sweep(int iteration) {
    sample_weights();
    sample_params();
    sample_labels(iteration);
    recompute_stats();
    drop_empty();
    reset_empty_subclusters();
    if (cfg_.split_merge) {
      propose_splits();
      propose_merges();
    }
    std::vector<bool> stale(clusters_.size(), false);
    bool any = false;
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      auto& c = clusters_[k];
      ++c.age;
      if (c.age % kReseedAge == 0) stale[k] = any = true;
    }
    if (any) seed_subclusters(stale);
  }

  void finalize() {
    sample_weights();
    sample_params();
  }

  double log_joint() const {
    const double a = cfg_.concentration;
    double n = 0, r = 0;
    for (const auto& c : clusters_) {
      r += std::lgamma(c.stats.n) + log_marginal(prior_, c.stats);
      n += c.stats.n;
    }
    return r + std::lgamma(a) + static_cast<double>(clusters_.size()) * std::log(a) -
           std::lgamma(a + n);
  }

  DpgmmState state() const {
    DpgmmState st;
    st.prior = prior_;
    st.concentration = cfg_.concentration;
    for (const auto& c : clusters_) st.clusters.push_back({c.stats, c.params, c.log_weight});
    st.assignments = z_;
    return st;
  }

 private:
  int dim() const { return static_cast<int>(x_.rows()); }

  void recompute_stats() {
    for (auto& c : clusters_) {
      c.stats = SuffStats(dim());
      c.sub[0] = SuffStats(dim());
      c.sub[1] = SuffStats(dim());
    }
    for (Eigen::Index i = 0; i < x_.cols(); ++i) {
      auto& c = clusters_[static_cast<std::size_t>(z_[static_cast<std::size_t>(i)])];
      c.stats.add(x_.col(i));
      c.sub[s_[static_cast<std::size_t>(i)]].add(x_.col(i));
    }
  }

  void drop_empty() {
    if (std::all_of(clusters_.begin(), clusters_.end(),
                    [](const Cluster& c) { return c.stats.n > 0; }))
      return;
    std::vector<int> remap(clusters_.size(), -1);
    std::vector<Cluster> kept;
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      if (clusters_[k].stats.n > 0) {
        remap[k] = static_cast<int>(kept.size());
        kept.push_back(std::move(clusters_[k]));
      }
    }
    clusters_ = std::move(kept);
    for (auto& z : z_) z = remap[static_cast<std::size_t>(z)];
  }

  /// Reseeds the sub-labels of every cluster with an empty half.
  void reset_empty_subclusters() {
    std::vector<bool> reset(clusters_.size(), false);
    bool any = false;
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      const auto& c = clusters_[k];
      if (c.stats.n >= 2 && (c.sub[0].n == 0 || c.sub[1].n == 0)) reset[k] = any = true;
    }
    if (any) seed_subclusters(reset);
  }

  /// Splits each flagged cluster around two far-apart members: a random
  /// frame p, the member q farthest from p, then the member farthest from q.
  /// Random halves stay mixed for a long time on well separated data.
  void seed_subclusters(const std::vector<bool>& flagged) {
    std::vector<std::vector<std::size_t>> members(clusters_.size());
    for (std::size_t i = 0; i < z_.size(); ++i)
      if (flagged[static_cast<std::size_t>(z_[i])]) members[static_cast<std::size_t>(z_[i])].push_back(i);
    auto farthest = [&](const std::vector<std::size_t>& idx, std::size_t from) {
      std::size_t best = idx.front();
      double best_d = -1;
      for (auto i : idx) {
        const double d = (x_.col(static_cast<Eigen::Index>(i)) - x_.col(static_cast<Eigen::Index>(from))).squaredNorm();
        if (d > best_d) best_d = d, best = i;
      }
      return best;
    };
    for (const auto& idx : members) {
      if (idx.empty()) continue;
      std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
      const std::size_t q = farthest(idx, idx[pick(rng_)]);
      const std::size_t p = farthest(idx, q);
      const Vector xp = x_.col(static_cast<Eigen::Index>(p));
      const Vector xq = x_.col(static_cast<Eigen::Index>(q));
      for (auto i : idx) {
        const auto xi = x_.col(static_cast<Eigen::Index>(i));
        s_[i] = (xi - xq).squaredNorm() < (xi - xp).squaredNorm() ? 1 : 0;
      }
    }
    recompute_stats();
  }

  static void dirichlet(const std::vector<double>& alpha, std::vector<double>& log_out,
                        std::mt19937_64& rng) {
    std::vector<double> g(alpha.size());
    double total = 0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
      std::gamma_distribution<double> gamma(alpha[k], 1.0);
      g[k] = std::max(gamma(rng), std::numeric_limits<double>::min());
      total += g[k];
    }
    log_out.resize(alpha.size());
    for (std::size_t k = 0; k < alpha.size(); ++k) log_out[k] = std::log(g[k] / total);
  }

  void sample_weights() {
    std::vector<double> alpha, logw;
    for (const auto& c : clusters_) alpha.push_back(c.stats.n);
    alpha.push_back(cfg_.concentration);  // mass left for unseen clusters
    dirichlet(alpha, logw, rng_);
    for (std::size_t k = 0; k < clusters_.size(); ++k) {
      auto& c = clusters_[k];
      c.log_weight = logw[k];
      std::vector<double> sub_logw;
      dirichlet({c.sub[0].n + 0.5 * cfg_.concentration, c.sub[1].n + 0.5 * cfg_.concentration},
                sub_logw, rng_);
      c.sub_log_weight[0] = sub_logw[0];
      c.sub_log_weight[1] = sub_logw[1];
    }
  }

  void sample_params() {
    for (auto& c : clusters_) {
      c.params = sample_niw(prior_, c.stats, rng_);
      c.sub_params[0] = sample_niw(prior_, c.sub[0], rng_);
      c.sub_params[1] = sample_niw(prior_, c.sub[1], rng_);
    }
  }

  static int sample_categorical(const Eigen::Ref<const Vector>& logp, std::mt19937_64& rng) {
    const double mx = logp.maxCoeff();
    const Vector p = (logp.array() - mx).exp().matrix();
    std::uniform_real_distribution<double> u(0.0, p.sum());
    double r = u(rng);
    for (Eigen::Index k = 0; k < p.size(); ++k) {
      r -= p(k);
      if (r <= 0) return static_cast<int>(k);
    }
    return static_cast<int>(p.size() - 1);
  }

  void sample_shard(Eigen::Index begin, Eigen::Index end, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto n = end - begin;
    const auto K = static_cast<Eigen::Index>(clusters_.size());
    const Matrix xs = x_.middleCols(begin, n);
    Matrix logp(K, n);
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto& c = clusters_[static_cast<std::size_t>(k)];
      logp.row(k) = (c.params.log_density(xs).array() + c.log_weight).matrix().transpose();
    }
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(K));
    for (Eigen::Index i = 0; i < n; ++i) {
      const int k = sample_categorical(logp.col(i), rng);
      z_[static_cast<std::size_t>(begin + i)] = k;
      members[static_cast<std::size_t>(k)].push_back(i);
    }
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto& idx = members[static_cast<std::size_t>(k)];
      if (idx.empty()) continue;
      const auto& c = clusters_[static_cast<std::size_t>(k)];
      Matrix xk(x_.rows(), static_cast<Eigen::Index>(idx.size()));
      for (std::size_t m = 0; m < idx.size(); ++m) xk.col(static_cast<Eigen::Index>(m)) = xs.col(idx[m]);
      const Vector l0 = c.sub_params[0].log_density(xk).array() + c.sub_log_weight[0];
      const Vector l1 = c.sub_params[1].log_density(xk).array() + c.sub_log_weight[1];
      Vector two(2);
      for (std::size_t m = 0; m < idx.size(); ++m) {
        two << l0(static_cast<Eigen::Index>(m)), l1(static_cast<Eigen::Index>(m));
        s_[static_cast<std::size_t>(begin + idx[m])] = sample_categorical(two, rng);
      }
    }
  }

  void sample_labels(int iteration) {
    const auto N = x_.cols();
    const auto S = std::min<Eigen::Index>(cfg_.shards, std::max<Eigen::Index>(N, 1));
    auto shard_seed = [&](Eigen::Index s) {
      return mix_seed(cfg_.seed, (static_cast<std::uint64_t>(iteration) << 16) ^
                                     static_cast<std::uint64_t>(s + 1));
    };
    auto bounds = [&](Eigen::Index s) { return std::make_pair(N * s / S, N * (s + 1) / S); };
    if (S == 1) {
      sample_shard(0, N, shard_seed(0));
      return;
    }
    const Eigen::Index workers = cfg_.threads > 0 ? std::min<Eigen::Index>(cfg_.threads, S) : S;
    for (Eigen::Index first = 0; first < S; first += workers) {
      std::vector<std::thread> threads;
      for (Eigen::Index s = first; s < std::min(S, first + workers); ++s) {
        const auto [b, e] = bounds(s);
        threads.emplace_back([this, b = b, e = e, seed = shard_seed(s)] { sample_shard(b, e, seed); });
      }
      for (auto& t : threads) t.join();
    }
  }

  void propose_splits() {
    const double a = cfg_.concentration;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto K0 = clusters_.size();
    std::vector<int> new_index(K0, -1);
    for (std::size_t k = 0; k < K0; ++k) {
      auto& c = clusters_[k];
      if (c.age < cfg_.min_split_age || c.sub[0].n < 1 || c.sub[1].n < 1) continue;
      const double log_h = std::log(a) + std::lgamma(c.sub[0].n) + log_marginal(prior_, c.sub[0]) +
                           std::lgamma(c.sub[1].n) + log_marginal(prior_, c.sub[1]) -
                           std::lgamma(c.stats.n) - log_marginal(prior_, c.stats);
      spdlog::trace("dpgmm: split proposal n={} ({}, {}) log H={}", c.stats.n, c.sub[0].n,
                    c.sub[1].n, log_h);
      if (std::log(u(rng_)) >= log_h) continue;
      new_index[k] = static_cast<int>(clusters_.size());
      clusters_.push_back(Cluster{});
      clusters_.back().age = 0;
      clusters_[k].age = 0;
    }
    if (clusters_.size() == K0) return;
    for (std::size_t i = 0; i < z_.size(); ++i) {
      const auto k = static_cast<std::size_t>(z_[i]);
      if (new_index[k] >= 0 && s_[i] == 1) z_[i] = new_index[k];
    }
    std::vector<bool> fresh(clusters_.size(), false);
    for (std::size_t k = 0; k < K0; ++k)
      if (new_index[k] >= 0) fresh[k] = fresh[static_cast<std::size_t>(new_index[k])] = true;
    recompute_stats();
    seed_subclusters(fresh);
    spdlog::debug("dpgmm: split to {} clusters", clusters_.size());
  }

  void propose_merges() {
    const double a = cfg_.concentration;
    const auto K = clusters_.size();
    if (K < 2) return;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t j = k + 1; j < K; ++j) pairs.emplace_back(k, j);
    std::shuffle(pairs.begin(), pairs.end(), rng_);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<int> target(K, -1);
    bool merged_any = false;
    for (const auto& [k, j] : pairs) {
      if (target[k] >= 0 || target[j] >= 0) continue;
      const auto& ck = clusters_[k];
      const auto& cj = clusters_[j];
      const double nk = ck.stats.n, nj = cj.stats.n, n = nk + nj;
      const double log_h = log_marginal(prior_, ck.stats + cj.stats) + std::lgamma(a) +
                           std::lgamma(n) + std::lgamma(0.5 * a + nk) + std::lgamma(0.5 * a + nj) -
                           (log_marginal(prior_, ck.stats) + log_marginal(prior_, cj.stats) +
                            std::log(a) + 2 * std::lgamma(0.5 * a) + std::lgamma(a + n) +
                            std::lgamma(nk) + std::lgamma(nj));
      if (std::log(u(rng_)) >= log_h) continue;
      target[k] = static_cast<int>(k);
      target[j] = static_cast<int>(k);
      merged_any = true;
    }
    if (!merged_any) return;
    for (std::size_t i = 0; i < z_.size(); ++i) {
      const auto k = static_cast<std::size_t>(z_[i]);
      if (target[k] < 0) continue;
      // The two merged clusters become the sub-clusters of the result.
      s_[i] = target[k] == static_cast<int>(k) ? 0 : 1;
      z_[i] = target[k];
    }
    for (std::size_t k = 0; k < K; ++k)
      if (target[k] == static_cast<int>(k)) clusters_[k].age = 0;
    recompute_stats();
    drop_empty();
    spdlog::debug("dpgmm: merged to {} clusters", clusters_.size());
  }

  /// Clusters that have not split for this many sweeps get fresh sub-labels.
  static constexpr int kReseedAge = 25;

  Matrix x_;
  DpgmmConfig cfg_;
  NiwPrior prior_;
  std::mt19937_64 rng_;
  std::vector<int> z_;
  std::vector<int> s_;
  std::vector<Cluster> clusters_;
};

}  // namespace

DpgmmState fit(const Matrix& frames, const DpgmmConfig& cfg) {
  cfg.validate();
  if (frames.rows() < 1) throw Error("dpgmm: no frames");
  const Matrix x = frames.transpose();
  NiwPrior prior = cfg.prior ? *cfg.prior : NiwPrior::from_data(x);
  if (prior.dim() != x.rows()) throw Error("dpgmm: feature dimension does not match prior");
  Sampler sampler(x, cfg, prior);
  sampler.init();
  std::vector<double> trace;
  for (int it = 0; it < cfg.iterations; ++it) {
    sampler.sweep(it);
    trace.push_back(sampler.log_joint());
  }
  sampler.finalize();
  auto st = sampler.state();
  st.log_joint_trace = std::move(trace);
  spdlog::info("dpgmm: {} frames, {} clusters after {} sweeps", frames.rows(),
               st.num_clusters(), cfg.iterations);
  return st;
}

std::vector<int> predict(const DpgmmState& state, const Matrix& frames) {
  if (frames.rows() == 0) return {};
  if (state.clusters.empty()) throw Error("dpgmm: predict on an empty state");
  if (frames.cols() != state.prior.dim()) throw Error("dpgmm: feature dimension mismatch");
  const Matrix x = frames.transpose();
  Matrix logp(static_cast<Eigen::Index>(state.clusters.size()), x.cols());
  for (std::size_t k = 0; k < state.clusters.size(); ++k) {
    const auto& c = state.clusters[k];
    logp.row(static_cast<Eigen::Index>(k)) =
        (c.params.log_density(x).array() + c.log_weight).matrix().transpose();
  }
  std::vector<int> out(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    Eigen::Index best;
    logp.col(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

nlohmann::json sidecar(const DpgmmState& state) {
  return {{"num_clusters", state.num_clusters()},
          {"counts", state.counts()},
          {"concentration", state.concentration},
          {"log_joint_trace", state.log_joint_trace}};
}

namespace {

std::map<std::pair<int, int>, double> contingency(const std::vector<int>& a,
                                                  const std::vector<int>& b,
                                                  std::map<int, double>& ra,
                                                  std::map<int, double>& rb) {
  if (a.size() != b.size()) throw Error("clustering metrics: length mismatch");
  std::map<std::pair<int, int>, double> t;
  for (std::size_t i = 0; i < a.size(); ++i) {
    t[{a[i], b[i]}] += 1;
    ra[a[i]] += 1;
    rb[b[i]] += 1;
  }
  return t;
}

double comb2(double n) { return 0.5 * n * (n - 1); }

}  // namespace

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, double> ra, rb;
  const auto t = contingency(a, b, ra, rb);
  double index = 0, sa = 0, sb = 0;
  for (const auto& [_, n] : t) index += comb2(n);
  for (const auto& [_, n] : ra) sa += comb2(n);
  for (const auto& [_, n] : rb) sb += comb2(n);
  const double total = comb2(static_cast<double>(a.size()));
  if (total == 0) return 1.0;
  const double expected = sa * sb / total;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

double normalized_mutual_info(const std::vector<int>& a, const std::vector<int>& b) {
  std::map<int, double> ra, rb;
  const auto t = contingency(a, b, ra, rb);
  const double n = static_cast<double>(a.size());
  if (n == 0) return 1.0;
  auto entropy = [n](const std::map<int, double>& m) {
    double h = 0;
    for (const auto& [_, c] : m) h -= c / n * std::log(c / n);
    return h;
  };
  double mi = 0;
  for (const auto& [key, c] : t)
    mi += c / n * std::log(c * n / (ra.at(key.first) * rb.at(key.second)));
  const double ha = entropy(ra), hb = entropy(rb);
  if (ha + hb == 0) return 1.0;
  return mi / (0.5 * (ha + hb));
}

}  // namespace zrs
