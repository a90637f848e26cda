#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zrs/dpgmm/niw.hpp"

namespace zrs {

struct DpgmmConfig {
  double concentration = 1.0;
  /// Empty: derived from the data (NiwPrior::from_data).
  std::optional<NiwPrior> prior;
  int iterations = 100;
  int shards = 1;
  /// Worker cap for the assignment step (0 = one per shard). Results depend
  /// on `shards` only.
  int threads = 0;
  std::uint64_t seed = 0;
  bool split_merge = true;
  /// Sweeps a cluster must survive before it may be split.
  int min_split_age = 3;
  /// Starting partition; empty puts every frame in one cluster.
  std::vector<int> initial_labels;

  void validate() const;
};

void to_json(nlohmann::json& j, const DpgmmConfig& c);
void from_json(const nlohmann::json& j, DpgmmConfig& c);

struct DpgmmCluster {
  SuffStats stats;
  GaussianParams params;
  double log_weight = 0;
};

struct DpgmmState {
  NiwPrior prior;
  double concentration = 1.0;
  std::vector<DpgmmCluster> clusters;
  std::vector<int> assignments;
  /// Collapsed log joint p(X, z) after every sweep.
  std::vector<double> log_joint_trace;

  int num_clusters() const { return static_cast<int>(clusters.size()); }
  std::vector<double> counts() const;
};

/// Sub-cluster split/merge Gibbs sampler. `frames` holds one frame per row.
DpgmmState fit(const Matrix& frames, const DpgmmConfig& cfg);

/// argmax_k log pi_k + log N(x; mu_k, Sigma_k) per row.
std::vector<int> predict(const DpgmmState& state, const Matrix& frames);

/// K, per-cluster counts and the log-joint trace.
nlohmann::json sidecar(const DpgmmState& state);

double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b);
/// Mutual information normalized by the arithmetic mean of the entropies.
double normalized_mutual_info(const std::vector<int>& a, const std::vector<int>& b);

}  // namespace zrs
