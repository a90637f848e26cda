#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "zrs/common.hpp"
#include "zrs/fhvae/config.hpp"
#include "zrs/nn/checkpoint.hpp"
#include "zrs/nn/gaussian.hpp"
#include "zrs/nn/layers.hpp"

namespace zrs {

/// Sequence ids and segment counts backing the trainable s-vector table.
/// The vectors themselves live in the model's "mu2_table" parameter
/// (one row per sequence).
struct SVectorIndex {
  std::vector<std::string> ids;
  std::vector<double> segment_counts;  // N^i

  int find(const std::string& id) const;
  std::size_t size() const { return ids.size(); }

 private:
  friend class FhvaeModel;
  std::unordered_map<std::string, int> lookup_;
  void rebuild();
};

/// Encoder for q(z2|x), encoder for q(z1|x,z2), decoder for p(x|z1,z2), and
/// the per-sequence posterior means of mu2.
class FhvaeModel {
 public:
  FhvaeModel(const FhvaeConfig& cfg, int input_dim,
             std::vector<std::string> sequence_ids,
             std::vector<double> segment_counts);

  static FhvaeModel from_checkpoint(const nn::Checkpoint& ckpt);
  nn::Checkpoint to_checkpoint() const;

  FhvaeModel(FhvaeModel&&) = default;
  FhvaeModel& operator=(FhvaeModel&&) = default;

  const FhvaeConfig& config() const { return cfg_; }
  int input_dim() const { return input_dim_; }
  /// l * input_dim; width of a flattened segment.
  int segment_width() const { return cfg_.segment_length * input_dim_; }

  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }

  /// x: B x segment_width.
  nn::GaussianVars encode_z2(nn::Graph& g, nn::Var x) const;
  nn::GaussianVars encode_z1(nn::Graph& g, nn::Var x, nn::Var z2) const;
  /// Mean and log-variance of every frame, flattened to B x segment_width.
  nn::GaussianVars decode(nn::Graph& g, nn::Var z1, nn::Var z2) const;

  const SVectorIndex& sequences() const { return index_; }
  nn::Parameter& table() { return *table_; }
  const nn::Parameter& table() const { return *table_; }
  /// Graph node of the whole M x z2_dim table.
  nn::Var table_var(nn::Graph& g) const { return g.parameter(*table_); }
  /// Row of the s-vector table; throws for unknown ids.
  Vector svector(const std::string& sequence_id) const;

 private:
  FhvaeModel(const FhvaeConfig& cfg, int input_dim, SVectorIndex index,
             nn::ParameterSet params);
  void build(std::mt19937_64* rng);
  nn::GaussianVars heads(nn::Graph& g, nn::Var h, const nn::Dense& mean,
                         const nn::Dense& log_var) const;

  FhvaeConfig cfg_;
  int input_dim_ = 0;
  SVectorIndex index_;
  nn::ParameterSet params_;
  nn::Parameter* table_ = nullptr;

  nn::Lstm z2_rnn_, z1_rnn_, dec_rnn_;
  nn::Mlp z2_mlp_, z1_mlp_, dec_mlp_;
  nn::Dense z2_mean_, z2_logvar_, z1_mean_, z1_logvar_, x_mean_, x_logvar_;
};

/// Standard-normal draws for one reparameterized sample per segment.
struct SegmentNoise {
  nn::Mat z2;  // B x z2_dim
  nn::Mat z1;  // B x z1_dim
  static SegmentNoise draw(const FhvaeConfig& cfg, Eigen::Index batch,
                           std::mt19937_64& rng);
  static SegmentNoise zeros(const FhvaeConfig& cfg, Eigen::Index batch);
};

/// Per-segment terms of the discriminative segmental lower bound, B x 1 each.
/// kl_z1 and kl_z2 are the (non-negative) KL values; total subtracts them.
struct LowerBoundVars {
  nn::Var total;
  nn::Var reconstruction;   // log p(x | z1, z2) at the sampled latents
  nn::Var kl_z1;            // KL(q(z1|x,z2) || N(0, s2_z1 I))
  nn::Var kl_z2;            // KL(q(z2|x) || N(mu2_i, s2_z2 I))
  nn::Var log_prior_mu2;    // (1/N^i) log N(mu2_i; 0, s2_mu2 I)
  nn::Var discriminative;   // alpha * log p(i | z2)
};

LowerBoundVars lower_bound(nn::Graph& g, const FhvaeModel& model,
                           const Matrix& segments,
                           const std::vector<int>& sequence_index,
                           const SegmentNoise& noise);

/// Batch means of the terms above.
struct LowerBoundTerms {
  double total = 0;
  double reconstruction = 0;
  double kl_z1 = 0;
  double kl_z2 = 0;
  double log_prior_mu2 = 0;
  double discriminative = 0;
};

LowerBoundTerms lower_bound(const FhvaeModel& model, const Matrix& segments,
                            const std::vector<int>& sequence_index,
                            const SegmentNoise& noise);

}  // namespace zrs
