#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zrs/corpus/archive.hpp"
#include "zrs/nn/adam.hpp"
#include "zrs/nn/checkpoint.hpp"
#include "zrs/nn/layers.hpp"

namespace zrs {

struct BnfConfig {
  std::vector<int> hidden_dims{1024, 1024, 1024, 1024, 1024};
  int bottleneck_dim = 40;
  int post_bottleneck_dim = 1024;
  int context_frames = 5;
  nn::Activation activation = nn::Activation::kSigmoid;
  /// One weight per language in task order; empty means all 1.
  std::vector<double> task_weights;
  nn::AdamConfig adam{1e-3, 0.9, 0.999, 1e-8};
  int epochs = 10;
  int batch_size = 256;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const BnfConfig& c);
void from_json(const nlohmann::json& j, BnfConfig& c);

/// Stacks each frame with `context` neighbours on either side; edges repeat
/// the first/last frame. Output width (2 * context + 1) * D.
FrameMatrix splice(const FrameMatrix& f, int context);

/// Shared sigmoid trunk, linear bottleneck, one post-bottleneck layer, and a
/// softmax head per language.
class BnfNetwork {
 public:
  BnfNetwork(const BnfConfig& cfg, int input_dim, std::vector<std::string> languages,
             std::vector<int> num_classes);

  static BnfNetwork from_checkpoint(const nn::Checkpoint& ckpt);
  nn::Checkpoint to_checkpoint() const;

  BnfNetwork(BnfNetwork&&) = default;
  BnfNetwork& operator=(BnfNetwork&&) = default;

  const BnfConfig& config() const { return cfg_; }
  int input_dim() const { return input_dim_; }
  int spliced_dim() const { return (2 * cfg_.context_frames + 1) * input_dim_; }
  const std::vector<std::string>& languages() const { return languages_; }
  const std::vector<int>& num_classes() const { return num_classes_; }
  nn::ParameterSet& params() { return params_; }

  /// Input normalization applied to spliced frames.
  void set_normalization(Vector mean, Vector stddev);
  Matrix normalize(const Matrix& spliced) const;

  /// x: normalized spliced frames.
  nn::Var bottleneck(nn::Graph& g, nn::Var x) const;
  /// Last trunk activation before the bottleneck.
  nn::Var trunk(nn::Graph& g, nn::Var x) const;
  /// Unnormalized log-probabilities of language `task` from bottleneck values.
  nn::Var logits(nn::Graph& g, nn::Var bottleneck, int task) const;
  const nn::Dense& bottleneck_layer() const { return bottleneck_; }

  /// Per-frame class posteriors of `task` for unspliced utterance frames.
  Matrix posteriors(const FrameMatrix& utterance, int task) const;

 private:
  BnfNetwork(const BnfConfig& cfg, int input_dim, std::vector<std::string> languages,
             std::vector<int> num_classes, nn::ParameterSet params, Vector mean,
             Vector stddev);
  void bind();

  BnfConfig cfg_;
  int input_dim_ = 0;
  std::vector<std::string> languages_;
  std::vector<int> num_classes_;
  nn::ParameterSet params_;
  Vector mean_, stddev_;
  nn::Mlp trunk_;
  nn::Dense bottleneck_;
  nn::Dense post_;
  std::vector<nn::Dense> heads_;
};

/// Training data of one language.
struct BnfTask {
  std::string language;
  FeatureArchive features;
  LabelArchive labels;
};

/// A batch of normalized spliced frames of one language.
struct BnfBatch {
  int task = 0;
  Matrix inputs;
  std::vector<int> labels;
};

/// Sum over batches of task weight times mean cross-entropy.
nn::Var multitask_loss(nn::Graph& g, const BnfNetwork& net,
                       const std::vector<BnfBatch>& batches);

struct BnfEpoch {
  int epoch = 0;
  std::vector<double> loss;      // per task
  std::vector<double> accuracy;  // per task, frame level
};

struct BnfHistory {
  std::vector<BnfEpoch> epochs;
};

void to_json(nlohmann::json& j, const BnfEpoch& e);

struct BnfResult {
  BnfNetwork network;
  BnfHistory history;
};

/// Adam on the weighted multi-task loss; minibatches of single languages
/// interleaved in proportion to their frame counts.
BnfResult train_bnf(const std::vector<BnfTask>& tasks, const BnfConfig& cfg);

/// Bottleneck activations for every frame.
FrameMatrix extract_bnf(const BnfNetwork& net, const FrameMatrix& utterance);
FeatureArchive extract_bnf(const BnfNetwork& net, const FeatureArchive& archive);

}  // namespace zrs
