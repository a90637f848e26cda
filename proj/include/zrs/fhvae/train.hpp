#pragma once

#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zrs/corpus/archive.hpp"
#include "zrs/corpus/manifest.hpp"
#include "zrs/fhvae/model.hpp"

namespace zrs {

/// Speaker id for training manifests, utterance id for test manifests.
std::string sequence_key(const UtteranceRecord& record, SplitTag split);

/// Training segments grouped by utterance. Segments are referenced by
/// (utterance, start frame) and materialized one batch at a time.
struct FhvaeTrainingData {
  struct Utterance {
    Matrix frames;  // padded to >= l frames when shorter
    int sequence = 0;
  };
  struct SegmentRef {
    int utterance = 0;
    int start = 0;
  };

  int input_dim = 0;
  int segment_length = 0;
  std::vector<std::string> sequence_ids;
  std::vector<double> segment_counts;
  std::vector<Utterance> utterances;
  std::vector<SegmentRef> train;
  std::vector<SegmentRef> cv;

  /// Rows [begin, end) of `refs` as a flattened segment matrix.
  Matrix gather(const std::vector<SegmentRef>& refs, std::size_t begin,
                std::size_t end, std::vector<int>* sequence_index) const;
};

/// Segments every utterance (shift cfg.train_shift, no padding; utterances
/// shorter than l use match-length padding) and holds out cfg.cv_fraction of
/// the utterances for cross-validation. Their sequences stay in the table.
FhvaeTrainingData prepare_training_data(const FhvaeConfig& cfg,
                                        const FeatureArchive& archive,
                                        const Manifest& manifest);

/// Fresh model with one s-vector row per training sequence.
FhvaeModel build_fhvae(const FhvaeConfig& cfg, const FhvaeTrainingData& data);

struct EpochRecord {
  int epoch = 0;
  double train_bound = 0;
  double cv_bound = 0;
  double seconds = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_cv_bound = 0;
  bool stopped_early = false;
};

void to_json(nlohmann::json& j, const EpochRecord& e);
void to_json(nlohmann::json& j, const TrainHistory& h);

using EpochObserver = std::function<void(const EpochRecord&)>;

/// Maximizes the mean per-segment lower bound with Adam until max_epochs or
/// `patience` epochs without CV improvement, then restores the best-CV
/// parameters. On a non-finite bound or gradient the last good parameters
/// are restored and DivergenceError is thrown.
TrainHistory train_fhvae(FhvaeModel& model, const FhvaeTrainingData& data,
                         const EpochObserver& observer = {});

/// Mean lower bound over a fixed set of segments, evaluated with fixed noise.
double evaluate_bound(const FhvaeModel& model, const FhvaeTrainingData& data,
                      const std::vector<FhvaeTrainingData::SegmentRef>& refs,
                      std::uint64_t noise_seed);

}  // namespace zrs
