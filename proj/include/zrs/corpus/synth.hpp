#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include <nlohmann/json.hpp>

#include "zrs/common.hpp"
#include "zrs/corpus/archive.hpp"
#include "zrs/corpus/manifest.hpp"

namespace zrs {

/// Speech-like corpus where linguistic content is a per-phone mean and
/// speaker identity an additive per-speaker offset:
///   frame = phone_mean[p] + speaker_offset[s] + noise.
struct SynthConfig {
  int num_languages = 3;
  int num_speakers_per_language = 4;
  int num_phones = 8;
  int num_utterances = 480;
  std::pair<int, int> frames_per_phone_range{5, 12};
  std::pair<int, int> phones_per_utterance_range{6, 12};
  int feature_dim = 13;
  double speaker_offset_scale = 2.0;
  double emission_noise_scale = 0.3;
  std::uint64_t seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

struct SpeakerTruth {
  Matrix phone_means;                     // num_phones x dim
  std::map<std::string, Vector> offsets;  // speaker id -> offset
};

struct SyntheticCorpus {
  Manifest manifest;
  FeatureArchive features;
  LabelArchive labels;  // ground-truth phone per frame
  SpeakerTruth truth;
};

/// Utterances are dealt round-robin over speakers; speakers are disjoint
/// across languages. Phone sequences never repeat a phone back to back so
/// every run of equal labels is one phone token.
SyntheticCorpus generate_synthetic_corpus(const SynthConfig& cfg);

/// Moves every utterance whose per-speaker ordinal hits the held-out stride
/// into a test manifest. Both parts keep the speaker ids (ground truth).
struct CorpusSplit {
  SyntheticCorpus train;
  SyntheticCorpus test;
};
CorpusSplit split_held_out(const SyntheticCorpus& corpus, double test_fraction);

}  // namespace zrs
