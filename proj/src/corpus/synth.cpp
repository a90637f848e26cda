#include "zrs/corpus/synth.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace zrs {

void SynthConfig::validate() const {
  if (num_languages < 1 || num_speakers_per_language < 1 || num_phones < 1 ||
      num_utterances < 1 || feature_dim < 1)
    throw Error("synth config: counts must be >= 1");
  if (speaker_offset_scale < 0 || emission_noise_scale < 0)
    throw Error("synth config: scales must be >= 0");
  if (frames_per_phone_range.first < 1 ||
      frames_per_phone_range.first > frames_per_phone_range.second)
    throw Error("synth config: bad frames_per_phone_range");
  if (phones_per_utterance_range.first < 1 ||
      phones_per_utterance_range.first > phones_per_utterance_range.second)
    throw Error("synth config: bad phones_per_utterance_range");
}

void to_json(nlohmann::json& j, const SynthConfig& c) {
  j = nlohmann::json{
      {"num_languages", c.num_languages},
      {"num_speakers_per_language", c.num_speakers_per_language},
      {"num_phones", c.num_phones},
      {"num_utterances", c.num_utterances},
      {"frames_per_phone_range",
       {c.frames_per_phone_range.first, c.frames_per_phone_range.second}},
      {"phones_per_utterance_range",
       {c.phones_per_utterance_range.first, c.phones_per_utterance_range.second}},
      {"feature_dim", c.feature_dim},
      {"speaker_offset_scale", c.speaker_offset_scale},
      {"emission_noise_scale", c.emission_noise_scale},
      {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SynthConfig& c) {
  SynthConfig d;
  c.num_languages = j.value("num_languages", d.num_languages);
  c.num_speakers_per_language =
      j.value("num_speakers_per_language", d.num_speakers_per_language);
  c.num_phones = j.value("num_phones", d.num_phones);
  c.num_utterances = j.value("num_utterances", d.num_utterances);
  if (j.contains("frames_per_phone_range")) {
    const auto& r = j.at("frames_per_phone_range");
    c.frames_per_phone_range = {r.at(0).get<int>(), r.at(1).get<int>()};
  }
  if (j.contains("phones_per_utterance_range")) {
    const auto& r = j.at("phones_per_utterance_range");
    c.phones_per_utterance_range = {r.at(0).get<int>(), r.at(1).get<int>()};
  }
  c.feature_dim = j.value("feature_dim", d.feature_dim);
  c.speaker_offset_scale = j.value("speaker_offset_scale", d.speaker_offset_scale);
  c.emission_noise_scale = j.value("emission_noise_scale", d.emission_noise_scale);
  c.seed = j.value("seed", d.seed);
}

namespace {

std::string language_id(int l) { return "L" + std::to_string(l); }

std::string speaker_id(int l, int s) {
  return language_id(l) + "S" + std::to_string(s);
}

std::string utterance_id(const std::string& spk, int n) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "U%04d", n);
  return spk + buf;
}

}  // namespace

SyntheticCorpus generate_synthetic_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int dim = cfg.feature_dim;

  SyntheticCorpus out;
  out.truth.phone_means.resize(cfg.num_phones, dim);
  for (int p = 0; p < cfg.num_phones; ++p)
    for (int d = 0; d < dim; ++d) out.truth.phone_means(p, d) = normal(rng);

  std::vector<std::string> speakers;
  std::vector<std::string> speaker_language;
  for (int l = 0; l < cfg.num_languages; ++l)
    for (int s = 0; s < cfg.num_speakers_per_language; ++s) {
      const auto id = speaker_id(l, s);
      Vector offset(dim);
      for (int d = 0; d < dim; ++d)
        offset(d) = cfg.speaker_offset_scale * normal(rng);
      out.truth.offsets.emplace(id, std::move(offset));
      speakers.push_back(id);
      speaker_language.push_back(language_id(l));
    }

  std::uniform_int_distribution<int> phones_per_utt(
      cfg.phones_per_utterance_range.first, cfg.phones_per_utterance_range.second);
  std::uniform_int_distribution<int> duration(cfg.frames_per_phone_range.first,
                                              cfg.frames_per_phone_range.second);
  std::uniform_int_distribution<int> phone_draw(0, cfg.num_phones - 1);

  std::vector<UtteranceRecord> records;
  out.labels.set_num_classes(cfg.num_phones);
  std::vector<int> per_speaker_count(speakers.size(), 0);
  for (int u = 0; u < cfg.num_utterances; ++u) {
    const std::size_t s = static_cast<std::size_t>(u) % speakers.size();
    const auto& spk = speakers[s];
    const auto uid = utterance_id(spk, per_speaker_count[s]++);

    const int n_phones = phones_per_utt(rng);
    std::vector<std::int32_t> labels;
    int prev = -1;
    for (int k = 0; k < n_phones; ++k) {
      int p = phone_draw(rng);
      if (cfg.num_phones > 1)
        while (p == prev) p = phone_draw(rng);
      prev = p;
      const int len = duration(rng);
      labels.insert(labels.end(), static_cast<std::size_t>(len), p);
    }

    const auto& offset = out.truth.offsets.at(spk);
    FrameMatrix frames(static_cast<Eigen::Index>(labels.size()), dim);
    for (std::size_t t = 0; t < labels.size(); ++t)
      for (int d = 0; d < dim; ++d)
        frames(static_cast<Eigen::Index>(t), d) = static_cast<float>(
            out.truth.phone_means(labels[t], d) + offset(d) +
            cfg.emission_noise_scale * normal(rng));

    records.push_back({uid, spk, speaker_language[s], labels.size()});
    out.features.add(uid, std::move(frames));
    out.labels.add(uid, std::move(labels));
  }
  out.manifest = Manifest(std::move(records), SplitTag::kTrain);
  return out;
}

CorpusSplit split_held_out(const SyntheticCorpus& corpus, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error("test_fraction must lie in (0, 1)");
  const int stride = std::max(2, static_cast<int>(std::lround(1.0 / test_fraction)));
  CorpusSplit split;
  split.train.truth = corpus.truth;
  split.test.truth = corpus.truth;
  split.train.labels.set_num_classes(corpus.labels.num_classes());
  split.test.labels.set_num_classes(corpus.labels.num_classes());
  std::vector<UtteranceRecord> train, test;
  std::map<std::string, int> ordinal;
  for (const auto& r : corpus.manifest.records()) {
    const int k = ordinal[r.speaker_id]++;
    const bool held_out = (k % stride) == stride - 1;
    auto& part = held_out ? split.test : split.train;
    (held_out ? test : train).push_back(r);
    part.features.add(r.utterance_id, corpus.features.at(r.utterance_id));
    part.labels.add(r.utterance_id, corpus.labels.at(r.utterance_id));
  }
  split.train.manifest = Manifest(std::move(train), SplitTag::kTrain);
  split.test.manifest = Manifest(std::move(test), SplitTag::kTest);
  return split;
}

}  // namespace zrs
