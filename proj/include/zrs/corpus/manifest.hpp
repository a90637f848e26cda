#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "zrs/common.hpp"

namespace zrs {

struct UtteranceRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string language_id;
  std::size_t num_frames = 0;

  bool operator==(const UtteranceRecord&) const = default;
};

enum class SplitTag { kTrain, kTest };

std::string to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& s);

class Manifest {
 public:
  Manifest() = default;
  Manifest(std::vector<UtteranceRecord> records, SplitTag split);

  const std::vector<UtteranceRecord>& records() const { return records_; }
  SplitTag split() const { return split_; }
  std::size_t size() const { return records_.size(); }

  /// nullptr when the utterance is not listed.
  const UtteranceRecord* find(const std::string& utterance_id) const;
  const UtteranceRecord& at(const std::string& utterance_id) const;

  /// Distinct ids in first-appearance order.
  std::vector<std::string> languages() const;
  std::vector<std::string> speakers() const;

  /// Records of one language, manifest order preserved.
  Manifest filter_language(const std::string& language) const;

  /// Throws on empty manifests, duplicate ids, zero-length utterances or
  /// empty speaker ids.
  void validate() const;

  bool operator==(const Manifest& o) const {
    return split_ == o.split_ && records_ == o.records_;
  }

 private:
  void reindex();

  std::vector<UtteranceRecord> records_;
  SplitTag split_ = SplitTag::kTrain;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Line-delimited JSON; one object per utterance with keys utt, spk, lang,
/// frames.
void write_manifest(const Manifest& manifest, std::ostream& out);
Manifest read_manifest(std::istream& in, SplitTag split);

void save_manifest(const Manifest& manifest, const std::string& path);
Manifest load_manifest(const std::string& path, SplitTag split);

}  // namespace zrs
