#include "zrs/corpus/manifest.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

namespace zrs {

std::string to_string(SplitTag tag) {
  return tag == SplitTag::kTrain ? "train" : "test";
}

SplitTag split_tag_from_string(const std::string& s) {
  if (s == "train") return SplitTag::kTrain;
  if (s == "test") return SplitTag::kTest;
  throw Error("unknown split tag '" + s + "'");
}

Manifest::Manifest(std::vector<UtteranceRecord> records, SplitTag split)
    : records_(std::move(records)), split_(split) {
  reindex();
}

void Manifest::reindex() {
  index_.clear();
  for (std::size_t i = 0; i < records_.size(); ++i)
    index_.emplace(records_[i].utterance_id, i);
}

const UtteranceRecord* Manifest::find(const std::string& utterance_id) const {
  auto it = index_.find(utterance_id);
  return it == index_.end() ? nullptr : &records_[it->second];
}

const UtteranceRecord& Manifest::at(const std::string& utterance_id) const {
  const auto* r = find(utterance_id);
  if (!r) throw Error("utterance '" + utterance_id + "' not in manifest");
  return *r;
}

std::vector<std::string> Manifest::languages() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records_)
    if (seen.insert(r.language_id).second) out.push_back(r.language_id);
  return out;
}

std::vector<std::string> Manifest::speakers() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records_)
    if (seen.insert(r.speaker_id).second) out.push_back(r.speaker_id);
  return out;
}

Manifest Manifest::filter_language(const std::string& language) const {
  std::vector<UtteranceRecord> kept;
  for (const auto& r : records_)
    if (r.language_id == language) kept.push_back(r);
  return Manifest(std::move(kept), split_);
}

void Manifest::validate() const {
  if (records_.empty()) throw Error("manifest has no records");
  std::set<std::string> ids;
  for (const auto& r : records_) {
    if (r.utterance_id.empty()) throw Error("empty utterance id in manifest");
    if (!ids.insert(r.utterance_id).second)
      throw Error("duplicate utterance id '" + r.utterance_id + "'");
    if (r.num_frames < 1)
      throw Error("utterance '" + r.utterance_id + "' has no frames");
    if (r.speaker_id.empty())
      throw Error("utterance '" + r.utterance_id + "' has empty speaker id");
  }
}

void write_manifest(const Manifest& manifest, std::ostream& out) {
  for (const auto& r : manifest.records()) {
    nlohmann::ordered_json j;
    j["utt"] = r.utterance_id;
    j["spk"] = r.speaker_id;
    j["lang"] = r.language_id;
    j["frames"] = r.num_frames;
    out << j.dump() << '\n';
  }
}

Manifest read_manifest(std::istream& in, SplitTag split) {
  std::vector<UtteranceRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      UtteranceRecord r;
      r.utterance_id = j.at("utt").get<std::string>();
      r.speaker_id = j.at("spk").get<std::string>();
      r.language_id = j.at("lang").get<std::string>();
      r.num_frames = j.at("frames").get<std::size_t>();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error("manifest line " + std::to_string(line_no) + ": " +
                  e.what());
    }
  }
  Manifest m(std::move(records), split);
  m.validate();
  return m;
}

void save_manifest(const Manifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_manifest(manifest, out);
}

Manifest load_manifest(const std::string& path, SplitTag split) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_manifest(in, split);
}

}  // namespace zrs
