#include "zrs/corpus/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace zrs {

static_assert(std::endian::native == std::endian::little,
              "archive codec assumes a little-endian host");

void FeatureArchive::add(std::string id, FrameMatrix frames) {
  if (index_.count(id))
    throw ArchiveError(ArchiveError::Kind::kDuplicateId,
                       "duplicate utterance id '" + id + "'");
  const auto cols = static_cast<std::size_t>(frames.cols());
  if (!entries_.empty() && cols != dim_)
    throw ArchiveError(ArchiveError::Kind::kDimensionMismatch,
                       "dimension mismatch: '" + id + "' has " +
                           std::to_string(cols) + " columns, archive has " +
                           std::to_string(dim_));
  if (entries_.empty()) dim_ = cols;
  index_.emplace(id, entries_.size());
  entries_.emplace_back(std::move(id), std::move(frames));
}

std::size_t FeatureArchive::total_frames() const {
  std::size_t n = 0;
  for (const auto& [id, f] : entries_) n += static_cast<std::size_t>(f.rows());
  return n;
}

const FrameMatrix& FeatureArchive::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("no features for utterance '" + id + "'");
  return entries_[it->second].second;
}

bool FeatureArchive::operator==(const FeatureArchive& o) const {
  if (entries_.size() != o.entries_.size() || dim_ != o.dim_) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = o.entries_[i];
    if (a.first != b.first || a.second.rows() != b.second.rows() ||
        a.second.cols() != b.second.cols())
      return false;
    if (a.second.size() > 0 &&
        std::memcmp(a.second.data(), b.second.data(),
                    sizeof(float) * a.second.size()) != 0)
      return false;
  }
  return true;
}

void LabelArchive::add(std::string id, std::vector<std::int32_t> labels) {
  if (index_.count(id))
    throw ArchiveError(ArchiveError::Kind::kDuplicateId,
                       "duplicate utterance id '" + id + "'");
  for (auto v : labels) {
    if (v < 0)
      throw ArchiveError(ArchiveError::Kind::kLabelRange,
                         "negative label in '" + id + "'");
    if (num_classes_ > 0 && v >= num_classes_)
      throw ArchiveError(ArchiveError::Kind::kLabelRange,
                         "label " + std::to_string(v) + " out of range in '" +
                             id + "'");
  }
  index_.emplace(id, entries_.size());
  entries_.emplace_back(std::move(id), std::move(labels));
}

const std::vector<std::int32_t>& LabelArchive::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error("no labels for utterance '" + id + "'");
  return entries_[it->second].second;
}

namespace {

constexpr std::uint32_t kVersion = 1;

struct IndexRecord {
  std::string id;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::uint64_t offset = 0;
};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  template <typename T>
  T get(const char* what) {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(T)))
      throw ArchiveError(ArchiveError::Kind::kTruncated,
                         std::string("truncated payload while reading ") + what);
    return v;
  }

  std::string bytes(std::size_t n) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n)
      throw ArchiveError(ArchiveError::Kind::kTruncated,
                         "truncated payload in index");
    return s;
  }

  /// Reads up to n bytes; returns how many arrived.
  std::size_t read_some(char* dst, std::size_t n) {
    in_.read(dst, static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in_.gcount());
  }

  bool at_eof() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
};

std::size_t write_container(std::ostream& out, const char magic[4],
                            const std::vector<IndexRecord>& index,
                            const std::vector<const char*>& payloads,
                            std::size_t elem_size) {
  std::size_t written = 0;
  out.write(magic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(index.size()));
  written += 12;
  for (const auto& rec : index) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(rec.id.size()));
    out.write(rec.id.data(), static_cast<std::streamsize>(rec.id.size()));
    put<std::uint32_t>(out, rec.rows);
    put<std::uint32_t>(out, rec.cols);
    put<std::uint64_t>(out, rec.offset);
    written += 2 + rec.id.size() + 4 + 4 + 8;
  }
  for (std::size_t i = 0; i < index.size(); ++i) {
    const std::size_t n =
        static_cast<std::size_t>(index[i].rows) * index[i].cols * elem_size;
    out.write(payloads[i], static_cast<std::streamsize>(n));
    written += n;
  }
  if (!out) throw Error("archive write failed");
  return written;
}

std::vector<IndexRecord> read_index(Reader& r, const char magic[4]) {
  char got[4];
  if (r.read_some(got, 4) != 4 || std::memcmp(got, magic, 4) != 0)
    throw ArchiveError(ArchiveError::Kind::kBadMagic,
                       std::string("bad magic: expected ") +
                           std::string(magic, 4));
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion)
    throw ArchiveError(ArchiveError::Kind::kUnsupportedVersion,
                       "unsupported archive version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>("entry count");
  std::vector<IndexRecord> index(count);
  for (auto& rec : index) {
    const auto len = r.get<std::uint16_t>("id length");
    rec.id = r.bytes(len);
    rec.rows = r.get<std::uint32_t>("rows");
    rec.cols = r.get<std::uint32_t>("cols");
    rec.offset = r.get<std::uint64_t>("offset");
  }
  return index;
}

/// Reads one entry's payload of rows*cols elements. Offsets are relative to
/// the payload start and must be contiguous. A stream that stops exactly on a
/// row boundary, or carries bytes past the declared extent, disagrees with its
/// index; a stream that stops inside a row is truncated.
void read_payload(Reader& r, const IndexRecord& rec, std::uint64_t expected_offset,
                  std::size_t elem_size, char* dst) {
  if (rec.offset != expected_offset)
    throw ArchiveError(ArchiveError::Kind::kIndexMismatch,
                       "index/payload mismatch: entry '" + rec.id +
                           "' offset " + std::to_string(rec.offset) +
                           ", expected " + std::to_string(expected_offset));
  const std::size_t row_bytes = static_cast<std::size_t>(rec.cols) * elem_size;
  const std::size_t want = row_bytes * rec.rows;
  const std::size_t got = r.read_some(dst, want);
  if (got == want) return;
  if (row_bytes > 0 && got % row_bytes == 0)
    throw ArchiveError(ArchiveError::Kind::kIndexMismatch,
                       "index/payload mismatch: entry '" + rec.id +
                           "' declares " + std::to_string(rec.rows) +
                           " rows, payload holds " +
                           std::to_string(got / row_bytes));
  throw ArchiveError(ArchiveError::Kind::kTruncated,
                     "truncated payload in entry '" + rec.id + "'");
}

void expect_end(Reader& r) {
  if (!r.at_eof())
    throw ArchiveError(ArchiveError::Kind::kIndexMismatch,
                       "index/payload mismatch: trailing bytes after payload");
}

}  // namespace

std::size_t write_archive(const FeatureArchive& archive, std::ostream& out) {
  if (archive.empty())
    throw ArchiveError(ArchiveError::Kind::kEmpty, "archive is empty");
  std::vector<IndexRecord> index;
  std::vector<const char*> payloads;
  std::uint64_t offset = 0;
  for (const auto& [id, f] : archive.entries()) {
    if (id.size() > 0xffff) throw Error("utterance id too long: " + id);
    index.push_back({id, static_cast<std::uint32_t>(f.rows()),
                     static_cast<std::uint32_t>(f.cols()), offset});
    payloads.push_back(reinterpret_cast<const char*>(f.data()));
    offset += static_cast<std::uint64_t>(f.size()) * sizeof(float);
  }
  return write_container(out, "ZRFA", index, payloads, sizeof(float));
}

FeatureArchive read_archive(std::istream& in) {
  Reader r(in);
  auto index = read_index(r, "ZRFA");
  FeatureArchive archive;
  std::uint64_t offset = 0;
  for (const auto& rec : index) {
    FrameMatrix f(rec.rows, rec.cols);
    read_payload(r, rec, offset, sizeof(float),
                 reinterpret_cast<char*>(f.data()));
    offset += static_cast<std::uint64_t>(f.size()) * sizeof(float);
    archive.add(rec.id, std::move(f));
  }
  expect_end(r);
  return archive;
}

std::size_t write_labels(const LabelArchive& labels, std::ostream& out) {
  if (labels.size() == 0)
    throw ArchiveError(ArchiveError::Kind::kEmpty, "label archive is empty");
  std::vector<IndexRecord> index;
  std::vector<const char*> payloads;
  std::uint64_t offset = 0;
  for (const auto& [id, v] : labels.entries()) {
    index.push_back({id, static_cast<std::uint32_t>(v.size()), 1, offset});
    payloads.push_back(reinterpret_cast<const char*>(v.data()));
    offset += v.size() * sizeof(std::int32_t);
  }
  return write_container(out, "ZRLA", index, payloads, sizeof(std::int32_t));
}

LabelArchive read_labels(std::istream& in) {
  Reader r(in);
  auto index = read_index(r, "ZRLA");
  LabelArchive labels;
  std::uint64_t offset = 0;
  int max_label = -1;
  for (const auto& rec : index) {
    if (rec.cols != 1)
      throw ArchiveError(ArchiveError::Kind::kIndexMismatch,
                         "label entry '" + rec.id + "' has cols != 1");
    std::vector<std::int32_t> v(rec.rows);
    read_payload(r, rec, offset, sizeof(std::int32_t),
                 reinterpret_cast<char*>(v.data()));
    offset += v.size() * sizeof(std::int32_t);
    for (auto x : v) max_label = std::max(max_label, static_cast<int>(x));
    labels.add(rec.id, std::move(v));
  }
  expect_end(r);
  labels.set_num_classes(max_label + 1);
  return labels;
}

void save_archive(const FeatureArchive& archive, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_archive(archive, out);
}

FeatureArchive load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_archive(in);
}

void save_labels(const LabelArchive& labels, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_labels(labels, out);
}

LabelArchive load_labels(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read_labels(in);
}

void check_consistency(const Manifest& manifest, const FeatureArchive& features,
                       const LabelArchive* labels) {
  manifest.validate();
  for (const auto& r : manifest.records()) {
    const auto& f = features.at(r.utterance_id);
    if (static_cast<std::size_t>(f.rows()) != r.num_frames)
      throw Error("utterance '" + r.utterance_id + "': manifest lists " +
                  std::to_string(r.num_frames) + " frames, archive has " +
                  std::to_string(f.rows()));
    if (labels) {
      const auto& l = labels->at(r.utterance_id);
      if (l.size() != r.num_frames)
        throw Error("utterance '" + r.utterance_id +
                    "': label length differs from frame count");
      for (auto v : l)
        if (v < 0 || (labels->num_classes() > 0 && v >= labels->num_classes()))
          throw Error("utterance '" + r.utterance_id + "': label out of range");
    }
  }
}

}  // namespace zrs
