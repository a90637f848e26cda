#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zrs/common.hpp"
#include "zrs/corpus/manifest.hpp"

namespace zrs {

class ArchiveError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kUnsupportedVersion,
    kTruncated,
    kIndexMismatch,
    kDuplicateId,
    kDimensionMismatch,
    kEmpty,
    kLabelRange,
  };

  ArchiveError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Ordered map utterance id -> frame matrix; all entries share one width.
class FeatureArchive {
 public:
  using Entry = std::pair<std::string, FrameMatrix>;

  /// Throws kDuplicateId or kDimensionMismatch.
  void add(std::string id, FrameMatrix frames);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  /// Feature width; 0 while empty.
  std::size_t dim() const { return dim_; }
  std::size_t total_frames() const;

  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  const FrameMatrix& at(const std::string& id) const;

  bool operator==(const FeatureArchive& o) const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
};

/// Integer frame labels per utterance, values in [0, num_classes).
class LabelArchive {
 public:
  using Entry = std::pair<std::string, std::vector<std::int32_t>>;

  LabelArchive() = default;
  explicit LabelArchive(int num_classes) : num_classes_(num_classes) {}

  void add(std::string id, std::vector<std::int32_t> labels);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& id) const { return index_.count(id) > 0; }
  const std::vector<std::int32_t>& at(const std::string& id) const;

  /// Declared K. Reading an archive sets it to max label + 1.
  int num_classes() const { return num_classes_; }
  void set_num_classes(int k) { num_classes_ = k; }

  bool operator==(const LabelArchive& o) const {
    return entries_ == o.entries_;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  int num_classes_ = 0;
};

/// ZRFA container: "ZRFA", u32 version, u32 count, index records
/// (u16 id length, id bytes, u32 rows, u32 cols, u64 payload offset), then
/// row-major little-endian f32 matrices. Returns bytes written.
std::size_t write_archive(const FeatureArchive& archive, std::ostream& out);
FeatureArchive read_archive(std::istream& in);

/// ZRLA: same layout, cols = 1 and i32 payload.
std::size_t write_labels(const LabelArchive& labels, std::ostream& out);
LabelArchive read_labels(std::istream& in);

void save_archive(const FeatureArchive& archive, const std::string& path);
FeatureArchive load_archive(const std::string& path);
void save_labels(const LabelArchive& labels, const std::string& path);
LabelArchive load_labels(const std::string& path);

/// Every manifest utterance has features with the listed frame count and,
/// when given, labels of the same length within range. Throws on failure.
void check_consistency(const Manifest& manifest, const FeatureArchive& features,
                       const LabelArchive* labels = nullptr);

}  // namespace zrs
