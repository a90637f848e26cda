#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "zrs/abx/dtw.hpp"
#include "zrs/corpus/archive.hpp"
#include "zrs/corpus/manifest.hpp"

namespace zrs {

/// Frames [start_frame, end_frame) of one utterance.
struct PhoneSegment {
  std::string utterance_id;
  int start_frame = 0;
  int end_frame = 0;
  std::string phone;
  std::string speaker_id;
  std::string language_id;

  bool operator==(const PhoneSegment&) const = default;
};

/// Maximal runs of one label in every utterance of `labels`.
std::vector<PhoneSegment> segments_from_labels(const Manifest& manifest,
                                               const LabelArchive& labels);

enum class AbxCondition { kWithin, kAcross };

std::string to_string(AbxCondition c);
AbxCondition abx_condition_from_string(const std::string& s);

/// A and B share a speaker and differ in phone. X has the phone of A when
/// `x_on_a_side`, otherwise that of B.
struct AbxTriplet {
  PhoneSegment a;
  PhoneSegment b;
  PhoneSegment x;
  bool x_on_a_side = true;

  bool operator==(const AbxTriplet&) const = default;
};

struct TripletSet {
  std::vector<AbxTriplet> triplets;
  /// Cells (phone pair x speaker combination) with no eligible triplet.
  std::size_t skipped_cells = 0;
};

/// For every ordered phone pair (x, y) and speaker combination of each
/// language, samples up to max_per_cell distinct triplets with A and X of
/// phone x and B of phone y.
TripletSet build_triplets(const std::vector<PhoneSegment>& segments,
                          AbxCondition condition, std::size_t max_per_cell,
                          std::uint64_t seed);

using RepresentationLookup = std::function<FrameMatrix(const PhoneSegment&)>;

/// Slices segments out of an archive; throws naming the missing segment.
RepresentationLookup archive_lookup(const FeatureArchive& archive);

struct AbxCell {
  std::string language;
  AbxCondition condition = AbxCondition::kWithin;
  std::string phone_x;
  std::string phone_y;
  std::string speaker_ab;
  std::string speaker_x;
  std::size_t triplets = 0;
  double error = 0;
};

struct AbxSummary {
  std::string language;
  AbxCondition condition = AbxCondition::kWithin;
  double error_rate = 0;
  std::size_t cells = 0;
  std::size_t triplets = 0;
};

struct AbxReport {
  std::vector<AbxSummary> summaries;
  std::vector<AbxCell> cells;

  /// Error of one (language, condition); throws when absent.
  double error(const std::string& language, AbxCondition condition) const;
  /// Unweighted mean of the per-language errors of a condition.
  double mean_error(AbxCondition condition) const;
};

void to_json(nlohmann::json& j, const AbxSummary& s);
void to_json(nlohmann::json& j, const AbxReport& r);
void write_cells_csv(const AbxReport& report, std::ostream& out);

/// Ties count as half an error. Cell error is the mean over its triplets;
/// the (language, condition) error is the unweighted mean over cells.
AbxReport score(const std::vector<AbxTriplet>& triplets,
                const RepresentationLookup& lookup,
                FrameMetric metric = FrameMetric::kCosine);

/// Triplets for both conditions then scoring, per language.
AbxReport evaluate_abx(const std::vector<PhoneSegment>& segments,
                       const FeatureArchive& representation, std::size_t max_per_cell,
                       std::uint64_t seed, FrameMetric metric = FrameMetric::kCosine);

}  // namespace zrs
