#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "zrs/common.hpp"
#include "zrs/corpus/archive.hpp"
#include "zrs/corpus/manifest.hpp"

namespace zrs {

/// Appends delta and delta-delta blocks (regression over +-2 frames, edges
/// replicated). Output width = 3 x input width.
FrameMatrix add_deltas(const FrameMatrix& f);
FeatureArchive add_deltas(const FeatureArchive& archive);

/// Subtracts each speaker's mean over all of that speaker's frames.
FeatureArchive cmn_per_speaker(const FeatureArchive& archive,
                               const Manifest& manifest);

enum class PaddingMode {
  kNone,         // S = floor((T - l) / shift) + 1
  kMatchLength,  // shift 1; pad ceil((l-1)/2) first frames, floor((l-1)/2) last
};

/// Fixed-length segments, flattened: row s holds frames [s*shift, s*shift+l)
/// of the (padded) utterance concatenated, so width = l * dim.
struct SegmentBatch {
  Matrix segments;
  int length = 0;
  int dim = 0;
  std::string source_utterance;
  std::vector<std::size_t> offsets;  // in padded-frame coordinates

  std::size_t size() const { return static_cast<std::size_t>(segments.rows()); }
  FrameMatrix segment(std::size_t s) const;
};

SegmentBatch segment_utterance(const FrameMatrix& f, int length, int shift,
                               PaddingMode mode,
                               const std::string& source_utterance = {});

/// Frames of front/back padding under kMatchLength.
int front_padding(int length);
int back_padding(int length);

}  // namespace zrs
