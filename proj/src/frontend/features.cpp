#include "zrs/frontend/features.hpp"

#include <map>

namespace zrs {

namespace {

constexpr int kDeltaWindow = 2;

Matrix regression_deltas(const Matrix& x) {
  const Eigen::Index T = x.rows();
  double denom = 0.0;
  for (int k = 1; k <= kDeltaWindow; ++k) denom += 2.0 * k * k;
  Matrix d = Matrix::Zero(T, x.cols());
  for (Eigen::Index t = 0; t < T; ++t)
    for (int k = 1; k <= kDeltaWindow; ++k) {
      const Eigen::Index fwd = std::min<Eigen::Index>(t + k, T - 1);
      const Eigen::Index back = std::max<Eigen::Index>(t - k, 0);
      d.row(t) += k * (x.row(fwd) - x.row(back));
    }
  return d / denom;
}

}  // namespace

FrameMatrix add_deltas(const FrameMatrix& f) {
  if (f.rows() == 0) throw Error("add_deltas: empty input");
  const Matrix x = to_matrix(f);
  const Matrix d1 = regression_deltas(x);
  const Matrix d2 = regression_deltas(d1);
  Matrix out(x.rows(), 3 * x.cols());
  out << x, d1, d2;
  return to_frames(out);
}

FeatureArchive add_deltas(const FeatureArchive& archive) {
  FeatureArchive out;
  for (const auto& [id, f] : archive.entries()) out.add(id, add_deltas(f));
  return out;
}

FeatureArchive cmn_per_speaker(const FeatureArchive& archive,
                               const Manifest& manifest) {
  std::map<std::string, Vector> sums;
  std::map<std::string, std::size_t> counts;
  for (const auto& [id, f] : archive.entries()) {
    const auto* rec = manifest.find(id);
    if (!rec) throw Error("cmn: utterance '" + id + "' not in manifest");
    auto [it, fresh] = sums.try_emplace(rec->speaker_id, Vector::Zero(f.cols()));
    it->second += to_matrix(f).colwise().sum().transpose();
    counts[rec->speaker_id] += static_cast<std::size_t>(f.rows());
  }
  FeatureArchive out;
  for (const auto& [id, f] : archive.entries()) {
    const auto& spk = manifest.at(id).speaker_id;
    const RowVector mean =
        (sums.at(spk) / static_cast<double>(counts.at(spk))).transpose();
    Matrix x = to_matrix(f);
    x.rowwise() -= mean;
    out.add(id, to_frames(x));
  }
  return out;
}

int front_padding(int length) { return length / 2; }  // ceil((l-1)/2)
int back_padding(int length) { return (length - 1) / 2; }

FrameMatrix SegmentBatch::segment(std::size_t s) const {
  FrameMatrix out(length, dim);
  for (int t = 0; t < length; ++t)
    for (int d = 0; d < dim; ++d)
      out(t, d) = static_cast<float>(
          segments(static_cast<Eigen::Index>(s), t * dim + d));
  return out;
}

SegmentBatch segment_utterance(const FrameMatrix& f, int length, int shift,
                               PaddingMode mode,
                               const std::string& source_utterance) {
  if (length < 1 || shift < 1) throw Error("segment: need length, shift >= 1");
  const int T = static_cast<int>(f.rows());
  const int D = static_cast<int>(f.cols());
  if (T < 1) throw Error("segment: empty utterance");

  int front = 0;
  int count = 0;
  if (mode == PaddingMode::kMatchLength) {
    if (shift != 1) throw Error("segment: match-length padding requires shift 1");
    front = front_padding(length);
    count = T;
  } else {
    if (T < length)
      throw Error("segment: utterance has " + std::to_string(T) +
                  " frames, shorter than segment length " +
                  std::to_string(length));
    count = (T - length) / shift + 1;
  }

  SegmentBatch batch;
  batch.length = length;
  batch.dim = D;
  batch.source_utterance = source_utterance;
  batch.segments.resize(count, static_cast<Eigen::Index>(length) * D);
  batch.offsets.resize(static_cast<std::size_t>(count));
  for (int s = 0; s < count; ++s) {
    const int start = s * shift;
    batch.offsets[static_cast<std::size_t>(s)] = static_cast<std::size_t>(start);
    for (int t = 0; t < length; ++t) {
      const int src = std::clamp(start + t - front, 0, T - 1);
      for (int d = 0; d < D; ++d)
        batch.segments(s, t * D + d) = f(src, d);
    }
  }
  return batch;
}

}  // namespace zrs
