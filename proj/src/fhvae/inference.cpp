#include "zrs/fhvae/inference.hpp"

#include <algorithm>
#include <map>

#include "zrs/fhvae/train.hpp"
#include "zrs/frontend/features.hpp"

namespace zrs {

namespace {

constexpr Eigen::Index kChunk = 512;

Matrix match_length_segments(const FhvaeModel& model, const FrameMatrix& f) {
  if (static_cast<int>(f.cols()) != model.input_dim())
    throw Error("fhvae: feature width does not match model input");
  return segment_utterance(f, model.config().segment_length, 1,
                           PaddingMode::kMatchLength)
      .segments;
}

Matrix z2_means(const FhvaeModel& model, const Matrix& segments) {
  Matrix out(segments.rows(), model.config().z2_dim);
  for (Eigen::Index b = 0; b < segments.rows(); b += kChunk) {
    const auto n = std::min(kChunk, segments.rows() - b);
    nn::Graph g;
    auto q = model.encode_z2(g, g.constant(segments.middleRows(b, n)));
    out.middleRows(b, n) = q.mean.value();
  }
  return out;
}

/// Decodes every segment at its posterior means, with z2 shifted by `delta`,
/// and folds the per-segment output back to one frame per input frame.
FrameMatrix decode_frames(const FhvaeModel& model, const Matrix& segments,
                          const std::optional<RowVector>& delta) {
  const auto& cfg = model.config();
  const int l = cfg.segment_length;
  const int D = model.input_dim();
  const auto S = segments.rows();
  Matrix frames = Matrix::Zero(S, D);
  Matrix padded_sum;
  Vector padded_count;
  if (cfg.overlap_average) {
    padded_sum = Matrix::Zero(S + l - 1, D);
    padded_count = Vector::Zero(S + l - 1);
  }
  for (Eigen::Index b = 0; b < S; b += kChunk) {
    const auto n = std::min(kChunk, S - b);
    nn::Graph g;
    auto x = g.constant(segments.middleRows(b, n));
    auto q2 = model.encode_z2(g, x);
    auto q1 = model.encode_z1(g, x, q2.mean);
    nn::Mat z2 = q2.mean.value();
    if (delta) z2.rowwise() += *delta;
    const nn::Mat dec = model.decode(g, q1.mean, g.constant(z2)).mean.value();
    if (cfg.overlap_average) {
      for (Eigen::Index s = 0; s < n; ++s)
        for (int t = 0; t < l; ++t) {
          padded_sum.row(b + s + t) += dec.block(s, t * D, 1, D);
          padded_count(b + s + t) += 1;
        }
    } else {
      const int center = l / 2;
      frames.middleRows(b, n) = dec.middleCols(center * D, D);
    }
  }
  if (cfg.overlap_average) {
    const int front = front_padding(l);
    for (Eigen::Index t = 0; t < S; ++t)
      frames.row(t) = padded_sum.row(t + front) / padded_count(t + front);
  }
  return to_frames(frames);
}

}  // namespace

LatentExtract extract_latents(const FhvaeModel& model, const FrameMatrix& utterance) {
  const Matrix segments = match_length_segments(model, utterance);
  LatentExtract out;
  out.z1.resize(segments.rows(), model.config().z1_dim);
  out.z2.resize(segments.rows(), model.config().z2_dim);
  for (Eigen::Index b = 0; b < segments.rows(); b += kChunk) {
    const auto n = std::min(kChunk, segments.rows() - b);
    nn::Graph g;
    auto x = g.constant(segments.middleRows(b, n));
    auto q2 = model.encode_z2(g, x);
    auto q1 = model.encode_z1(g, x, q2.mean);
    out.z2.middleRows(b, n) = q2.mean.value();
    out.z1.middleRows(b, n) = q1.mean.value();
  }
  return out;
}

FrameMatrix extract_z1(const FhvaeModel& model, const FrameMatrix& utterance) {
  return to_frames(extract_latents(model, utterance).z1);
}

Vector map_svector(const Matrix& z2_means, double sigma2_z2, double sigma2_mu2) {
  if (z2_means.rows() == 0) return Vector::Zero(z2_means.cols());
  const double denom = static_cast<double>(z2_means.rows()) + sigma2_z2 / sigma2_mu2;
  return z2_means.colwise().sum().transpose() / denom;
}

Vector map_svector(const FhvaeModel& model, const Matrix& segments) {
  if (segments.rows() == 0) return Vector::Zero(model.config().z2_dim);
  return map_svector(z2_means(model, segments), model.config().sigma2_z2,
                     model.config().sigma2_mu2);
}

Vector map_svector(const FhvaeModel& model, const FrameMatrix& utterance) {
  return map_svector(model, match_length_segments(model, utterance));
}

Vector unify_svector(const Vector& z2, const Vector& mu2_i, const Vector& mu2_star) {
  if (z2.size() != mu2_i.size() || z2.size() != mu2_star.size())
    throw Error("unify_svector: dimension mismatch");
  return z2 + (mu2_star - mu2_i);
}

FrameMatrix reconstruct(const FhvaeModel& model, const FrameMatrix& utterance,
                        const std::optional<Unification>& unification) {
  std::optional<RowVector> delta;
  if (unification) {
    const auto dim = model.config().z2_dim;
    if (unification->source.size() != dim || unification->target.size() != dim)
      throw Error("reconstruct: s-vector dimension mismatch");
    delta = (unification->target - unification->source).transpose();
  }
  return decode_frames(model, match_length_segments(model, utterance), delta);
}

FrameMatrix reconstruct(const FhvaeModel& model, const FrameMatrix& utterance,
                        const std::string& sequence_id, const Vector& mu2_star) {
  return reconstruct(model, utterance, Unification{model.svector(sequence_id), mu2_star});
}

std::string select_representative(
    const std::vector<std::string>& candidates,
    const std::function<double(const std::string&)>& score) {
  if (candidates.empty()) throw Error("select_representative: no candidates");
  auto sorted = candidates;
  std::sort(sorted.begin(), sorted.end());
  std::string best = sorted.front();
  double best_score = score(best);
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    const double s = score(sorted[k]);
    if (s < best_score) {
      best_score = s;
      best = sorted[k];
    }
  }
  return best;
}

FeatureArchive extract_z1(const FhvaeModel& model, const FeatureArchive& archive) {
  FeatureArchive out;
  for (const auto& [id, f] : archive.entries()) out.add(id, extract_z1(model, f));
  return out;
}

std::vector<std::pair<std::string, Vector>> utterance_svectors(
    const FhvaeModel& model, const FeatureArchive& archive) {
  std::vector<std::pair<std::string, Vector>> out;
  for (const auto& [id, f] : archive.entries()) out.emplace_back(id, map_svector(model, f));
  return out;
}

FeatureArchive reconstruct_plain(const FhvaeModel& model, const FeatureArchive& archive,
                                 const Manifest& manifest) {
  FeatureArchive out;
  if (manifest.split() == SplitTag::kTrain) {
    for (const auto& [id, f] : archive.entries()) out.add(id, reconstruct(model, f));
    return out;
  }
  const auto svecs = utterance_svectors(model, archive);
  std::map<std::string, std::pair<Vector, int>> per_language;
  for (const auto& [id, v] : svecs) {
    auto& acc = per_language[manifest.at(id).language_id];
    if (acc.second == 0) acc.first = Vector::Zero(v.size());
    acc.first += v;
    acc.second += 1;
  }
  for (std::size_t k = 0; k < svecs.size(); ++k) {
    const auto& id = svecs[k].first;
    const auto& acc = per_language.at(manifest.at(id).language_id);
    const Vector target = acc.first / acc.second;
    out.add(id, reconstruct(model, archive.at(id), Unification{svecs[k].second, target}));
  }
  return out;
}

FeatureArchive reconstruct_unified(const FhvaeModel& model, const FeatureArchive& archive,
                                   const Manifest& manifest, const Vector& mu2_star) {
  FeatureArchive out;
  for (const auto& [id, f] : archive.entries()) {
    const auto& rec = manifest.at(id);
    Vector source;
    if (manifest.split() == SplitTag::kTrain) {
      source = model.svector(sequence_key(rec, SplitTag::kTrain));
    } else {
      source = map_svector(model, f);
    }
    out.add(id, reconstruct(model, f, Unification{source, mu2_star}));
  }
  return out;
}

}  // namespace zrs
