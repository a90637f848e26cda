#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "zrs/corpus/archive.hpp"
#include "zrs/corpus/manifest.hpp"
#include "zrs/fhvae/model.hpp"

namespace zrs {

/// Posterior means of both latents for every frame of an utterance
/// (shift-1, match-length segmentation).
struct LatentExtract {
  Matrix z1;  // T x z1_dim
  Matrix z2;  // T x z2_dim
};

LatentExtract extract_latents(const FhvaeModel& model, const FrameMatrix& utterance);
FrameMatrix extract_z1(const FhvaeModel& model, const FrameMatrix& utterance);

/// Conjugate MAP estimate of mu2 from the posterior means of q(z2|x), one row
/// per segment: sum / (N + s2_z2 / s2_mu2). Zero for N = 0.
Vector map_svector(const Matrix& z2_means, double sigma2_z2, double sigma2_mu2);
/// Same, encoding `segments` (N x l*D) first.
Vector map_svector(const FhvaeModel& model, const Matrix& segments);
/// MAP s-vector of one utterance treated as its own sequence.
Vector map_svector(const FhvaeModel& model, const FrameMatrix& utterance);

/// z2 - mu2_i + mu2_star.
Vector unify_svector(const Vector& z2, const Vector& mu2_i, const Vector& mu2_star);

/// Shift applied to z2 before decoding: from the source sequence's s-vector
/// to the target's.
struct Unification {
  Vector source;  // mu2_i
  Vector target;  // mu2_star
};

/// Decoder mean for every frame. Without unification this is the plain
/// reconstruction; with it, z2 is shifted per unify_svector first.
FrameMatrix reconstruct(const FhvaeModel& model, const FrameMatrix& utterance,
                        const std::optional<Unification>& unification = std::nullopt);
/// Unified reconstruction using the table s-vector of `sequence_id` as source.
FrameMatrix reconstruct(const FhvaeModel& model, const FrameMatrix& utterance,
                        const std::string& sequence_id, const Vector& mu2_star);

/// Candidate with the lowest score; ties go to the lexicographically
/// smallest id.
std::string select_representative(
    const std::vector<std::string>& candidates,
    const std::function<double(const std::string&)>& score);

// Archive-level helpers.

FeatureArchive extract_z1(const FhvaeModel& model, const FeatureArchive& archive);

/// Per-utterance MAP s-vectors, in archive order.
std::vector<std::pair<std::string, Vector>> utterance_svectors(
    const FhvaeModel& model, const FeatureArchive& archive);

/// Plain reconstruction for a training set; for a test set, unification
/// within each language toward the mean of that language's utterance
/// s-vectors.
FeatureArchive reconstruct_plain(const FhvaeModel& model, const FeatureArchive& archive,
                                 const Manifest& manifest);

/// Every utterance unified toward `mu2_star`. Training utterances use their
/// speaker's table entry as source, test utterances their MAP s-vector.
FeatureArchive reconstruct_unified(const FhvaeModel& model, const FeatureArchive& archive,
                                   const Manifest& manifest, const Vector& mu2_star);

}  // namespace zrs
