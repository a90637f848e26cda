#include "zrs/fhvae/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <spdlog/spdlog.h>

#include "zrs/frontend/features.hpp"
#include "zrs/nn/adam.hpp"
#include "zrs/nn/ops.hpp"

namespace zrs {

std::string sequence_key(const UtteranceRecord& record, SplitTag split) {
  return split == SplitTag::kTrain ? record.speaker_id : record.utterance_id;
}

Matrix FhvaeTrainingData::gather(const std::vector<SegmentRef>& refs,
                                 std::size_t begin, std::size_t end,
                                 std::vector<int>* sequence_index) const {
  const int l = segment_length;
  const int D = input_dim;
  Matrix out(static_cast<Eigen::Index>(end - begin), l * D);
  if (sequence_index) sequence_index->clear();
  for (std::size_t k = begin; k < end; ++k) {
    const auto& ref = refs[k];
    const auto& u = utterances[static_cast<std::size_t>(ref.utterance)];
    const auto r = static_cast<Eigen::Index>(k - begin);
    for (int t = 0; t < l; ++t)
      out.block(r, t * D, 1, D) = u.frames.row(ref.start + t);
    if (sequence_index) sequence_index->push_back(u.sequence);
  }
  return out;
}

FhvaeTrainingData prepare_training_data(const FhvaeConfig& cfg,
                                        const FeatureArchive& archive,
                                        const Manifest& manifest) {
  cfg.validate();
  if (archive.empty()) throw Error("fhvae: empty training archive");
  FhvaeTrainingData data;
  data.input_dim = static_cast<int>(archive.dim());
  data.segment_length = cfg.segment_length;
  const int l = cfg.segment_length;

  std::unordered_map<std::string, int> seq_of;
  for (const auto& [id, frames] : archive.entries()) {
    const auto* rec = manifest.find(id);
    if (!rec) throw Error("fhvae: utterance '" + id + "' missing from manifest");
    const auto key = sequence_key(*rec, manifest.split());
    auto [it, inserted] = seq_of.emplace(key, static_cast<int>(data.sequence_ids.size()));
    if (inserted) {
      data.sequence_ids.push_back(key);
      data.segment_counts.push_back(0);
    }
    FhvaeTrainingData::Utterance u;
    u.sequence = it->second;
    if (frames.rows() >= l) {
      u.frames = to_matrix(frames);
    } else {
      // Short utterance: pad out to l frames so it still yields a segment.
      const auto T = frames.rows();
      const int front = front_padding(l);
      u.frames.resize(T + front_padding(l) + back_padding(l), frames.cols());
      for (Eigen::Index t = 0; t < u.frames.rows(); ++t) {
        const auto src = std::clamp<Eigen::Index>(t - front, 0, T - 1);
        u.frames.row(t) = frames.row(src).cast<double>();
      }
    }
    data.utterances.push_back(std::move(u));
  }
  if (data.sequence_ids.size() < 2)
    throw Error("fhvae: training needs at least 2 sequences");

  const int n_utt = static_cast<int>(data.utterances.size());
  std::vector<int> order(static_cast<std::size_t>(n_utt));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(mix_seed(cfg.seed, 0xc0ffee));
  std::shuffle(order.begin(), order.end(), rng);
  int n_cv = static_cast<int>(std::lround(cfg.cv_fraction * n_utt));
  n_cv = std::clamp(n_cv, n_utt > 1 ? 1 : 0, std::max(0, n_utt - 1));
  std::vector<bool> is_cv(static_cast<std::size_t>(n_utt), false);
  for (int k = 0; k < n_cv; ++k) is_cv[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;

  const int shift = cfg.train_shift;
  for (int u = 0; u < n_utt; ++u) {
    const auto& utt = data.utterances[static_cast<std::size_t>(u)];
    const int T = static_cast<int>(utt.frames.rows());
    const int S = (T - l) / shift + 1;
    data.segment_counts[static_cast<std::size_t>(utt.sequence)] += S;
    auto& dest = is_cv[static_cast<std::size_t>(u)] ? data.cv : data.train;
    for (int s = 0; s < S; ++s) dest.push_back({u, s * shift});
  }
  return data;
}

FhvaeModel build_fhvae(const FhvaeConfig& cfg, const FhvaeTrainingData& data) {
  return FhvaeModel(cfg, data.input_dim, data.sequence_ids, data.segment_counts);
}

// Wall-clock time stays out of the file so reruns produce identical bytes.
void to_json(nlohmann::json& j, const EpochRecord& e) {
  j = {{"epoch", e.epoch}, {"train_bound", e.train_bound}, {"cv_bound", e.cv_bound}};
}

void to_json(nlohmann::json& j, const TrainHistory& h) {
  j = {{"epochs", h.epochs},
       {"best_epoch", h.best_epoch},
       {"best_cv_bound", h.best_cv_bound},
       {"stopped_early", h.stopped_early}};
}

double evaluate_bound(const FhvaeModel& model, const FhvaeTrainingData& data,
                      const std::vector<FhvaeTrainingData::SegmentRef>& refs,
                      std::uint64_t noise_seed) {
  if (refs.empty()) return 0.0;
  const auto& cfg = model.config();
  std::mt19937_64 rng(noise_seed);
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  double total = 0;
  std::vector<int> seq;
  for (std::size_t b = 0; b < refs.size(); b += B) {
    const auto e = std::min(refs.size(), b + B);
    Matrix x = data.gather(refs, b, e, &seq);
    auto noise = SegmentNoise::draw(cfg, x.rows(), rng);
    total += lower_bound(model, x, seq, noise).total * static_cast<double>(e - b);
  }
  return total / static_cast<double>(refs.size());
}

TrainHistory train_fhvae(FhvaeModel& model, const FhvaeTrainingData& data,
                         const EpochObserver& observer) {
  const auto& cfg = model.config();
  if (data.input_dim != model.input_dim() ||
      data.sequence_ids != model.sequences().ids)
    throw Error("train_fhvae: data does not match model");
  if (data.train.empty()) throw Error("train_fhvae: no training segments");

  auto& params = model.params();
  nn::AdamState adam;
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x7a1));
  const std::uint64_t cv_noise_seed = mix_seed(cfg.seed, 0xc5);
  const auto& cv_refs = data.cv.empty() ? data.train : data.cv;

  TrainHistory history;
  auto best = params.snapshot();
  double best_cv = -std::numeric_limits<double>::infinity();
  int non_improving = 0;
  auto order = data.train;
  const auto B = static_cast<std::size_t>(cfg.batch_size);
  std::vector<int> seq;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto good = params.snapshot();
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n = order.size();
    if (cfg.segments_per_epoch > 0)
      n = std::min(n, static_cast<std::size_t>(cfg.segments_per_epoch));

    double train_sum = 0;
    try {
      for (std::size_t b = 0; b < n; b += B) {
        const auto e = std::min(n, b + B);
        Matrix x = data.gather(order, b, e, &seq);
        auto noise = SegmentNoise::draw(cfg, x.rows(), rng);
        nn::Graph g;
        auto lb = lower_bound(g, model, x, seq, noise);
        nn::Var loss = nn::neg(nn::mean(lb.total));
        const double bound = -loss.scalar();
        if (!std::isfinite(bound)) throw DivergenceError("divergence detected: non-finite lower bound");
        params.zero_grad();
        g.backward(loss);
        if (cfg.clip_norm > 0) params.clip_grad_norm(cfg.clip_norm);
        nn::adam_step(params, adam, cfg.adam);
        train_sum += bound * static_cast<double>(e - b);
      }
    } catch (const DivergenceError&) {
      params.restore(good);
      spdlog::error("fhvae: divergence in epoch {}; restored last good parameters", epoch);
      throw;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_bound = train_sum / static_cast<double>(n);
    rec.cv_bound = evaluate_bound(model, data, cv_refs, cv_noise_seed);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!std::isfinite(rec.cv_bound)) {
      params.restore(good);
      throw DivergenceError("divergence detected: non-finite CV bound");
    }
    history.epochs.push_back(rec);
    spdlog::info("fhvae epoch {}: train {:.4f} cv {:.4f} ({:.1f}s)", epoch,
                 rec.train_bound, rec.cv_bound, rec.seconds);
    if (observer) observer(rec);

    if (rec.cv_bound > best_cv) {
      best_cv = rec.cv_bound;
      best = params.snapshot();
      history.best_epoch = epoch;
      non_improving = 0;
    } else if (++non_improving >= std::max(cfg.patience, 1)) {
      history.stopped_early = true;
      break;
    }
  }
  params.restore(best);
  history.best_cv_bound = best_cv;
  return history;
}

}  // namespace zrs
