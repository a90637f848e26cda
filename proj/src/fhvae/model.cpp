#include "zrs/fhvae/model.hpp"

#include <cmath>

namespace zrs {

using nn::Graph;
using nn::Var;

int SVectorIndex::find(const std::string& id) const {
  auto it = lookup_.find(id);
  return it == lookup_.end() ? -1 : it->second;
}

void SVectorIndex::rebuild() {
  lookup_.clear();
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (!lookup_.emplace(ids[i], static_cast<int>(i)).second)
      throw Error("duplicate sequence id '" + ids[i] + "'");
}

FhvaeModel::FhvaeModel(const FhvaeConfig& cfg, int input_dim,
                       std::vector<std::string> sequence_ids,
                       std::vector<double> segment_counts)
    : cfg_(cfg), input_dim_(input_dim) {
  cfg_.validate();
  if (input_dim < 1) throw Error("fhvae: input_dim must be >= 1");
  if (sequence_ids.size() != segment_counts.size())
    throw Error("fhvae: sequence id / count length mismatch");
  index_.ids = std::move(sequence_ids);
  index_.segment_counts = std::move(segment_counts);
  index_.rebuild();
  std::mt19937_64 rng(mix_seed(cfg_.seed, 0x5eed));
  build(&rng);
}

FhvaeModel::FhvaeModel(const FhvaeConfig& cfg, int input_dim, SVectorIndex index,
                       nn::ParameterSet params)
    : cfg_(cfg), input_dim_(input_dim), index_(std::move(index)),
      params_(std::move(params)) {
  index_.rebuild();
  build(nullptr);
}

void FhvaeModel::build(std::mt19937_64* rng) {
  const int D = input_dim_;
  const int H = cfg_.hidden_dim;
  const int L = cfg_.num_layers;
  const int Z1 = cfg_.z1_dim;
  const int Z2 = cfg_.z2_dim;
  const int W = segment_width();
  const auto layers = static_cast<std::size_t>(L);

  auto dense = [&](const std::string& name, int in, int out) {
    return rng ? nn::Dense(params_, name, in, out, *rng) : nn::Dense::bind(params_, name);
  };

  if (cfg_.kind == EncoderKind::kLstm) {
    if (rng) {
      z2_rnn_ = nn::Lstm(params_, "enc_z2.rnn", D, H, L, *rng);
      z1_rnn_ = nn::Lstm(params_, "enc_z1.rnn", D + Z2, H, L, *rng);
      dec_rnn_ = nn::Lstm(params_, "dec.rnn", Z1 + Z2, H, L, *rng);
    } else {
      z2_rnn_ = nn::Lstm::bind(params_, "enc_z2.rnn", layers);
      z1_rnn_ = nn::Lstm::bind(params_, "enc_z1.rnn", layers);
      dec_rnn_ = nn::Lstm::bind(params_, "dec.rnn", layers);
    }
  } else {
    const std::vector<int> widths(layers, H);
    const auto act = nn::Activation::kTanh;
    if (rng) {
      z2_mlp_ = nn::Mlp(params_, "enc_z2.mlp", W, widths, act, false, *rng);
      z1_mlp_ = nn::Mlp(params_, "enc_z1.mlp", W + Z2, widths, act, false, *rng);
      dec_mlp_ = nn::Mlp(params_, "dec.mlp", Z1 + Z2, widths, act, false, *rng);
    } else {
      z2_mlp_ = nn::Mlp::bind(params_, "enc_z2.mlp", layers, act, false);
      z1_mlp_ = nn::Mlp::bind(params_, "enc_z1.mlp", layers, act, false);
      dec_mlp_ = nn::Mlp::bind(params_, "dec.mlp", layers, act, false);
    }
  }
  z2_mean_ = dense("enc_z2.mean", H, Z2);
  z2_logvar_ = dense("enc_z2.logvar", H, Z2);
  z1_mean_ = dense("enc_z1.mean", H, Z1);
  z1_logvar_ = dense("enc_z1.logvar", H, Z1);
  const int out = cfg_.kind == EncoderKind::kLstm ? D : W;
  x_mean_ = dense("dec.mean", H, out);
  x_logvar_ = dense("dec.logvar", H, out);

  if (rng) {
    table_ = &params_.add(
        "mu2_table", nn::Mat::Zero(static_cast<Eigen::Index>(index_.size()), Z2));
  } else {
    table_ = &params_.at("mu2_table");
  }
  if (table_->value.rows() != static_cast<Eigen::Index>(index_.size()) ||
      table_->value.cols() != Z2)
    throw Error("fhvae: s-vector table shape mismatch");
}

FhvaeModel FhvaeModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  const auto& h = ckpt.header;
  if (h.value("model", std::string()) != "fhvae")
    throw Error("checkpoint is not an FHVAE model");
  FhvaeConfig cfg = h.at("config").get<FhvaeConfig>();
  SVectorIndex index;
  index.ids = h.at("sequence_ids").get<std::vector<std::string>>();
  index.segment_counts = h.at("segment_counts").get<std::vector<double>>();
  return FhvaeModel(cfg, h.at("input_dim").get<int>(), std::move(index),
                    ckpt.to_parameters());
}

nn::Checkpoint FhvaeModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.header = {{"model", "fhvae"},
                 {"config", cfg_},
                 {"input_dim", input_dim_},
                 {"sequence_ids", index_.ids},
                 {"segment_counts", index_.segment_counts}};
  ckpt.add(params_);
  return ckpt;
}

Vector FhvaeModel::svector(const std::string& sequence_id) const {
  const int i = index_.find(sequence_id);
  if (i < 0) throw Error("no s-vector for sequence '" + sequence_id + "'");
  return table_->value.row(i).transpose();
}

nn::GaussianVars FhvaeModel::heads(Graph& g, Var h, const nn::Dense& mean,
                                   const nn::Dense& log_var) const {
  return {mean.forward(g, h),
          nn::clamp(log_var.forward(g, h), nn::kLogVarMin, nn::kLogVarMax)};
}

namespace {

std::vector<Var> frames_of(Var x, int length, int dim) {
  std::vector<Var> steps;
  steps.reserve(static_cast<std::size_t>(length));
  for (int t = 0; t < length; ++t) steps.push_back(nn::slice_cols(x, t * dim, dim));
  return steps;
}

}  // namespace

nn::GaussianVars FhvaeModel::encode_z2(Graph& g, Var x) const {
  if (x.cols() != segment_width()) throw Error("fhvae: segment width mismatch");
  Var h;
  if (cfg_.kind == EncoderKind::kLstm) {
    h = z2_rnn_.forward(g, frames_of(x, cfg_.segment_length, input_dim_)).back();
  } else {
    h = z2_mlp_.forward(g, x);
  }
  return heads(g, h, z2_mean_, z2_logvar_);
}

nn::GaussianVars FhvaeModel::encode_z1(Graph& g, Var x, Var z2) const {
  if (x.cols() != segment_width()) throw Error("fhvae: segment width mismatch");
  Var h;
  if (cfg_.kind == EncoderKind::kLstm) {
    auto steps = frames_of(x, cfg_.segment_length, input_dim_);
    for (auto& s : steps) s = nn::concat_cols({s, z2});
    h = z1_rnn_.forward(g, steps).back();
  } else {
    h = z1_mlp_.forward(g, nn::concat_cols({x, z2}));
  }
  return heads(g, h, z1_mean_, z1_logvar_);
}

nn::GaussianVars FhvaeModel::decode(Graph& g, Var z1, Var z2) const {
  Var z = nn::concat_cols({z1, z2});
  if (cfg_.kind == EncoderKind::kLstm) {
    const std::vector<Var> inputs(static_cast<std::size_t>(cfg_.segment_length), z);
    auto hs = dec_rnn_.forward(g, inputs);
    std::vector<Var> means, logvars;
    for (const auto& h : hs) {
      auto frame = heads(g, h, x_mean_, x_logvar_);
      means.push_back(frame.mean);
      logvars.push_back(frame.log_var);
    }
    return {nn::concat_cols(means), nn::concat_cols(logvars)};
  }
  return heads(g, dec_mlp_.forward(g, z), x_mean_, x_logvar_);
}

SegmentNoise SegmentNoise::draw(const FhvaeConfig& cfg, Eigen::Index batch,
                                std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  SegmentNoise s{nn::Mat(batch, cfg.z2_dim), nn::Mat(batch, cfg.z1_dim)};
  for (Eigen::Index k = 0; k < s.z2.size(); ++k) s.z2(k) = n(rng);
  for (Eigen::Index k = 0; k < s.z1.size(); ++k) s.z1(k) = n(rng);
  return s;
}

SegmentNoise SegmentNoise::zeros(const FhvaeConfig& cfg, Eigen::Index batch) {
  return {nn::Mat::Zero(batch, cfg.z2_dim), nn::Mat::Zero(batch, cfg.z1_dim)};
}

LowerBoundVars lower_bound(Graph& g, const FhvaeModel& model,
                           const Matrix& segments,
                           const std::vector<int>& sequence_index,
                           const SegmentNoise& noise) {
  const auto& cfg = model.config();
  const auto B = segments.rows();
  if (static_cast<Eigen::Index>(sequence_index.size()) != B)
    throw Error("lower_bound: one sequence index per segment required");
  const auto& seqs = model.sequences();
  for (int i : sequence_index)
    if (i < 0 || static_cast<std::size_t>(i) >= seqs.size())
      throw Error("lower_bound: sequence id not in s-vector table");

  Var x = g.constant(segments);
  Var table = model.table_var(g);
  Var mu2 = nn::gather_rows(table, sequence_index);

  auto qz2 = model.encode_z2(g, x);
  Var z2 = nn::reparameterize(qz2, noise.z2);
  auto qz1 = model.encode_z1(g, x, z2);
  Var z1 = nn::reparameterize(qz1, noise.z1);
  auto px = model.decode(g, z1, z2);

  LowerBoundVars t;
  t.reconstruction = nn::gaussian_log_prob_rows(x, px.mean, px.log_var);
  t.kl_z1 = nn::gaussian_kl_rows(qz1, g.constant(nn::Mat::Zero(B, cfg.z1_dim)),
                                 std::log(cfg.sigma2_z1));
  t.kl_z2 = nn::gaussian_kl_rows(qz2, mu2, std::log(cfg.sigma2_z2));

  nn::Mat inv_n(B, 1);
  for (Eigen::Index r = 0; r < B; ++r)
    inv_n(r, 0) = 1.0 / seqs.segment_counts[static_cast<std::size_t>(sequence_index[r])];
  Var log_p_mu2 = nn::gaussian_log_prob_rows(
      mu2, g.constant(nn::Mat::Zero(B, cfg.z2_dim)), std::log(cfg.sigma2_mu2));
  t.log_prior_mu2 = nn::mul(log_p_mu2, g.constant(inv_n));

  // log p(i|z2): softmax over the whole table of isotropic Gaussian
  // log-densities at the posterior mean of z2; shared constants cancel.
  Var logits = nn::scale(nn::sq_dist(qz2.mean, table), -0.5 / cfg.sigma2_z2);
  t.discriminative = nn::scale(nn::log_softmax_pick(logits, sequence_index), cfg.alpha);

  t.total = nn::add(nn::sub(nn::sub(t.reconstruction, t.kl_z1), t.kl_z2),
                    nn::add(t.log_prior_mu2, t.discriminative));
  return t;
}

LowerBoundTerms lower_bound(const FhvaeModel& model, const Matrix& segments,
                            const std::vector<int>& sequence_index,
                            const SegmentNoise& noise) {
  Graph g;
  auto v = lower_bound(g, model, segments, sequence_index, noise);
  auto m = [](Var x) { return x.value().mean(); };
  LowerBoundTerms t;
  t.total = m(v.total);
  t.reconstruction = m(v.reconstruction);
  t.kl_z1 = m(v.kl_z1);
  t.kl_z2 = m(v.kl_z2);
  t.log_prior_mu2 = m(v.log_prior_mu2);
  t.discriminative = m(v.discriminative);
  for (double d : {t.total, t.reconstruction, t.kl_z1, t.kl_z2, t.log_prior_mu2,
                   t.discriminative})
    if (!std::isfinite(d)) throw DivergenceError("lower_bound: non-finite term");
  return t;
}

}  // namespace zrs
