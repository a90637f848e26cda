#include "zrs/bnf/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "zrs/nn/ops.hpp"

namespace zrs {

void BnfConfig::validate() const {
  if (hidden_dims.empty()) throw Error("bnf: at least one hidden layer required");
  for (int h : hidden_dims)
    if (h < 1) throw Error("bnf: hidden widths must be >= 1");
  if (bottleneck_dim < 1) throw Error("bnf: bottleneck_dim must be >= 1");
  if (post_bottleneck_dim < 1) throw Error("bnf: post_bottleneck_dim must be >= 1");
  if (context_frames < 0) throw Error("bnf: context_frames must be >= 0");
  for (double w : task_weights)
    if (!(w >= 0) || !std::isfinite(w)) throw Error("bnf: task weights must be finite and >= 0");
  if (epochs < 0) throw Error("bnf: epochs must be >= 0");
  if (batch_size < 1) throw Error("bnf: batch_size must be >= 1");
  adam.validate();
}

void to_json(nlohmann::json& j, const BnfConfig& c) {
  j = {{"hidden_dims", c.hidden_dims},
       {"bottleneck_dim", c.bottleneck_dim},
       {"post_bottleneck_dim", c.post_bottleneck_dim},
       {"context_frames", c.context_frames},
       {"activation", nn::to_string(c.activation)},
       {"task_weights", c.task_weights},
       {"adam", c.adam},
       {"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, BnfConfig& c) {
  c = BnfConfig{};
  c.hidden_dims = j.value("hidden_dims", c.hidden_dims);
  c.bottleneck_dim = j.value("bottleneck_dim", c.bottleneck_dim);
  c.post_bottleneck_dim = j.value("post_bottleneck_dim", c.post_bottleneck_dim);
  c.context_frames = j.value("context_frames", c.context_frames);
  if (j.contains("activation"))
    c.activation = nn::activation_from_string(j.at("activation").get<std::string>());
  c.task_weights = j.value("task_weights", c.task_weights);
  if (j.contains("adam")) c.adam = j.at("adam").get<nn::AdamConfig>();
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
}

FrameMatrix splice(const FrameMatrix& f, int context) {
  if (context < 0) throw Error("splice: context must be >= 0");
  const auto T = f.rows();
  const auto D = f.cols();
  FrameMatrix out(T, (2 * context + 1) * D);
  if (T == 0) return out;
  for (Eigen::Index t = 0; t < T; ++t)
    for (int k = -context; k <= context; ++k) {
      const auto src = std::clamp<Eigen::Index>(t + k, 0, T - 1);
      out.block(t, (k + context) * D, 1, D) = f.row(src);
    }
  return out;
}

BnfNetwork::BnfNetwork(const BnfConfig& cfg, int input_dim,
                       std::vector<std::string> languages, std::vector<int> num_classes)
    : cfg_(cfg), input_dim_(input_dim), languages_(std::move(languages)),
      num_classes_(std::move(num_classes)) {
  cfg_.validate();
  if (input_dim < 1) throw Error("bnf: input_dim must be >= 1");
  if (languages_.empty() || languages_.size() != num_classes_.size())
    throw Error("bnf: one class count per language required");
  std::mt19937_64 rng(mix_seed(cfg_.seed, 0xb4f));
  trunk_ = nn::Mlp(params_, "trunk", spliced_dim(), cfg_.hidden_dims, cfg_.activation, false, rng);
  bottleneck_ = nn::Dense(params_, "bottleneck", cfg_.hidden_dims.back(), cfg_.bottleneck_dim, rng);
  post_ = nn::Dense(params_, "post", cfg_.bottleneck_dim, cfg_.post_bottleneck_dim, rng);
  for (std::size_t t = 0; t < languages_.size(); ++t) {
    if (num_classes_[t] < 1) throw Error("bnf: every head needs >= 1 class");
    heads_.emplace_back(params_, "head." + languages_[t], cfg_.post_bottleneck_dim,
                        num_classes_[t], rng);
  }
  mean_ = Vector::Zero(spliced_dim());
  stddev_ = Vector::Ones(spliced_dim());
}

BnfNetwork::BnfNetwork(const BnfConfig& cfg, int input_dim,
                       std::vector<std::string> languages, std::vector<int> num_classes,
                       nn::ParameterSet params, Vector mean, Vector stddev)
    : cfg_(cfg), input_dim_(input_dim), languages_(std::move(languages)),
      num_classes_(std::move(num_classes)), params_(std::move(params)),
      mean_(std::move(mean)), stddev_(std::move(stddev)) {
  bind();
}

void BnfNetwork::bind() {
  trunk_ = nn::Mlp::bind(params_, "trunk", cfg_.hidden_dims.size(), cfg_.activation, false);
  bottleneck_ = nn::Dense::bind(params_, "bottleneck");
  post_ = nn::Dense::bind(params_, "post");
  heads_.clear();
  for (const auto& l : languages_) heads_.push_back(nn::Dense::bind(params_, "head." + l));
}

BnfNetwork BnfNetwork::from_checkpoint(const nn::Checkpoint& ckpt) {
  const auto& h = ckpt.header;
  if (h.value("model", std::string()) != "bnf") throw Error("checkpoint is not a BNF network");
  auto params = ckpt.to_parameters();
  Vector mean = ckpt.tensor("input.mean").col(0);
  Vector stddev = ckpt.tensor("input.std").col(0);
  // Normalization tensors are not trainable; keep them out of the set.
  nn::ParameterSet trainable;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    if (p.name().rfind("input.", 0) != 0) trainable.add(p.name(), p.value);
  }
  return BnfNetwork(h.at("config").get<BnfConfig>(), h.at("input_dim").get<int>(),
                    h.at("languages").get<std::vector<std::string>>(),
                    h.at("num_classes").get<std::vector<int>>(), std::move(trainable),
                    std::move(mean), std::move(stddev));
}

nn::Checkpoint BnfNetwork::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.header = {{"model", "bnf"},
                 {"config", cfg_},
                 {"input_dim", input_dim_},
                 {"languages", languages_},
                 {"num_classes", num_classes_}};
  ckpt.add(params_);
  ckpt.tensors.emplace_back("input.mean", mean_);
  ckpt.tensors.emplace_back("input.std", stddev_);
  return ckpt;
}

void BnfNetwork::set_normalization(Vector mean, Vector stddev) {
  if (mean.size() != spliced_dim() || stddev.size() != spliced_dim())
    throw Error("bnf: normalization width mismatch");
  mean_ = std::move(mean);
  stddev_ = stddev.cwiseMax(1e-8);
}

Matrix BnfNetwork::normalize(const Matrix& spliced) const {
  if (spliced.cols() != spliced_dim()) throw Error("bnf: input dimension mismatch");
  return ((spliced.rowwise() - mean_.transpose()).array().rowwise() /
          stddev_.transpose().array())
      .matrix();
}

nn::Var BnfNetwork::trunk(nn::Graph& g, nn::Var x) const { return trunk_.forward(g, x); }

nn::Var BnfNetwork::bottleneck(nn::Graph& g, nn::Var x) const {
  return bottleneck_.forward(g, trunk(g, x));
}

nn::Var BnfNetwork::logits(nn::Graph& g, nn::Var bn, int task) const {
  if (task < 0 || static_cast<std::size_t>(task) >= heads_.size())
    throw Error("bnf: task index out of range");
  auto h = nn::activate(post_.forward(g, bn), cfg_.activation);
  return heads_[static_cast<std::size_t>(task)].forward(g, h);
}

Matrix BnfNetwork::posteriors(const FrameMatrix& utterance, int task) const {
  nn::Graph g;
  auto x = g.constant(normalize(to_matrix(splice(utterance, cfg_.context_frames))));
  return nn::softmax_rows(logits(g, bottleneck(g, x), task).value());
}

nn::Var multitask_loss(nn::Graph& g, const BnfNetwork& net,
                       const std::vector<BnfBatch>& batches) {
  const auto& w = net.config().task_weights;
  nn::Var total;
  bool first = true;
  for (const auto& b : batches) {
    const auto t = static_cast<std::size_t>(b.task);
    if (t >= net.languages().size()) throw Error("bnf: task index out of range");
    for (int y : b.labels)
      if (y < 0 || y >= net.num_classes()[t]) throw Error("bnf: label out of range");
    const double weight = w.empty() ? 1.0 : w.at(t);
    auto lg = net.logits(g, net.bottleneck(g, g.constant(b.inputs)), b.task);
    auto ce = nn::neg(nn::mean(nn::log_softmax_pick(lg, b.labels)));
    auto term = nn::scale(ce, weight);
    total = first ? term : nn::add(total, term);
    first = false;
  }
  if (first) throw Error("bnf: empty batch list");
  return total;
}

void to_json(nlohmann::json& j, const BnfEpoch& e) {
  j = {{"epoch", e.epoch}, {"loss", e.loss}, {"accuracy", e.accuracy}};
}

namespace {

struct TaskData {
  Matrix inputs;  // normalized spliced
  std::vector<int> labels;
};

}  // namespace

BnfResult train_bnf(const std::vector<BnfTask>& tasks, const BnfConfig& cfg) {
  cfg.validate();
  if (tasks.empty()) throw Error("bnf: no tasks");
  if (!cfg.task_weights.empty() && cfg.task_weights.size() != tasks.size())
    throw Error("bnf: one task weight per language required");

  const int D = static_cast<int>(tasks.front().features.dim());
  std::vector<std::string> languages;
  std::vector<int> classes;
  std::vector<Matrix> spliced(tasks.size());
  std::vector<std::vector<int>> labels(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& task = tasks[t];
    if (task.features.empty()) throw Error("bnf: language '" + task.language + "' has no data");
    if (static_cast<int>(task.features.dim()) != D) throw Error("bnf: feature widths differ across languages");
    languages.push_back(task.language);
    int k = task.labels.num_classes();
    std::vector<FrameMatrix> parts;
    std::size_t rows = 0;
    for (const auto& [id, f] : task.features.entries()) {
      const auto& lab = task.labels.at(id);
      if (static_cast<Eigen::Index>(lab.size()) != f.rows())
        throw Error("bnf: label count differs from frame count for '" + id + "'");
      for (auto y : lab) {
        if (y < 0) throw Error("bnf: label out of range");
        k = std::max(k, static_cast<int>(y) + 1);
        labels[t].push_back(y);
      }
      parts.push_back(splice(f, cfg.context_frames));
      rows += static_cast<std::size_t>(f.rows());
    }
    classes.push_back(k);
    auto& m = spliced[t];
    m.resize(static_cast<Eigen::Index>(rows), (2 * cfg.context_frames + 1) * D);
    Eigen::Index r = 0;
    for (const auto& p : parts) {
      m.middleRows(r, p.rows()) = p.cast<double>();
      r += p.rows();
    }
  }

  BnfNetwork net(cfg, D, languages, classes);
  {
    Eigen::Index n = 0;
    Vector sum = Vector::Zero(net.spliced_dim()), sq = Vector::Zero(net.spliced_dim());
    for (const auto& m : spliced) {
      sum += m.colwise().sum().transpose();
      sq += m.array().square().colwise().sum().matrix().transpose();
      n += m.rows();
    }
    const Vector mean = sum / static_cast<double>(n);
    const Vector var = (sq / static_cast<double>(n)).array() - mean.array().square();
    net.set_normalization(mean, var.cwiseMax(0.0).cwiseSqrt());
  }
  std::vector<TaskData> data(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    data[t].inputs = net.normalize(spliced[t]);
    data[t].labels = std::move(labels[t]);
    spliced[t].resize(0, 0);
  }

  auto& params = net.params();
  nn::AdamState adam;
  std::mt19937_64 rng(mix_seed(cfg.seed, 0xba7c4));
  BnfHistory history;
  const auto B = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Schedule: batch j of task t sits at (j + 0.5) / n_t on a common axis.
    std::vector<std::vector<std::size_t>> order(tasks.size());
    std::vector<std::tuple<double, std::size_t, std::size_t>> schedule;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      order[t].resize(data[t].labels.size());
      std::iota(order[t].begin(), order[t].end(), 0);
      std::shuffle(order[t].begin(), order[t].end(), rng);
      const std::size_t nb = (order[t].size() + B - 1) / B;
      for (std::size_t j = 0; j < nb; ++j)
        schedule.emplace_back((static_cast<double>(j) + 0.5) / static_cast<double>(nb), t, j);
    }
    std::sort(schedule.begin(), schedule.end());

    std::vector<double> loss_sum(tasks.size(), 0), correct(tasks.size(), 0);
    for (const auto& [_, t, j] : schedule) {
      const auto& d = data[t];
      const auto begin = j * B;
      const auto end = std::min(order[t].size(), begin + B);
      BnfBatch batch;
      batch.task = static_cast<int>(t);
      batch.inputs.resize(static_cast<Eigen::Index>(end - begin), d.inputs.cols());
      for (std::size_t k = begin; k < end; ++k) {
        batch.inputs.row(static_cast<Eigen::Index>(k - begin)) =
            d.inputs.row(static_cast<Eigen::Index>(order[t][k]));
        batch.labels.push_back(d.labels[order[t][k]]);
      }
      nn::Graph g;
      auto bn = net.bottleneck(g, g.constant(batch.inputs));
      auto lg = net.logits(g, bn, batch.task);
      auto ce = nn::neg(nn::mean(nn::log_softmax_pick(lg, batch.labels)));
      const double w = cfg.task_weights.empty() ? 1.0 : cfg.task_weights[t];
      auto loss = nn::scale(ce, w);
      const double ce_value = ce.scalar();
      if (!std::isfinite(ce_value)) throw DivergenceError("divergence detected: non-finite BNF loss");
      loss_sum[t] += ce_value * static_cast<double>(end - begin);
      for (Eigen::Index r = 0; r < lg.rows(); ++r) {
        Eigen::Index arg;
        lg.value().row(r).maxCoeff(&arg);
        if (arg == batch.labels[static_cast<std::size_t>(r)]) correct[t] += 1;
      }
      params.zero_grad();
      g.backward(loss);
      nn::adam_step(params, adam, cfg.adam);
    }
    BnfEpoch rec;
    rec.epoch = epoch;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      const double n = static_cast<double>(data[t].labels.size());
      rec.loss.push_back(loss_sum[t] / n);
      rec.accuracy.push_back(correct[t] / n);
    }
    spdlog::info("bnf epoch {}: loss {} acc {}", epoch, nlohmann::json(rec.loss).dump(),
                 nlohmann::json(rec.accuracy).dump());
    history.epochs.push_back(std::move(rec));
  }
  return {std::move(net), std::move(history)};
}

FrameMatrix extract_bnf(const BnfNetwork& net, const FrameMatrix& utterance) {
  if (utterance.cols() != net.input_dim()) throw Error("bnf: feature dimension mismatch");
  FrameMatrix out(utterance.rows(), net.config().bottleneck_dim);
  if (utterance.rows() == 0) return out;
  const Matrix x = net.normalize(to_matrix(splice(utterance, net.config().context_frames)));
  nn::Graph g;
  out = to_frames(net.bottleneck(g, g.constant(x)).value());
  return out;
}

FeatureArchive extract_bnf(const BnfNetwork& net, const FeatureArchive& archive) {
  FeatureArchive out;
  for (const auto& [id, f] : archive.entries()) out.add(id, extract_bnf(net, f));
  return out;
}

}  // namespace zrs
