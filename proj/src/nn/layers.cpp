#include "zrs/nn/layers.hpp"

#include <cmath>

namespace zrs::nn {

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "tanh") return Activation::kTanh;
  if (s == "sigmoid") return Activation::kSigmoid;
  throw Error("unknown activation '" + s + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kSigmoid: return "sigmoid";
  }
  return "linear";
}

Var activate(Var x, Activation a) {
  switch (a) {
    case Activation::kTanh: return tanh(x);
    case Activation::kSigmoid: return sigmoid(x);
    case Activation::kLinear: break;
  }
  return x;
}

Mat activate(const Mat& x, Activation a) {
  switch (a) {
    case Activation::kTanh: return x.array().tanh();
    case Activation::kSigmoid: return (1.0 + (-x.array()).exp()).inverse();
    case Activation::kLinear: break;
  }
  return x;
}

Mat xavier(int rows, int cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / (rows + cols));
  std::uniform_real_distribution<double> u(-limit, limit);
  Mat w(rows, cols);
  for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = u(rng);
  return w;
}

Dense::Dense(ParameterSet& params, const std::string& name, int in, int out,
             std::mt19937_64& rng)
    : weight_(&params.add(name + ".W", xavier(in, out, rng))),
      bias_(&params.add(name + ".b", Mat::Zero(1, out))) {}

Dense Dense::bind(ParameterSet& params, const std::string& name) {
  Dense d;
  d.weight_ = &params.at(name + ".W");
  d.bias_ = &params.at(name + ".b");
  return d;
}

Var Dense::forward(Graph& g, Var x) const {
  return add_row(matmul(x, g.parameter(*weight_)), g.parameter(*bias_));
}

Mat Dense::forward(const Mat& x) const {
  Mat y = x * weight_->value;
  y.rowwise() += bias_->value.row(0);
  return y;
}

Mlp::Mlp(ParameterSet& params, const std::string& name, int in,
         const std::vector<int>& widths, Activation activation,
         bool linear_output, std::mt19937_64& rng)
    : activation_(activation), linear_output_(linear_output) {
  int prev = in;
  for (std::size_t k = 0; k < widths.size(); ++k) {
    layers_.emplace_back(params, name + "." + std::to_string(k), prev, widths[k], rng);
    prev = widths[k];
  }
}

Mlp Mlp::bind(ParameterSet& params, const std::string& name,
              std::size_t num_layers, Activation activation, bool linear_output) {
  Mlp m;
  m.activation_ = activation;
  m.linear_output_ = linear_output;
  for (std::size_t k = 0; k < num_layers; ++k)
    m.layers_.push_back(Dense::bind(params, name + "." + std::to_string(k)));
  return m;
}

Var Mlp::forward(Graph& g, Var x) const {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    x = layers_[k].forward(g, x);
    const bool last = k + 1 == layers_.size();
    if (!(last && linear_output_)) x = activate(x, activation_);
  }
  return x;
}

LstmLayer::LstmLayer(ParameterSet& params, const std::string& name, int in,
                     int hidden, std::mt19937_64& rng) {
  Mat wx(in, 4 * hidden);
  Mat wh(hidden, 4 * hidden);
  for (int k = 0; k < 4; ++k) {
    wx.middleCols(k * hidden, hidden) = xavier(in, hidden, rng);
    wh.middleCols(k * hidden, hidden) = xavier(hidden, hidden, rng);
  }
  Mat b = Mat::Zero(1, 4 * hidden);
  b.middleCols(hidden, hidden).setOnes();  // forget gate bias
  wx_ = &params.add(name + ".Wx", std::move(wx));
  wh_ = &params.add(name + ".Wh", std::move(wh));
  b_ = &params.add(name + ".b", std::move(b));
}

LstmLayer LstmLayer::bind(ParameterSet& params, const std::string& name) {
  LstmLayer l;
  l.wx_ = &params.at(name + ".Wx");
  l.wh_ = &params.at(name + ".Wh");
  l.b_ = &params.at(name + ".b");
  return l;
}

LstmLayer::State LstmLayer::zero_state(Graph& g, Eigen::Index batch) const {
  const int h = hidden_dim();
  return {g.constant(Mat::Zero(batch, h)), g.constant(Mat::Zero(batch, h))};
}

LstmLayer::State LstmLayer::step(Graph& g, Var x, const State& prev) const {
  const int h = hidden_dim();
  Var gates = add_row(add(matmul(x, g.parameter(*wx_)),
                          matmul(prev.h, g.parameter(*wh_))),
                      g.parameter(*b_));
  Var i = sigmoid(slice_cols(gates, 0, h));
  Var f = sigmoid(slice_cols(gates, h, h));
  Var cand = tanh(slice_cols(gates, 2 * h, h));
  Var o = sigmoid(slice_cols(gates, 3 * h, h));
  Var c = add(mul(f, prev.c), mul(i, cand));
  Var hid = mul(o, tanh(c));
  return {hid, c};
}

Lstm::Lstm(ParameterSet& params, const std::string& name, int in, int hidden,
           int layers, std::mt19937_64& rng) {
  int prev = in;
  for (int k = 0; k < layers; ++k) {
    layers_.emplace_back(params, name + "." + std::to_string(k), prev, hidden, rng);
    prev = hidden;
  }
}

Lstm Lstm::bind(ParameterSet& params, const std::string& name, std::size_t layers) {
  Lstm l;
  for (std::size_t k = 0; k < layers; ++k)
    l.layers_.push_back(LstmLayer::bind(params, name + "." + std::to_string(k)));
  return l;
}

std::vector<Var> Lstm::forward(Graph& g, const std::vector<Var>& inputs) const {
  if (inputs.empty()) throw Error("lstm: empty sequence");
  std::vector<Var> seq = inputs;
  for (const auto& layer : layers_) {
    auto state = layer.zero_state(g, seq.front().rows());
    std::vector<Var> out;
    out.reserve(seq.size());
    for (const auto& x : seq) {
      if (x.cols() != layer.input_weight().value.rows())
        throw Error("lstm: input width mismatch");
      state = layer.step(g, x, state);
      out.push_back(state.h);
    }
    seq = std::move(out);
  }
  return seq;
}

}  // namespace zrs::nn
