#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "zrs/nn/ops.hpp"

namespace zrs::nn {

enum class Activation { kLinear, kTanh, kSigmoid };

Activation activation_from_string(const std::string& s);
std::string to_string(Activation a);
Var activate(Var x, Activation a);
Mat activate(const Mat& x, Activation a);

/// y = x W + b with W: in x out.
class Dense {
 public:
  Dense() = default;
  Dense(ParameterSet& params, const std::string& name, int in, int out,
        std::mt19937_64& rng);
  /// Binds to parameters already present in the set (checkpoint load).
  static Dense bind(ParameterSet& params, const std::string& name);

  Var forward(Graph& g, Var x) const;
  Mat forward(const Mat& x) const;
  int in_dim() const { return static_cast<int>(weight_->value.rows()); }
  int out_dim() const { return static_cast<int>(weight_->value.cols()); }
  Parameter& weight() const { return *weight_; }
  Parameter& bias() const { return *bias_; }

 private:
  Parameter* weight_ = nullptr;
  Parameter* bias_ = nullptr;
};

/// Stack of Dense layers; `activation` after every layer except when
/// `linear_output` is set for the last.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterSet& params, const std::string& name, int in,
      const std::vector<int>& widths, Activation activation, bool linear_output,
      std::mt19937_64& rng);
  static Mlp bind(ParameterSet& params, const std::string& name,
                  std::size_t num_layers, Activation activation,
                  bool linear_output);

  Var forward(Graph& g, Var x) const;
  int out_dim() const { return layers_.back().out_dim(); }
  std::size_t num_layers() const { return layers_.size(); }

 private:
  std::vector<Dense> layers_;
  Activation activation_ = Activation::kTanh;
  bool linear_output_ = false;
};

/// One LSTM layer: gates = x Wx + h Wh + b, column blocks [i, f, g, o].
/// c' = sigmoid(f) c + sigmoid(i) tanh(g); h' = sigmoid(o) tanh(c').
class LstmLayer {
 public:
  LstmLayer() = default;
  LstmLayer(ParameterSet& params, const std::string& name, int in, int hidden,
            std::mt19937_64& rng);
  static LstmLayer bind(ParameterSet& params, const std::string& name);

  struct State {
    Var h;
    Var c;
  };
  State step(Graph& g, Var x, const State& prev) const;
  State zero_state(Graph& g, Eigen::Index batch) const;
  int hidden_dim() const { return static_cast<int>(wh_->value.rows()); }

  Parameter& input_weight() const { return *wx_; }
  Parameter& recurrent_weight() const { return *wh_; }
  Parameter& bias() const { return *b_; }

 private:
  Parameter* wx_ = nullptr;
  Parameter* wh_ = nullptr;
  Parameter* b_ = nullptr;
};

/// Multi-layer LSTM over a sequence of B x in inputs.
class Lstm {
 public:
  Lstm() = default;
  Lstm(ParameterSet& params, const std::string& name, int in, int hidden,
       int layers, std::mt19937_64& rng);
  static Lstm bind(ParameterSet& params, const std::string& name,
                   std::size_t layers);

  /// Hidden states of the top layer, one per step.
  std::vector<Var> forward(Graph& g, const std::vector<Var>& inputs) const;
  int hidden_dim() const { return layers_.back().hidden_dim(); }

 private:
  std::vector<LstmLayer> layers_;
};

/// Xavier-uniform initial weights.
Mat xavier(int rows, int cols, std::mt19937_64& rng);

}  // namespace zrs::nn
