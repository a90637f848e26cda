#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "zrs/common.hpp"

namespace zrs::nn {

using Mat = Eigen::MatrixXd;

/// A named trainable tensor. `grad` accumulates across backward passes until
/// zeroed.
class Parameter {
 public:
  Parameter(std::string name, Mat initial)
      : value(std::move(initial)),
        grad(Mat::Zero(value.rows(), value.cols())),
        name_(std::move(name)) {}

  const std::string& name() const { return name_; }

  Mat value;
  Mat grad;

 private:
  std::string name_;
};

/// Ordered parameter collection with stable addresses.
class ParameterSet {
 public:
  Parameter& add(std::string name, Mat value);
  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  std::size_t num_values() const;
  void zero_grad();
  /// Global L2 norm of all gradients.
  double grad_norm() const;
  /// Rescales gradients so their global norm is at most max_norm.
  void clip_grad_norm(double max_norm);

  std::vector<Mat> snapshot() const;
  void restore(const std::vector<Mat>& values);

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

class Graph;

/// Handle to a node in a Graph.
class Var {
 public:
  Var() = default;
  Var(Graph* g, int id) : graph_(g), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 node.
  double scalar() const;
  Graph& graph() const { return *graph_; }
  int id() const { return id_; }

 private:
  Graph* graph_ = nullptr;
  int id_ = -1;
};

/// Tape for reverse-mode differentiation. Nodes are appended in evaluation
/// order; backward() walks them in reverse.
class Graph {
 public:
  using Backward = std::function<void(Graph&, int self)>;

  Var constant(Mat value);
  Var parameter(Parameter& p);
  /// Records an op node. `backward` reads grad(self) and accumulates into the
  /// grads of parents that need_grad().
  Var record(Mat value, std::initializer_list<Var> parents, Backward backward);
  Var record(Mat value, const std::vector<Var>& parents, Backward backward);

  const Mat& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Mat& grad(int id);
  bool needs_grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].needs_grad;
  }

  /// Seeds d(root)/d(root) = 1 (root must be 1x1) and accumulates parameter
  /// gradients into Parameter::grad.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };
  std::deque<Node> nodes_;
};

}  // namespace zrs::nn
