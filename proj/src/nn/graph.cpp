#include "zrs/nn/graph.hpp"

#include <cmath>

namespace zrs::nn {

Parameter& ParameterSet::add(std::string name, Mat value) {
  if (find(name)) throw Error("duplicate parameter '" + name + "'");
  params_.push_back(std::make_unique<Parameter>(std::move(name), std::move(value)));
  return *params_.back();
}

Parameter* ParameterSet::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name() == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name() == name) return p.get();
  return nullptr;
}

Parameter& ParameterSet::at(const std::string& name) {
  if (auto* p = find(name)) return *p;
  throw Error("no parameter '" + name + "'");
}

const Parameter& ParameterSet::at(const std::string& name) const {
  if (const auto* p = find(name)) return *p;
  throw Error("no parameter '" + name + "'");
}

std::size_t ParameterSet::num_values() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->grad.setZero(p->value.rows(), p->value.cols());
}

double ParameterSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& p : params_) sq += p->grad.squaredNorm();
  return std::sqrt(sq);
}

void ParameterSet::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (std::isfinite(norm) && norm > max_norm) {
    const double s = max_norm / norm;
    for (auto& p : params_) p->grad *= s;
  }
}

std::vector<Mat> ParameterSet::snapshot() const {
  std::vector<Mat> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::restore(const std::vector<Mat>& values) {
  if (values.size() != params_.size()) throw Error("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
}

const Mat& Var::value() const { return graph_->value(id_); }

double Var::scalar() const {
  const auto& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw Error("Var::scalar on non-1x1 node");
  return v(0, 0);
}

Var Graph::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), {}, nullptr, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::parameter(Parameter& p) {
  nodes_.push_back(Node{p.value, {}, nullptr, &p, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::record(Mat value, std::initializer_list<Var> parents,
                  Backward backward) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || needs_grad(p.id());
  nodes_.push_back(
      Node{std::move(value), {}, needs ? std::move(backward) : nullptr, nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::record(Mat value, const std::vector<Var>& parents, Backward backward) {
  bool needs = false;
  for (const auto& p : parents) needs = needs || needs_grad(p.id());
  nodes_.push_back(
      Node{std::move(value), {}, needs ? std::move(backward) : nullptr, nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Mat& Graph::grad(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw Error("backward: root must be a scalar node");
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad(root.id()).setConstant(1.0);
  for (int id = root.id(); id >= 0; --id) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) n.param->grad += n.grad;
  }
}

}  // namespace zrs::nn
