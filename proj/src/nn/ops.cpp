#include "zrs/nn/ops.hpp"

#include <cmath>

namespace zrs::nn {

namespace {

void check_same(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(std::string(op) + ": shape mismatch");
}

}  // namespace

Var matmul(Var a, Var b) {
  if (a.cols() != b.rows()) throw Error("matmul: shape mismatch");
  Graph& g = a.graph();
  const int ia = a.id(), ib = b.id();
  return g.record(a.value() * b.value(), {a, b}, [ia, ib](Graph& g, int self) {
    const Mat& gs = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia).noalias() += gs * g.value(ib).transpose();
    if (g.needs_grad(ib)) g.grad(ib).noalias() += g.value(ia).transpose() * gs;
  });
}

Var add(Var a, Var b) {
  check_same(a, b, "add");
  const int ia = a.id(), ib = b.id();
  return a.graph().record(a.value() + b.value(), {a, b},
                          [ia, ib](Graph& g, int self) {
                            const Mat& gs = g.grad(self);
                            if (g.needs_grad(ia)) g.grad(ia) += gs;
                            if (g.needs_grad(ib)) g.grad(ib) += gs;
                          });
}

Var sub(Var a, Var b) {
  check_same(a, b, "sub");
  const int ia = a.id(), ib = b.id();
  return a.graph().record(a.value() - b.value(), {a, b},
                          [ia, ib](Graph& g, int self) {
                            const Mat& gs = g.grad(self);
                            if (g.needs_grad(ia)) g.grad(ia) += gs;
                            if (g.needs_grad(ib)) g.grad(ib) -= gs;
                          });
}

Var mul(Var a, Var b) {
  check_same(a, b, "mul");
  const int ia = a.id(), ib = b.id();
  return a.graph().record(
      a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Graph& g, int self) {
        const Mat& gs = g.grad(self);
        if (g.needs_grad(ia)) g.grad(ia) += gs.cwiseProduct(g.value(ib));
        if (g.needs_grad(ib)) g.grad(ib) += gs.cwiseProduct(g.value(ia));
      });
}

Var add_row(Var a, Var row) {
  if (row.rows() != 1 || row.cols() != a.cols())
    throw Error("add_row: shape mismatch");
  const int ia = a.id(), ir = row.id();
  Mat v = a.value();
  v.rowwise() += row.value().row(0);
  return a.graph().record(std::move(v), {a, row}, [ia, ir](Graph& g, int self) {
    const Mat& gs = g.grad(self);
    if (g.needs_grad(ia)) g.grad(ia) += gs;
    if (g.needs_grad(ir)) g.grad(ir) += gs.colwise().sum();
  });
}

Var mul_col(Var a, Var col) {
  if (col.cols() != 1 || col.rows() != a.rows())
    throw Error("mul_col: shape mismatch");
  const int ia = a.id(), ic = col.id();
  Mat v = a.value().array().colwise() * col.value().col(0).array();
  return a.graph().record(std::move(v), {a, col}, [ia, ic](Graph& g, int self) {
    const Mat& gs = g.grad(self);
    if (g.needs_grad(ia))
      g.grad(ia).array() += gs.array().colwise() * g.value(ic).col(0).array();
    if (g.needs_grad(ic))
      g.grad(ic) += gs.cwiseProduct(g.value(ia)).rowwise().sum();
  });
}

Var scale(Var a, double s) {
  const int ia = a.id();
  return a.graph().record(a.value() * s, {a}, [ia, s](Graph& g, int self) {
    g.grad(ia) += s * g.grad(self);
  });
}

Var add_scalar(Var a, double s) {
  const int ia = a.id();
  return a.graph().record(a.value().array() + s, {a}, [ia](Graph& g, int self) {
    g.grad(ia) += g.grad(self);
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var tanh(Var a) {
  const int ia = a.id();
  return a.graph().record(a.value().array().tanh(), {a}, [ia](Graph& g, int self) {
    const Mat& y = g.value(self);
    g.grad(ia).array() += g.grad(self).array() * (1.0 - y.array().square());
  });
}

Var sigmoid(Var a) {
  const int ia = a.id();
  Mat y = (1.0 + (-a.value().array()).exp()).inverse();
  return a.graph().record(std::move(y), {a}, [ia](Graph& g, int self) {
    const Mat& y = g.value(self);
    g.grad(ia).array() += g.grad(self).array() * y.array() * (1.0 - y.array());
  });
}

Var exp(Var a) {
  const int ia = a.id();
  return a.graph().record(a.value().array().exp(), {a}, [ia](Graph& g, int self) {
    g.grad(ia).array() += g.grad(self).array() * g.value(self).array();
  });
}

Var square(Var a) {
  const int ia = a.id();
  return a.graph().record(a.value().array().square(), {a},
                          [ia](Graph& g, int self) {
                            g.grad(ia).array() +=
                                2.0 * g.grad(self).array() * g.value(ia).array();
                          });
}

Var clamp(Var a, double lo, double hi) {
  const int ia = a.id();
  return a.graph().record(a.value().cwiseMax(lo).cwiseMin(hi), {a},
                          [ia, lo, hi](Graph& g, int self) {
                            const Mat& x = g.value(ia);
                            const Mat& gs = g.grad(self);
                            Mat& gi = g.grad(ia);
                            for (Eigen::Index k = 0; k < x.size(); ++k)
                              if (x(k) >= lo && x(k) <= hi) gi(k) += gs(k);
                          });
}

Var sum(Var a) {
  const int ia = a.id();
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return a.graph().record(std::move(v), {a}, [ia](Graph& g, int self) {
    g.grad(ia).array() += g.grad(self)(0, 0);
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  const int ia = a.id();
  return a.graph().record(a.value().rowwise().sum(), {a}, [ia](Graph& g, int self) {
    g.grad(ia).colwise() += g.grad(self).col(0);
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw Error("concat_cols: row mismatch");
    cols += p.cols();
  }
  Mat v(rows, cols);
  std::vector<int> ids;
  std::vector<Eigen::Index> starts;
  Eigen::Index at = 0;
  for (const auto& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    ids.push_back(p.id());
    starts.push_back(at);
    at += p.cols();
  }
  return parts[0].graph().record(
      std::move(v), parts, [ids, starts](Graph& g, int self) {
        const Mat& gs = g.grad(self);
        for (std::size_t k = 0; k < ids.size(); ++k)
          if (g.needs_grad(ids[k]))
            g.grad(ids[k]) += gs.middleCols(starts[k], g.value(ids[k]).cols());
      });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || start + count > a.cols()) throw Error("slice_cols: out of range");
  const int ia = a.id();
  return a.graph().record(a.value().middleCols(start, count), {a},
                          [ia, start, count](Graph& g, int self) {
                            g.grad(ia).middleCols(start, count) += g.grad(self);
                          });
}

Var gather_rows(Var table, const std::vector<int>& idx) {
  const Mat& t = table.value();
  Mat v(static_cast<Eigen::Index>(idx.size()), t.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] < 0 || idx[r] >= t.rows()) throw Error("gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(r)) = t.row(idx[r]);
  }
  const int it = table.id();
  return table.graph().record(std::move(v), {table}, [it, idx](Graph& g, int self) {
    const Mat& gs = g.grad(self);
    Mat& gt = g.grad(it);
    for (std::size_t r = 0; r < idx.size(); ++r)
      gt.row(idx[r]) += gs.row(static_cast<Eigen::Index>(r));
  });
}

Var sq_dist(Var a, Var b) {
  if (a.cols() != b.cols()) throw Error("sq_dist: width mismatch");
  const Mat& av = a.value();
  const Mat& bv = b.value();
  Mat d = (-2.0 * av * bv.transpose());
  d.colwise() += av.rowwise().squaredNorm();
  d.rowwise() += bv.rowwise().squaredNorm().transpose();
  const int ia = a.id(), ib = b.id();
  return a.graph().record(std::move(d), {a, b}, [ia, ib](Graph& g, int self) {
    // d_ij = |a_i - b_j|^2; dd/da_i = 2 sum_j G_ij (a_i - b_j)
    const Mat& gs = g.grad(self);
    const Mat& av = g.value(ia);
    const Mat& bv = g.value(ib);
    if (g.needs_grad(ia)) {
      Mat ga = 2.0 * (av.array().colwise() * gs.rowwise().sum().array()).matrix();
      ga.noalias() -= 2.0 * gs * bv;
      g.grad(ia) += ga;
    }
    if (g.needs_grad(ib)) {
      Mat gb = 2.0 * (bv.array().colwise() * gs.colwise().sum().transpose().array()).matrix();
      gb.noalias() -= 2.0 * gs.transpose() * av;
      g.grad(ib) += gb;
    }
  });
}

Mat softmax_rows(const Mat& logits) {
  Mat p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    const double m = p.row(r).maxCoeff();
    p.row(r) = (p.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

Var log_softmax_pick(Var logits, const std::vector<int>& idx) {
  const Mat& z = logits.value();
  if (static_cast<Eigen::Index>(idx.size()) != z.rows())
    throw Error("log_softmax_pick: index count mismatch");
  Mat v(z.rows(), 1);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const int k = idx[static_cast<std::size_t>(r)];
    if (k < 0 || k >= z.cols()) throw Error("log_softmax_pick: index out of range");
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    v(r, 0) = z(r, k) - lse;
  }
  const int il = logits.id();
  return logits.graph().record(std::move(v), {logits}, [il, idx](Graph& g, int self) {
    const Mat p = softmax_rows(g.value(il));
    const Mat& gs = g.grad(self);
    Mat& gl = g.grad(il);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      gl.row(r) -= gs(r, 0) * p.row(r);
      gl(r, idx[static_cast<std::size_t>(r)]) += gs(r, 0);
    }
  });
}

}  // namespace zrs::nn
