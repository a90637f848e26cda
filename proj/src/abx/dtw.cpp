#include "zrs/abx/dtw.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace zrs {

std::string to_string(FrameMetric m) {
  return m == FrameMetric::kCosine ? "cosine" : "euclidean";
}

FrameMetric frame_metric_from_string(const std::string& s) {
  if (s == "cosine") return FrameMetric::kCosine;
  if (s == "euclidean") return FrameMetric::kEuclidean;
  throw Error("unknown frame metric '" + s + "'");
}

double cosine_distance(const Eigen::Ref<const Eigen::RowVectorXf>& u,
                       const Eigen::Ref<const Eigen::RowVectorXf>& v) {
  const double nu = u.cast<double>().norm();
  const double nv = v.cast<double>().norm();
  if (nu == 0 || nv == 0) return (nu == 0 && nv == 0) ? 0.0 : 1.0;
  const double c = u.cast<double>().dot(v.cast<double>()) / (nu * nv);
  return 1.0 - std::clamp(c, -1.0, 1.0);
}

double dtw_distance(const FrameMatrix& a, const FrameMatrix& b, FrameMetric metric) {
  if (a.rows() == 0 || b.rows() == 0) throw Error("dtw: empty sequence");
  if (a.cols() != b.cols()) throw Error("dtw: dimension mismatch");
  const auto n = a.rows();
  const auto m = b.rows();
  Matrix cost(n, m);
  if (metric == FrameMetric::kEuclidean) {
    const Matrix ad = a.cast<double>(), bd = b.cast<double>();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) cost(i, j) = (ad.row(i) - bd.row(j)).norm();
  } else {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < m; ++j) cost(i, j) = cosine_distance(a.row(i), b.row(j));
  }
  // Accumulated cost and path length; ties prefer the shorter path.
  constexpr double inf = std::numeric_limits<double>::infinity();
  Matrix acc = Matrix::Constant(n, m, inf);
  Eigen::MatrixXi len = Eigen::MatrixXi::Zero(n, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == 0 && j == 0) {
        acc(0, 0) = cost(0, 0);
        len(0, 0) = 1;
        continue;
      }
      double best = inf;
      int best_len = 0;
      auto consider = [&](Eigen::Index pi, Eigen::Index pj) {
        if (pi < 0 || pj < 0) return;
        const double v = acc(pi, pj);
        if (v < best || (v == best && len(pi, pj) < best_len)) {
          best = v;
          best_len = len(pi, pj);
        }
      };
      consider(i - 1, j - 1);
      consider(i - 1, j);
      consider(i, j - 1);
      acc(i, j) = best + cost(i, j);
      len(i, j) = best_len + 1;
    }
  return acc(n - 1, m - 1) / len(n - 1, m - 1);
}

}  // namespace zrs
