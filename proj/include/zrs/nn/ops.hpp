#pragma once

#include <vector>

#include "zrs/nn/graph.hpp"

/// Differentiable tensor ops. Batches are laid out row-wise (B x features).
namespace zrs::nn {

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
/// a (B x n) + row (1 x n) broadcast over rows.
Var add_row(Var a, Var row);
/// a (B x n) * col (B x 1) broadcast over columns.
Var mul_col(Var a, Var col);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var square(Var a);
/// Pass-through inside [lo, hi]; zero gradient where clamped.
Var clamp(Var a, double lo, double hi);

/// Sum of all entries -> 1x1.
Var sum(Var a);
/// Mean of all entries -> 1x1.
Var mean(Var a);
/// Per-row sums -> B x 1.
Var row_sum(Var a);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
/// Rows of `table` picked by index -> idx.size() x table.cols().
Var gather_rows(Var table, const std::vector<int>& idx);

/// Squared Euclidean distances between rows: (B x d), (M x d) -> B x M.
Var sq_dist(Var a, Var b);
/// log softmax(logits)[r, idx[r]] per row -> B x 1.
Var log_softmax_pick(Var logits, const std::vector<int>& idx);
/// Row-wise softmax (no gradient path needed for inference helpers).
Mat softmax_rows(const Mat& logits);

}  // namespace zrs::nn
