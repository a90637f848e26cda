#pragma once

#include <string>

#include "zrs/common.hpp"

namespace zrs {

enum class FrameMetric { kCosine, kEuclidean };

std::string to_string(FrameMetric m);
FrameMetric frame_metric_from_string(const std::string& s);

/// 1 - cos(u, v); a zero vector is at distance 0 from another zero vector
/// and 1 from anything else.
double cosine_distance(const Eigen::Ref<const Eigen::RowVectorXf>& u,
                       const Eigen::Ref<const Eigen::RowVectorXf>& v);

/// DTW with steps (1,0), (0,1), (1,1); total cost divided by the number of
/// cells on the optimal path.
double dtw_distance(const FrameMatrix& a, const FrameMatrix& b,
                    FrameMetric metric = FrameMetric::kCosine);

}  // namespace zrs
