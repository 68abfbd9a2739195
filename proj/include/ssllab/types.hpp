#pragma once

#include <Eigen/Dense>

namespace ssllab {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// d-dimensional linear feature map over n vertices; row p is feature f_p
/// evaluated at every vertex.
struct FeatureMap {
  Matrix weights;  // [d x n]

  int d() const { return static_cast<int>(weights.rows()); }
  int n() const { return static_cast<int>(weights.cols()); }
};

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ssllab
