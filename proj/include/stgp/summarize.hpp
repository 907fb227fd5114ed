#pragma once

#include <vector>

#include <Eigen/Dense>

namespace stgp {

struct ConnectionGraph {
  std::vector<int> degree;  // per node, self-loops excluded
  double threshold = 0.0;
  double q = 0.0;

  /// Degrees laid out as a rows x cols image (node r*cols + c).
  Eigen::MatrixXi degree_map(int rows, int cols) const;
};

/// Thresholds |corr| at the q-quantile of all I^2 absolute values (diagonal included),
/// taken as the order statistic at floor(q (n - 1)) of the sorted values.
ConnectionGraph connection_graph(const Eigen::MatrixXd& corr, double q);

}  // namespace stgp
