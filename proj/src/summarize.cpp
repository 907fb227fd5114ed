#include "stgp/summarize.hpp"

#include <algorithm>
#include <cmath>

#include "stgp/error.hpp"

namespace stgp {

Eigen::MatrixXi ConnectionGraph::degree_map(int rows, int cols) const {
  if (rows < 1 || cols < 1 || static_cast<std::size_t>(rows) * cols != degree.size()) {
    throw DomainError("degree map shape does not match the node count");
  }
  Eigen::MatrixXi m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = degree[static_cast<std::size_t>(r) * cols + c];
  return m;
}

ConnectionGraph connection_graph(const Eigen::MatrixXd& corr, double q) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("quantile q must lie in (0, 1)");
  const Eigen::Index n = corr.rows();
  if (n < 1 || corr.cols() != n) throw DomainError("correlation matrix must be square and non-empty");
  if (!corr.allFinite()) throw DomainError("correlation matrix has non-finite entries");
  const double scale = std::max(1.0, corr.cwiseAbs().maxCoeff());
  if ((corr - corr.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DomainError("correlation matrix is not symmetric");
  }
  if ((corr.diagonal().array() - 1.0).abs().maxCoeff() > 1e-8) {
    throw DomainError("correlation matrix must have a unit diagonal");
  }

  const Eigen::MatrixXd sym = 0.5 * (corr + corr.transpose());
  std::vector<double> mags(sym.data(), sym.data() + sym.size());
  for (double& v : mags) v = std::abs(v);
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(mags.size() - 1)));
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());

  ConnectionGraph g;
  g.q = q;
  g.threshold = mags[k];
  g.degree.assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index b = 0; b < n; ++b)
    for (Eigen::Index a = 0; a < n; ++a)
      if (a != b && std::abs(sym(a, b)) >= g.threshold) ++g.degree[static_cast<std::size_t>(b)];
  return g;
}

}  // namespace stgp
