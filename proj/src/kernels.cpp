#include "stgp/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "stgp/error.hpp"
#include "stgp/samplers.hpp"

namespace stgp {

void StationaryKernelParams::validate() const {
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) throw DomainError("kernel variance must be positive");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("kernel length-scale must be positive");
  if (!(s_exp > 0.0 && s_exp <= 2.0)) throw DomainError("kernel exponent must lie in (0, 2]");
}

namespace {

inline double kernel_value(double dist2, const StationaryKernelParams& p) {
  if (p.s_exp == 2.0) return p.sigma2 * std::exp(-0.5 * dist2 / (p.rho * p.rho));
  return p.sigma2 * std::exp(-0.5 * std::pow(std::sqrt(dist2) / p.rho, p.s_exp));
}

}  // namespace

Eigen::MatrixXd stationary_cross_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                        const StationaryKernelParams& p) {
  p.validate();
  if (!a.allFinite() || !b.allFinite()) throw DomainError("kernel inputs must be finite");
  if (a.cols() != b.cols()) throw DomainError("kernel inputs differ in dimension");
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index c = 0; c < b.rows(); ++c)
    for (Eigen::Index r = 0; r < a.rows(); ++r)
      k(r, c) = kernel_value((a.row(r) - b.row(c)).squaredNorm(), p);
  return k;
}

Eigen::MatrixXd stationary_kernel(const Eigen::MatrixXd& points, const StationaryKernelParams& p) {
  p.validate();
  if (!points.allFinite()) throw DomainError("kernel inputs must be finite");
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    k(c, c) = p.sigma2;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      k(r, c) = kernel_value((points.row(r) - points.row(c)).squaredNorm(), p);
      k(c, r) = k(r, c);
    }
  }
  return k;
}

Eigen::MatrixXd stationary_kernel_1d(const Eigen::VectorXd& t, const StationaryKernelParams& p) {
  p.validate();
  if (!t.allFinite()) throw DomainError("kernel inputs must be finite");
  const Eigen::Index n = t.size();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    k(c, c) = p.sigma2;
    for (Eigen::Index r = c + 1; r < n; ++r) {
      const double d = t(r) - t(c);
      k(r, c) = kernel_value(d * d, p);
      k(c, r) = k(r, c);
    }
  }
  return k;
}

Eigen::RowVectorXd stationary_cross_1d(double t_new, const Eigen::VectorXd& t,
                                       const StationaryKernelParams& p) {
  p.validate();
  if (!std::isfinite(t_new)) throw DomainError("kernel inputs must be finite");
  Eigen::RowVectorXd k(t.size());
  for (Eigen::Index j = 0; j < t.size(); ++j) {
    const double d = t_new - t(j);
    k(j) = kernel_value(d * d, p);
  }
  return k;
}

void add_jitter(Eigen::MatrixXd& k) {
  if (k.rows() == 0) return;
  k.diagonal().array() += kJitter * k.trace() / static_cast<double>(k.rows());
}

void normalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index best = 0;
    double mag = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double m = std::abs(vectors(r, c));
      if (m > mag) {
        mag = m;
        best = r;
      }
    }
    if (vectors(best, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

MercerBasis mercer_basis(const Eigen::MatrixXd& cx, int L) {
  const Eigen::Index n = cx.rows();
  if (cx.cols() != n || n == 0) throw DomainError("mercer_basis needs a non-empty square matrix");
  if (L < 1 || L > n) {
    throw DomainError("truncation L=" + std::to_string(L) + " outside 1.." + std::to_string(n));
  }
  if (!cx.allFinite()) throw DomainError("mercer_basis input has non-finite entries");
  const double scale = std::max(1.0, cx.cwiseAbs().maxCoeff());
  if ((cx - cx.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
    throw DomainError("mercer_basis input is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cx);
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  MercerBasis b;
  b.phi.resize(n, L);
  b.lambda0.resize(L);
  for (int l = 0; l < L; ++l) {
    const Eigen::Index src = n - 1 - l;  // eigenvalues come back ascending
    b.phi.col(l) = eig.eigenvectors().col(src);
    b.lambda0(l) = std::sqrt(std::max(eig.eigenvalues()(src), 0.0));
  }
  normalize_signs(b.phi);
  return b;
}

Eigen::VectorXd decay_weights(double kappa, int L) {
  if (L < 1) throw DomainError("L must be >= 1");
  Eigen::VectorXd g(L);
  for (int l = 0; l < L; ++l) g(l) = std::pow(static_cast<double>(l + 1), -kappa / 2.0);
  return g;
}

DynamicEigenvalues dynamic_eigenvalues(double kappa, const Eigen::MatrixXd& u) {
  if (!u.allFinite()) throw DomainError("dynamic eigenvalue inputs must be finite");
  DynamicEigenvalues d;
  d.gamma = decay_weights(kappa, static_cast<int>(u.cols()));
  d.u = u;
  d.lambda = u * d.gamma.asDiagonal();
  return d;
}

Eigen::MatrixXd assemble_cxt(const MercerBasis& basis, const Eigen::MatrixXd& lambda, int j) {
  if (lambda.cols() != basis.L()) throw DomainError("lambda columns do not match basis size");
  if (j < 0 || j >= lambda.rows()) throw DomainError("time index out of range");
  const Eigen::VectorXd l2 = lambda.row(j).transpose().array().square();
  return basis.phi * l2.asDiagonal() * basis.phi.transpose();
}

GraphLaplacian grid_graph_laplacian(int rows, int cols, int w) {
  if (rows < 2 || cols < 2) throw DomainError("grid Laplacian needs at least 2 rows and 2 cols");
  if (w < 1) throw DomainError("window radius must be >= 1");
  const int n = rows * cols;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * ((2 * w + 1) * (2 * w + 1)));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int node = r * cols + c;
      int degree = 0;
      for (int dr = -w; dr <= w; ++dr) {
        for (int dc = -w; dc <= w; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
          trip.emplace_back(node, rr * cols + cc, -1.0);
          ++degree;
        }
      }
      trip.emplace_back(node, node, static_cast<double>(degree));
    }
  }
  GraphLaplacian g;
  g.n = n;
  g.entries.resize(n, n);
  g.entries.setFromTriplets(trip.begin(), trip.end());
  g.entries.makeCompressed();
  g.density = static_cast<double>(g.entries.nonZeros()) /
              (static_cast<double>(n) * static_cast<double>(n));
  return g;
}

double laplacian_scale(int n, int d) {
  if (n < 2 || d < 1) throw DomainError("laplacian_scale needs n >= 2 and d >= 1");
  const double ln = std::log(static_cast<double>(n));
  return 1.0 / (std::pow(static_cast<double>(n), 1.0 - 2.0 / d) * std::pow(ln, 1.0 + 2.0 / d));
}

Eigen::SparseMatrix<double> graph_laplacian_precision(const GraphLaplacian& lap, double tau2,
                                                      int s, int d) {
  if (!(tau2 >= 0.0)) throw DomainError("tau2 must be non-negative");
  if (s < 1) throw DomainError("precision power s must be >= 1");
  if (s > 3) throw DomainError("precision power s > 3 rejected to bound sparse fill-in");
  const double sn = laplacian_scale(lap.n, d);
  Eigen::SparseMatrix<double> eye(lap.n, lap.n);
  eye.setIdentity();
  Eigen::SparseMatrix<double> base = sn * lap.entries + tau2 * eye;
  Eigen::SparseMatrix<double> out = base;
  for (int p = 1; p < s; ++p) {
    Eigen::SparseMatrix<double> next = (out * base).pruned();
    out = std::move(next);
  }
  out.makeCompressed();
  return out;
}

namespace {

// Two passes of modified Gram-Schmidt, in place.
void orthonormalize(Eigen::MatrixXd& x) {
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      for (Eigen::Index p = 0; p < c; ++p) x.col(c) -= x.col(p).dot(x.col(c)) * x.col(p);
      const double nrm = x.col(c).norm();
      if (!(nrm > 1e-300)) throw NumericalError("subspace iteration lost rank");
      x.col(c) /= nrm;
    }
  }
}

}  // namespace

SparseEigenpairs smallest_eigenpairs(const Eigen::SparseMatrix<double>& a, int k,
                                     std::uint64_t seed, double tol) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw DomainError("smallest_eigenpairs needs a square matrix");
  if (k < 1 || k > n) throw DomainError("requested eigenpair count outside 1..n");
  const Eigen::Index block = std::min<Eigen::Index>(n, k + std::max(10, k / 2));

  double anorm = 0.0;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
    double col = 0.0;
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, c); it; ++it) col += std::abs(it.value());
    anorm = std::max(anorm, col);
  }
  if (anorm == 0.0) anorm = 1.0;

  // Shift keeps the factorization definite when a has a null space.
  const double shift = 1e-6 * anorm;
  Eigen::SparseMatrix<double> eye(n, n);
  eye.setIdentity();
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a + shift * eye);
  if (solver.info() != Eigen::Success) throw NumericalError("shift-invert factorization failed");

  Rng rng(seed, 0);
  Eigen::MatrixXd x = rng.normal_matrix(n, block);
  orthonormalize(x);

  Eigen::VectorXd ritz;
  constexpr int kMaxIter = 2000;
  for (int iter = 0; iter < kMaxIter; ++iter) {
    {
      Eigen::MatrixXd y = solver.solve(x);
      x.swap(y);
    }
    orthonormalize(x);
    Eigen::MatrixXd ax = a * x;
    Eigen::MatrixXd h = x.transpose() * ax;
    h = 0.5 * (h + h.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(h);
    x = x * eig.eigenvectors();
    ax = ax * eig.eigenvectors();
    ritz = eig.eigenvalues();
    double worst = 0.0;
    for (int c = 0; c < k; ++c) {
      worst = std::max(worst, (ax.col(c) - ritz(c) * x.col(c)).norm());
    }
    if (worst <= tol * anorm || block == n) {
      SparseEigenpairs out;
      out.values = ritz.head(k);
      out.vectors = x.leftCols(k);
      normalize_signs(out.vectors);
      return out;
    }
  }
  throw NumericalError("subspace iteration did not converge");
}

MercerBasis graph_laplacian_basis(const SparseEigenpairs& lap_eig, int n, double tau2, int s,
                                  int d) {
  if (!(tau2 > 0.0)) throw DomainError("graph-Laplacian covariance needs tau2 > 0");
  const double sn = laplacian_scale(n, d);
  MercerBasis b;
  b.phi = lap_eig.vectors;
  b.lambda0.resize(lap_eig.values.size());
  for (Eigen::Index l = 0; l < lap_eig.values.size(); ++l) {
    const double mu = std::max(lap_eig.values(l), 0.0);
    b.lambda0(l) = std::pow(sn * mu + tau2, -0.5 * s);
  }
  return b;
}

}  // namespace stgp
