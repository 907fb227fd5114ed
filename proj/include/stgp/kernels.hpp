#pragma once

#include <cstdint>
#include <memory>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace stgp {

/// sigma2 * exp(-0.5 * |p - p'|^s / rho^s)
struct StationaryKernelParams {
  double sigma2 = 1.0;
  double rho = 1.0;
  double s_exp = 2.0;

  void validate() const;
};

/// Gram matrix over the rows of `points`.
Eigen::MatrixXd stationary_kernel(const Eigen::MatrixXd& points, const StationaryKernelParams& p);
/// Cross-covariance between rows of `a` and rows of `b`.
Eigen::MatrixXd stationary_cross_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                        const StationaryKernelParams& p);
/// Kernel matrix for a scalar grid (e.g. time points).
Eigen::MatrixXd stationary_kernel_1d(const Eigen::VectorXd& t, const StationaryKernelParams& p);
Eigen::RowVectorXd stationary_cross_1d(double t_new, const Eigen::VectorXd& t,
                                       const StationaryKernelParams& p);

/// Relative diagonal jitter applied to every kernel matrix before factorization.
inline constexpr double kJitter = 1e-9;
/// Adds kJitter * trace / n to the diagonal.
void add_jitter(Eigen::MatrixXd& k);

struct MercerBasis {
  Eigen::MatrixXd phi;      // I x L, orthonormal columns
  Eigen::VectorXd lambda0;  // sqrt of the top-L eigenvalues, non-increasing

  int I() const { return static_cast<int>(phi.rows()); }
  int L() const { return static_cast<int>(phi.cols()); }
};

/// Top-L eigenpairs of a symmetric PSD matrix. Each column is sign-fixed so that its
/// largest-magnitude entry (lowest index on ties) is positive.
MercerBasis mercer_basis(const Eigen::MatrixXd& cx, int L);

/// Flips column signs in place per the convention of mercer_basis.
void normalize_signs(Eigen::MatrixXd& vectors);

struct DynamicEigenvalues {
  Eigen::VectorXd gamma;   // length L, gamma_l = l^(-kappa/2)
  Eigen::MatrixXd u;       // J x L
  Eigen::MatrixXd lambda;  // J x L, lambda(j, l) = gamma(l) * u(j, l)
};

Eigen::VectorXd decay_weights(double kappa, int L);
DynamicEigenvalues dynamic_eigenvalues(double kappa, const Eigen::MatrixXd& u);

/// Phi * diag(lambda_j^2) * Phi^T for the 0-based time index j.
Eigen::MatrixXd assemble_cxt(const MercerBasis& basis, const Eigen::MatrixXd& lambda, int j);

struct GraphLaplacian {
  int n = 0;
  Eigen::SparseMatrix<double> entries;  // D - A
  double density = 0.0;                 // nnz / n^2
};

/// Unit-weight Laplacian of a rows x cols grid; nodes within Chebyshev distance w are
/// adjacent. Node (r, c) has index r*cols + c.
GraphLaplacian grid_graph_laplacian(int rows, int cols, int w);

/// s_n = 1 / (n^(1-2/d) * log(n)^(1+2/d))
double laplacian_scale(int n, int d);

/// Precision (s_n L + tau2 I)^s of the graph-Laplacian spatial kernel. s is capped at 3.
Eigen::SparseMatrix<double> graph_laplacian_precision(const GraphLaplacian& lap, double tau2,
                                                      int s, int d);

struct SparseEigenpairs {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // n x k, sign-normalized
};

/// k smallest eigenpairs of a sparse symmetric PSD matrix by shift-invert subspace
/// iteration from a seeded random start block.
SparseEigenpairs smallest_eigenpairs(const Eigen::SparseMatrix<double>& a, int k,
                                     std::uint64_t seed, double tol = 1e-9);

/// Mercer basis of the covariance (s_n L + tau2 I)^(-s). The eigenvectors are those of L,
/// so only the eigenvalues depend on tau2.
MercerBasis graph_laplacian_basis(const SparseEigenpairs& lap_eig, int n, double tau2, int s,
                                  int d);

}  // namespace stgp
