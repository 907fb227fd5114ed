#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "stgp/kernels.hpp"
#include "stgp/samplers.hpp"

namespace stgp {

/// Kronecker-sum marginal covariance
///
///   C* = C_t (x) I_x + K^{-1} C_{x|t},   C_{x|t} = (I_t (x) Phi) diag(rowvec(Lambda^2)) (I_t (x) Phi^T)
///
/// Vectors of length IJ are stacked space-fastest. With P = I - Phi Phi^T,
///
///   C*^{-1} = C_t^{-1} (x) P + (I_t (x) Phi) [K^{-1} diag(rowvec(Lambda^2)) + C_t (x) I_L]^{-1} (I_t (x) Phi^T)
///
/// and the bracketed JL x JL system splits into L independent J x J blocks
/// A_l = C_t + K^{-1} diag(Lambda(:, l)^2). All of them are factored on construction;
/// nothing of size IJ x IJ is ever formed.
class Model2Marginal {
 public:
  Model2Marginal(Eigen::MatrixXd c_t, std::shared_ptr<const MercerBasis> basis,
                 Eigen::MatrixXd lambda, int K);

  int I() const { return basis_->I(); }
  int J() const { return static_cast<int>(c_t_.rows()); }
  int L() const { return basis_->L(); }
  int K() const { return K_; }

  const Eigen::MatrixXd& c_t() const { return c_t_; }
  const MercerBasis& basis() const { return *basis_; }
  const Eigen::MatrixXd& lambda() const { return lambda_; }

  /// C*^{-1} v
  Eigen::VectorXd inverse_apply(const Eigen::VectorXd& v) const;
  /// log det C* = sum_l log det A_l + (I - L) log det C_t
  double logdet() const { return logdet_; }

  /// v^T C*^{-1} v from the projections Vt = Phi^T V (L x J) and the Gram matrix of the
  /// orthogonal remainder, G = V^T V - Vt^T Vt (J x J), where V is v reshaped to I x J.
  double inverse_quad_projected(const Eigen::MatrixXd& vt, const Eigen::MatrixXd& complement_gram) const;

  const Eigen::LLT<Eigen::MatrixXd>& c_t_factor() const { return ct_llt_; }
  const Eigen::LLT<Eigen::MatrixXd>& inner_factor(int l) const { return inner_[l]; }

 private:
  Eigen::MatrixXd c_t_;
  std::shared_ptr<const MercerBasis> basis_;
  Eigen::MatrixXd lambda_;  // J x L
  int K_;
  Eigen::LLT<Eigen::MatrixXd> ct_llt_;
  std::vector<Eigen::LLT<Eigen::MatrixXd>> inner_;
  double logdet_ = 0.0;
};

/// Analytic posterior of vec(M) under Model II,
///
///   C' = C_t (x) P + (I_t (x) Phi) blockdiag_l(B_l) (I_t (x) Phi^T),  B_l = C_t A_l^{-1} D_l,
///   M' = C' C_{x|t}^+ K ybar,
///
/// with D_l = K^{-1} diag(Lambda(:, l)^2). Components of ybar outside span(Phi) carry no
/// likelihood information and receive the prior mean (zero).
class Model2Posterior {
 public:
  Model2Posterior(const Model2Marginal& m, const Eigen::VectorXd& ybar);

  const Eigen::VectorXd& mean() const { return mean_; }
  Eigen::VectorXd cov_apply(const Eigen::VectorXd& v) const;
  /// Symmetric square root: cov_sqrt_apply(cov_sqrt_apply(v)) == cov_apply(v).
  Eigen::VectorXd cov_sqrt_apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd draw(Rng& rng) const;

 private:
  Eigen::MatrixXd phi_;
  int I_ = 0;
  int J_ = 0;
  Eigen::MatrixXd c_t_;
  Eigen::MatrixXd c_t_sqrt_;
  std::vector<Eigen::MatrixXd> b_;
  std::vector<Eigen::MatrixXd> b_sqrt_;
  Eigen::VectorXd mean_;

  Eigen::VectorXd apply(const Eigen::MatrixXd& time_op, const std::vector<Eigen::MatrixXd>& blocks,
                        const Eigen::VectorXd& v) const;
};

Model2Posterior m2_posterior_mean_cov_apply(const Model2Marginal& m, const Eigen::VectorXd& ybar);

inline constexpr std::size_t kDefaultDenseCap = 4096;

/// Kronecker-product marginal C* = C_z + K^{-1} sigma2_eps I with
/// C_z block (j, j') = C_t(j, j') Phi diag(lambda_j) diag(lambda_j') Phi^T. Always dense.
struct Model1Marginal {
  Eigen::MatrixXd c_t;
  std::shared_ptr<const MercerBasis> basis;
  Eigen::MatrixXd lambda;
  double sigma2_eps = 1.0;
  int K = 1;
  Eigen::MatrixXd cz;     // prior covariance of vec(M)
  Eigen::MatrixXd dense;  // cz + K^{-1} sigma2_eps I
};

/// C_z alone. Throws CapacityError when I*J exceeds `dense_cap`.
Eigen::MatrixXd m1_prior_cov(const Eigen::MatrixXd& c_t, const MercerBasis& basis,
                             const Eigen::MatrixXd& lambda, std::size_t dense_cap = kDefaultDenseCap);

Model1Marginal m1_assemble(Eigen::MatrixXd c_t, std::shared_ptr<const MercerBasis> basis,
                           Eigen::MatrixXd lambda, double sigma2_eps, int K,
                           std::size_t dense_cap = kDefaultDenseCap);

struct SolveLogdet {
  Eigen::VectorXd solve;
  double logdet = 0.0;
};

SolveLogdet m1_solve_logdet(const Model1Marginal& m, const Eigen::VectorXd& v);

/// Cholesky of a dense SPD matrix; throws NumericalError with a diagnostic on failure.
Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& a, const char* what);

double llt_logdet(const Eigen::LLT<Eigen::MatrixXd>& llt);

}  // namespace stgp
