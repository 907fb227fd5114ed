#include "stgp/kronalg.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Eigenvalues>

#include "stgp/error.hpp"

namespace stgp {

Eigen::LLT<Eigen::MatrixXd> checked_llt(const Eigen::MatrixXd& a, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "Cholesky factorization of " << what << " (" << a.rows() << "x" << a.cols()
        << ") failed";
    if (a.rows() > 0 && a.allFinite()) {
      msg << "; diagonal range [" << a.diagonal().minCoeff() << ", " << a.diagonal().maxCoeff()
          << "]";
      if (a.rows() <= 512) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a, Eigen::EigenvaluesOnly);
        const double lo = eig.eigenvalues().minCoeff();
        const double hi = eig.eigenvalues().maxCoeff();
        msg << ", eigenvalue range [" << lo << ", " << hi << "]";
      }
    } else {
      msg << "; matrix has non-finite entries";
    }
    throw NumericalError(msg.str());
  }
  return llt;
}

double llt_logdet(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

namespace {

using MatMap = Eigen::Map<const Eigen::MatrixXd>;

void check_dims(const Eigen::MatrixXd& c_t, const MercerBasis& basis, const Eigen::MatrixXd& lambda) {
  if (c_t.rows() != c_t.cols()) throw DomainError("C_t must be square");
  if (lambda.rows() != c_t.rows()) throw DomainError("Lambda rows must equal J");
  if (lambda.cols() != basis.L()) throw DomainError("Lambda columns must equal L");
}

}  // namespace

Model2Marginal::Model2Marginal(Eigen::MatrixXd c_t, std::shared_ptr<const MercerBasis> basis,
                               Eigen::MatrixXd lambda, int K)
    : c_t_(std::move(c_t)), basis_(std::move(basis)), lambda_(std::move(lambda)), K_(K) {
  if (!basis_) throw DomainError("Model2Marginal needs a basis");
  if (K_ < 1) throw DomainError("K must be >= 1");
  check_dims(c_t_, *basis_, lambda_);
  ct_llt_ = checked_llt(c_t_, "C_t");
  const double ct_logdet = llt_logdet(ct_llt_);
  const double inv_k = 1.0 / K_;
  inner_.reserve(L());
  logdet_ = (I() - L()) * ct_logdet;
  for (int l = 0; l < L(); ++l) {
    Eigen::MatrixXd a = c_t_;
    a.diagonal() += inv_k * lambda_.col(l).array().square().matrix();
    inner_.push_back(checked_llt(a, "C_t + K^-1 diag(lambda_l^2)"));
    logdet_ += llt_logdet(inner_.back());
  }
}

Eigen::VectorXd Model2Marginal::inverse_apply(const Eigen::VectorXd& v) const {
  if (v.size() != static_cast<Eigen::Index>(I()) * J()) throw DomainError("vector length must be IJ");
  const MatMap vm(v.data(), I(), J());
  const Eigen::MatrixXd& phi = basis_->phi;
  const Eigen::MatrixXd vt = phi.transpose() * vm;  // L x J
  // (C_t^{-1} (x) P) v  ->  (P V) C_t^{-1}
  const Eigen::MatrixXd resid = vm - phi * vt;
  Eigen::MatrixXd out = ct_llt_.solve(resid.transpose()).transpose();
  Eigen::MatrixXd st(L(), J());
  for (int l = 0; l < L(); ++l) st.row(l) = inner_[l].solve(vt.row(l).transpose()).transpose();
  out.noalias() += phi * st;
  return Eigen::Map<Eigen::VectorXd>(out.data(), out.size());
}

double Model2Marginal::inverse_quad_projected(const Eigen::MatrixXd& vt,
                                              const Eigen::MatrixXd& complement_gram) const {
  double q = ct_llt_.solve(complement_gram).trace();
  for (int l = 0; l < L(); ++l) {
    const Eigen::VectorXd y = vt.row(l).transpose();
    q += y.dot(inner_[l].solve(y));
  }
  return q;
}

namespace {

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

Model2Posterior::Model2Posterior(const Model2Marginal& m, const Eigen::VectorXd& ybar)
    : phi_(m.basis().phi), I_(m.I()), J_(m.J()), c_t_(m.c_t()) {
  if (ybar.size() != static_cast<Eigen::Index>(I_) * J_) throw DomainError("ybar length must be IJ");
  c_t_sqrt_ = symmetric_sqrt(c_t_);
  const double inv_k = 1.0 / m.K();
  const MatMap ym(ybar.data(), I_, J_);
  const Eigen::MatrixXd yt = phi_.transpose() * ym;  // L x J
  Eigen::MatrixXd st(m.L(), J_);
  b_.reserve(m.L());
  b_sqrt_.reserve(m.L());
  for (int l = 0; l < m.L(); ++l) {
    const auto& inner = m.inner_factor(l);
    const Eigen::VectorXd d = inv_k * m.lambda().col(l).array().square().matrix();
    // B_l = C_t A_l^{-1} D_l; equals (D_l^{-1} + C_t^{-1})^{-1} without inverting D_l.
    Eigen::MatrixXd b = c_t_ * inner.solve(Eigen::MatrixXd(d.asDiagonal()));
    b = 0.5 * (b + b.transpose()).eval();
    b_sqrt_.push_back(symmetric_sqrt(b));
    b_.push_back(std::move(b));
    // B_l D_l^{-1} y_l = C_t A_l^{-1} y_l
    st.row(l) = (c_t_ * inner.solve(yt.row(l).transpose())).transpose();
  }
  Eigen::MatrixXd mean = phi_ * st;
  mean_ = Eigen::Map<Eigen::VectorXd>(mean.data(), mean.size());
}

Eigen::VectorXd Model2Posterior::apply(const Eigen::MatrixXd& time_op,
                                       const std::vector<Eigen::MatrixXd>& blocks,
                                       const Eigen::VectorXd& v) const {
  if (v.size() != static_cast<Eigen::Index>(I_) * J_) throw DomainError("vector length must be IJ");
  const MatMap vm(v.data(), I_, J_);
  const Eigen::MatrixXd vt = phi_.transpose() * vm;
  const Eigen::MatrixXd resid = vm - phi_ * vt;
  Eigen::MatrixXd out = resid * time_op;  // time_op is symmetric
  Eigen::MatrixXd st(vt.rows(), J_);
  for (Eigen::Index l = 0; l < vt.rows(); ++l) st.row(l) = vt.row(l) * blocks[l];
  out.noalias() += phi_ * st;
  return Eigen::Map<Eigen::VectorXd>(out.data(), out.size());
}

Eigen::VectorXd Model2Posterior::cov_apply(const Eigen::VectorXd& v) const {
  return apply(c_t_, b_, v);
}

Eigen::VectorXd Model2Posterior::cov_sqrt_apply(const Eigen::VectorXd& v) const {
  return apply(c_t_sqrt_, b_sqrt_, v);
}

Eigen::VectorXd Model2Posterior::draw(Rng& rng) const {
  return mean_ + cov_sqrt_apply(rng.normal_vector(mean_.size()));
}

Model2Posterior m2_posterior_mean_cov_apply(const Model2Marginal& m, const Eigen::VectorXd& ybar) {
  return Model2Posterior(m, ybar);
}

Eigen::MatrixXd m1_prior_cov(const Eigen::MatrixXd& c_t, const MercerBasis& basis,
                             const Eigen::MatrixXd& lambda, std::size_t dense_cap) {
  check_dims(c_t, basis, lambda);
  const Eigen::Index I = basis.I();
  const Eigen::Index J = c_t.rows();
  if (static_cast<std::size_t>(I * J) > dense_cap) {
    throw CapacityError("Model I needs a dense " + std::to_string(I * J) + "x" +
                        std::to_string(I * J) + " covariance, over the cap of " +
                        std::to_string(dense_cap));
  }
  // G_j = Phi diag(lambda_j); block (j, j') = C_t(j, j') G_j G_j'^T.
  std::vector<Eigen::MatrixXd> g(J);
  for (Eigen::Index j = 0; j < J; ++j) g[j] = basis.phi * lambda.row(j).transpose().asDiagonal();
  Eigen::MatrixXd cz(I * J, I * J);
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index jp = 0; jp <= j; ++jp) {
      Eigen::MatrixXd blk = c_t(j, jp) * (g[j] * g[jp].transpose());
      if (jp == j) blk = 0.5 * (blk + blk.transpose()).eval();
      cz.block(j * I, jp * I, I, I) = blk;
      if (jp != j) cz.block(jp * I, j * I, I, I) = blk.transpose();
    }
  }
  return cz;
}

Model1Marginal m1_assemble(Eigen::MatrixXd c_t, std::shared_ptr<const MercerBasis> basis,
                           Eigen::MatrixXd lambda, double sigma2_eps, int K, std::size_t dense_cap) {
  if (!basis) throw DomainError("m1_assemble needs a basis");
  if (K < 1) throw DomainError("K must be >= 1");
  if (!(sigma2_eps > 0.0)) throw DomainError("sigma2_eps must be positive");
  Model1Marginal m;
  m.cz = m1_prior_cov(c_t, *basis, lambda, dense_cap);
  m.c_t = std::move(c_t);
  m.basis = std::move(basis);
  m.lambda = std::move(lambda);
  m.sigma2_eps = sigma2_eps;
  m.K = K;
  m.dense = m.cz;
  m.dense.diagonal().array() += sigma2_eps / K;
  return m;
}

SolveLogdet m1_solve_logdet(const Model1Marginal& m, const Eigen::VectorXd& v) {
  if (v.size() != m.dense.rows()) throw DomainError("vector length must be IJ");
  const auto llt = checked_llt(m.dense, "Model I marginal");
  return {llt.solve(v), llt_logdet(llt)};
}

}  // namespace stgp
