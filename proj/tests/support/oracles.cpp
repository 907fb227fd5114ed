#include "oracles.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

namespace oracle {

using stgp::HyperState;
using stgp::MercerBasis;
using stgp::PriorConfig;

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return k;
}

Eigen::MatrixXd random_spd(stgp::Rng& rng, int n) {
  const Eigen::MatrixXd a = rng.normal_matrix(n, n);
  return a * a.transpose() / n + 0.5 * Eigen::MatrixXd::Identity(n, n);
}

std::shared_ptr<MercerBasis> random_basis(stgp::Rng& rng, int I, int L) {
  auto b = std::make_shared<MercerBasis>();
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(rng.normal_matrix(I, I));
  b->phi = (qr.householderQ() * Eigen::MatrixXd::Identity(I, I)).leftCols(L);
  b->lambda0 = Eigen::VectorXd::LinSpaced(L, 2.0, 1.0);
  return b;
}

M2Instance random_m2(stgp::Rng& rng, int I, int J, int L, int K) {
  M2Instance m;
  m.I = I;
  m.J = J;
  m.L = L;
  m.K = K;
  m.c_t = random_spd(rng, J);
  m.basis = random_basis(rng, I, L);
  m.lambda = rng.normal_matrix(J, L);
  return m;
}

M2Instance random_m2(stgp::Rng& rng, int max_i, int max_j, int max_k) {
  auto pick = [&rng](int hi) { return 1 + static_cast<int>(rng.uniform() * hi); };
  const int I = pick(max_i);
  const int J = pick(max_j);
  const int L = pick(I);
  const int K = pick(max_k);
  return random_m2(rng, I, J, L, K);
}

Eigen::MatrixXd dense_cxt(const MercerBasis& b, const Eigen::MatrixXd& lambda) {
  const Eigen::Index I = b.phi.rows();
  const Eigen::Index J = lambda.rows();
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(I * J, I * J);
  for (Eigen::Index j = 0; j < J; ++j)
    for (Eigen::Index a = 0; a < I; ++a)
      for (Eigen::Index c2 = 0; c2 < I; ++c2) {
        double v = 0.0;
        for (Eigen::Index l = 0; l < b.phi.cols(); ++l) v += b.phi(a, l) * lambda(j, l) * lambda(j, l) * b.phi(c2, l);
        c(j * I + a, j * I + c2) = v;
      }
  return c;
}

Eigen::MatrixXd dense_m2_marginal(const Eigen::MatrixXd& c_t, const MercerBasis& b, const Eigen::MatrixXd& lambda,
                                  int K) {
  const Eigen::Index I = b.phi.rows();
  return kron(c_t, Eigen::MatrixXd::Identity(I, I)) + dense_cxt(b, lambda) / K;
}

Eigen::MatrixXd dense_cz(const Eigen::MatrixXd& c_t, const MercerBasis& b, const Eigen::MatrixXd& lambda) {
  const Eigen::Index I = b.phi.rows();
  const Eigen::Index J = lambda.rows();
  Eigen::MatrixXd c(I * J, I * J);
  for (Eigen::Index j = 0; j < J; ++j)
    for (Eigen::Index jp = 0; jp < J; ++jp)
      for (Eigen::Index a = 0; a < I; ++a)
        for (Eigen::Index a2 = 0; a2 < I; ++a2) {
          double v = 0.0;
          for (Eigen::Index l = 0; l < b.phi.cols(); ++l)
            v += b.phi(a, l) * lambda(j, l) * lambda(jp, l) * b.phi(a2, l);
          c(j * I + a, jp * I + a2) = c_t(j, jp) * v;
        }
  return c;
}

DensePosterior dense_m2_posterior(const M2Instance& m, const Eigen::VectorXd& ybar) {
  const Eigen::MatrixXd cxt = dense_cxt(*m.basis, m.lambda);
  const Eigen::MatrixXd pinv = cxt.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::MatrixXd prec = kron(m.c_t.inverse(), Eigen::MatrixXd::Identity(m.I, m.I)) + m.K * pinv;
  const Eigen::MatrixXd cov = Eigen::FullPivLU<Eigen::MatrixXd>(prec).inverse();
  return {cov * (m.K * (pinv * ybar)), cov};
}

double lu_logdet(const Eigen::MatrixXd& a) {
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  return lu.matrixLU().diagonal().array().abs().log().sum();
}

Eigen::VectorXd lu_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& v) {
  return Eigen::FullPivLU<Eigen::MatrixXd>(a).solve(v);
}

Eigen::MatrixXd dense_time_cov(const Eigen::VectorXd& t, double sigma2, double eta, double s) {
  const double rho = std::exp(eta);
  Eigen::MatrixXd c(t.size(), t.size());
  for (Eigen::Index a = 0; a < t.size(); ++a)
    for (Eigen::Index b = 0; b < t.size(); ++b)
      c(a, b) = sigma2 * (std::exp(-0.5 * std::pow(std::abs(t(a) - t(b)) / rho, s)) + (a == b ? 1e-9 : 0.0));
  return c;
}

double log_priors(const HyperState& s, const Eigen::VectorXd& times, const PriorConfig& p) {
  auto ig = [](double x, double a, double b) { return -(a + 1.0) * std::log(x) - b / x; };
  auto nm = [](double x, double m, double v) { return -0.5 * (x - m) * (x - m) / v; };
  double lp = 0.0;
  if (p.model == stgp::ModelKind::I) lp += ig(s.sigma2_eps, p.a[0], p.b[0]);
  lp += ig(s.sigma2_t, p.a[1], p.b[1]) + ig(s.sigma2_u, p.a[2], p.b[2]);
  lp += nm(s.eta_x, p.m[0], p.V[0]) + nm(s.eta_t, p.m[1], p.V[1]) + nm(s.eta_u, p.m[2], p.V[2]);
  const Eigen::MatrixXd c_u = dense_time_cov(times, s.sigma2_u, s.eta_u, p.s_exp);
  const Eigen::MatrixXd inv = c_u.inverse();
  const double J = static_cast<double>(s.U.rows());
  const double L = static_cast<double>(s.U.cols());
  double log_gamma = 0.0;
  for (int l = 1; l <= s.U.cols(); ++l) log_gamma += -p.kappa / 2.0 * std::log(static_cast<double>(l));
  lp += -J * log_gamma - 0.5 * L * lu_logdet(c_u) - 0.5 * (s.U.transpose() * inv * s.U).trace();
  return lp;
}

namespace {

Eigen::MatrixXd lambda_from(const HyperState& s, double kappa) {
  Eigen::MatrixXd lam = s.U;
  for (Eigen::Index l = 0; l < lam.cols(); ++l) lam.col(l) *= std::pow(static_cast<double>(l + 1), -kappa / 2.0);
  return lam;
}

Eigen::VectorXd trial_mean(const stgp::SpatioTemporalDataset& ds) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds.I()) * ds.J());
  for (const auto& y : ds.trials)
    for (int j = 0; j < ds.J(); ++j)
      for (int i = 0; i < ds.I(); ++i) m(j * ds.I() + i) += y(i, j);
  return m / ds.K();
}

}  // namespace

double dense_logpost_m2(const HyperState& s, const stgp::SpatioTemporalDataset& ds, const PriorConfig& p,
                        const MercerBasis& basis) {
  const int I = ds.I();
  const int J = ds.J();
  const int K = ds.K();
  const Eigen::MatrixXd lam = lambda_from(s, p.kappa);
  const Eigen::MatrixXd c_t = dense_time_cov(ds.time.times, s.sigma2_t, s.eta_t, p.s_exp);
  const Eigen::VectorXd ybar = trial_mean(ds);
  double ll = 0.0;
  if (K > 1) {
    double pld = 0.0;
    double quad = 0.0;
    for (int j = 0; j < J; ++j) {
      Eigen::MatrixXd blk = Eigen::MatrixXd::Zero(I, I);
      for (int l = 0; l < basis.L(); ++l) blk += lam(j, l) * lam(j, l) * basis.phi.col(l) * basis.phi.col(l).transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(blk);
      const Eigen::VectorXd ev = eig.eigenvalues();
      const double tol = 1e-9 * ev.cwiseAbs().maxCoeff();
      Eigen::MatrixXd pinv = Eigen::MatrixXd::Zero(I, I);
      for (int a = 0; a < I; ++a) {
        if (ev(a) > tol) {
          pld += std::log(ev(a));
          pinv += eig.eigenvectors().col(a) * eig.eigenvectors().col(a).transpose() / ev(a);
        }
      }
      for (int k = 0; k < K; ++k) {
        Eigen::VectorXd r(I);
        for (int i = 0; i < I; ++i) r(i) = ds.trials[k](i, j) - ybar(j * I + i);
        quad += r.dot(pinv * r);
      }
    }
    ll += -0.5 * (K - 1) * pld - 0.5 * quad;
  }
  const Eigen::MatrixXd cs = dense_m2_marginal(c_t, basis, lam, K);
  ll += -0.5 * lu_logdet(cs) - 0.5 * ybar.dot(lu_solve(cs, ybar));
  return ll + log_priors(s, ds.time.times, p);
}

double dense_logpost_m1(const HyperState& s, const stgp::SpatioTemporalDataset& ds, const PriorConfig& p,
                        const MercerBasis& basis) {
  const int I = ds.I();
  const int J = ds.J();
  const int K = ds.K();
  const Eigen::MatrixXd lam = lambda_from(s, p.kappa);
  const Eigen::MatrixXd c_t = dense_time_cov(ds.time.times, s.sigma2_t, s.eta_t, p.s_exp);
  const Eigen::VectorXd ybar = trial_mean(ds);
  double scatter = 0.0;
  for (const auto& y : ds.trials)
    for (int j = 0; j < J; ++j)
      for (int i = 0; i < I; ++i) scatter += (y(i, j) - ybar(j * I + i)) * (y(i, j) - ybar(j * I + i));
  Eigen::MatrixXd cs = dense_cz(c_t, basis, lam);
  cs.diagonal().array() += s.sigma2_eps / K;
  double ll = -0.5 * I * J * (K - 1) * std::log(s.sigma2_eps) - 0.5 * scatter / s.sigma2_eps;
  ll += -0.5 * lu_logdet(cs) - 0.5 * ybar.dot(lu_solve(cs, ybar));
  return ll + log_priors(s, ds.time.times, p);
}

double full_joint_loglik_m1(const HyperState& s, const stgp::SpatioTemporalDataset& ds, const PriorConfig& p,
                            const MercerBasis& basis) {
  const int n = ds.I() * ds.J();
  const int K = ds.K();
  const Eigen::MatrixXd lam = lambda_from(s, p.kappa);
  const Eigen::MatrixXd c_t = dense_time_cov(ds.time.times, s.sigma2_t, s.eta_t, p.s_exp);
  const Eigen::MatrixXd cz = dense_cz(c_t, basis, lam);
  Eigen::MatrixXd big = kron(Eigen::MatrixXd::Ones(K, K), cz);
  big.diagonal().array() += s.sigma2_eps;
  Eigen::VectorXd y(static_cast<Eigen::Index>(n) * K);
  for (int k = 0; k < K; ++k) y.segment(static_cast<Eigen::Index>(k) * n, n) = stgp::vec(ds.trials[k]);
  return -0.5 * lu_logdet(big) - 0.5 * y.dot(lu_solve(big, y));
}

LogpostInstance random_logpost_instance(stgp::Rng& rng, stgp::ModelKind model, int max_i, int max_j,
                                        int max_k) {
  auto pick = [&rng](int hi) { return 1 + static_cast<int>(rng.uniform() * hi); };
  const int I = 1 + pick(max_i - 1);
  const int J = pick(max_j);
  const int K = pick(max_k);
  LogpostInstance out;
  PriorConfig& p = out.prior;
  p.model = model;
  p.L = pick(I);
  p.kappa = rng.uniform(0.0, 3.0);
  for (int i = 0; i < 3; ++i) {
    p.a[i] = rng.uniform(1.0, 3.0);
    p.b[i] = rng.uniform(0.2, 2.0);
    p.m[i] = 0.3 * rng.normal();
    p.V[i] = rng.uniform(0.5, 2.0);
  }
  Eigen::VectorXd t(J);
  double acc = 0.0;
  for (int j = 0; j < J; ++j) {
    acc += rng.uniform(0.3, 1.0);
    t(j) = acc;
  }
  std::vector<Eigen::MatrixXd> y;
  for (int k = 0; k < K; ++k) y.push_back(rng.normal_matrix(I, J));
  out.ds = stgp::SpatioTemporalDataset(stgp::SpaceGrid::linspace(-1.0, 1.0, I), stgp::TimeGrid(t), y);
  HyperState& s = out.state;
  s.sigma2_eps = rng.uniform(0.3, 2.0);
  s.sigma2_t = rng.uniform(0.3, 2.0);
  s.sigma2_u = rng.uniform(0.3, 2.0);
  s.eta_x = 0.3 * rng.normal();
  s.eta_t = 0.3 * rng.normal();
  s.eta_u = 0.3 * rng.normal();
  s.U = rng.normal_matrix(J, p.L);
  return out;
}

Eigen::VectorXd dense_lambda_at(const stgp::HyperScalars& h, const Eigen::MatrixXd& lambda,
                                const Eigen::VectorXd& times, double t_star, double s_exp) {
  const Eigen::MatrixXd c_u = dense_time_cov(times, h.sigma2_u, h.eta_u, s_exp);
  const double rho = std::exp(h.eta_u);
  Eigen::VectorXd c(times.size());
  for (Eigen::Index j = 0; j < times.size(); ++j)
    c(j) = h.sigma2_u * (std::exp(-0.5 * std::pow(std::abs(t_star - times(j)) / rho, s_exp)) +
                         (times(j) == t_star ? 1e-9 : 0.0));
  const Eigen::VectorXd w = lu_solve(c_u, c);
  return lambda.transpose() * w;
}

CondGaussian dense_predict_m2(const stgp::HyperScalars& h, const Eigen::MatrixXd& lambda,
                              const stgp::SpatioTemporalDataset& ds, const PriorConfig& prior,
                              const MercerBasis& basis, int i, double t_star) {
  const int I = ds.I();
  const int J = ds.J();
  const Eigen::VectorXd& t = ds.time.times;
  const Eigen::MatrixXd c_t = dense_time_cov(t, h.sigma2_t, h.eta_t, prior.s_exp);
  const Eigen::MatrixXd cs = dense_m2_marginal(c_t, basis, lambda, ds.K());
  const double rho = std::exp(h.eta_t);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(I) * J);
  for (int j = 0; j < J; ++j)
    c(j * I + i) = h.sigma2_t * (std::exp(-0.5 * std::pow(std::abs(t_star - t(j)) / rho, prior.s_exp)) +
                                 (t(j) == t_star ? 1e-9 : 0.0));
  const Eigen::VectorXd ybar = trial_mean(ds);
  CondGaussian out;
  out.mean = c.dot(lu_solve(cs, ybar));
  out.var = h.sigma2_t * (1.0 + 1e-9) - c.dot(lu_solve(cs, c));
  return out;
}

CondGaussian dense_predict_m1(const stgp::HyperScalars& h, const Eigen::MatrixXd& lambda,
                              const stgp::SpatioTemporalDataset& ds, const PriorConfig& prior,
                              const MercerBasis& basis, const Eigen::VectorXd& phi_star, double t_star) {
  const int I = ds.I();
  const int J = ds.J();
  const int L = basis.L();
  const Eigen::VectorXd& t = ds.time.times;
  const Eigen::VectorXd lam_star = dense_lambda_at(h, lambda, t, t_star, prior.s_exp);
  const Eigen::MatrixXd c_t = dense_time_cov(t, h.sigma2_t, h.eta_t, prior.s_exp);
  Eigen::MatrixXd cs = dense_cz(c_t, basis, lambda);
  cs.diagonal().array() += h.sigma2_eps / ds.K();
  const double rho = std::exp(h.eta_t);
  Eigen::VectorXd c(static_cast<Eigen::Index>(I) * J);
  for (int j = 0; j < J; ++j) {
    const double ct = h.sigma2_t * (std::exp(-0.5 * std::pow(std::abs(t_star - t(j)) / rho, prior.s_exp)) +
                                    (t(j) == t_star ? 1e-9 : 0.0));
    for (int i = 0; i < I; ++i) {
      double v = 0.0;
      for (int l = 0; l < L; ++l) v += phi_star(l) * lam_star(l) * lambda(j, l) * basis.phi(i, l);
      c(j * I + i) = ct * v;
    }
  }
  double prior_var = 0.0;
  for (int l = 0; l < L; ++l) prior_var += phi_star(l) * phi_star(l) * lam_star(l) * lam_star(l);
  prior_var *= h.sigma2_t * (1.0 + 1e-9);
  const Eigen::VectorXd ybar = trial_mean(ds);
  CondGaussian out;
  out.mean = c.dot(lu_solve(cs, ybar));
  out.var = prior_var - c.dot(lu_solve(cs, c));
  return out;
}

Moments moments(const std::vector<double>& x, int batches) {
  Moments m;
  const double n = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= n;
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= n - 1.0;
  const std::size_t bs = x.size() / batches;
  std::vector<double> bm(batches, 0.0);
  std::vector<double> bv(batches, 0.0);
  for (int b = 0; b < batches; ++b) {
    for (std::size_t i = 0; i < bs; ++i) bm[b] += x[b * bs + i];
    bm[b] /= static_cast<double>(bs);
    for (std::size_t i = 0; i < bs; ++i) bv[b] += (x[b * bs + i] - m.mean) * (x[b * bs + i] - m.mean);
    bv[b] /= static_cast<double>(bs);
  }
  double sm = 0.0;
  double sv = 0.0;
  for (int b = 0; b < batches; ++b) {
    sm += (bm[b] - m.mean) * (bm[b] - m.mean);
    sv += (bv[b] - m.var) * (bv[b] - m.var);
  }
  m.se_mean = std::sqrt(sm / (batches - 1) / batches);
  m.se_var = std::sqrt(sv / (batches - 1) / batches);
  return m;
}

}  // namespace oracle
