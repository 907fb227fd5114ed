#include "stgp/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "stgp/error.hpp"

namespace stgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::uint64_t kLaplacianSeed = 0x5eedULL;

// RNG streams per Gibbs block.
enum Stream : std::uint64_t {
  kInit = 0,
  kSigmaEps = 1,
  kSigmaT = 2,
  kSigmaU = 3,
  kEtaX = 4,
  kEtaT = 5,
  kEtaU = 6,
  kStreamU = 7,
  kStreamM = 8,
};

Rng block_rng(std::uint64_t seed, long sweep, Stream s) {
  return Rng(seed, static_cast<std::uint64_t>(sweep + 1) * 16 + s);
}

double prior_mean_or_one(double a, double b) { return a > 1.0 ? b / (a - 1.0) : 1.0; }

double log_ig(double x, double a, double b) { return -(a + 1.0) * std::log(x) - b / x; }

double log_normal(double x, double m, double v) { return -0.5 * (x - m) * (x - m) / v; }

}  // namespace

std::string to_string(ModelKind m) { return m == ModelKind::I ? "I" : "II"; }

std::string to_string(SpatialKernelKind k) {
  return k == SpatialKernelKind::stationary ? "stationary" : "graph_laplacian";
}

ModelKind parse_model_kind(const std::string& s) {
  if (s == "I" || s == "1") return ModelKind::I;
  if (s == "II" || s == "2") return ModelKind::II;
  throw ConfigError("model must be \"I\" or \"II\", got \"" + s + "\"");
}

SpatialKernelKind parse_spatial_kernel(const std::string& s) {
  if (s == "stationary") return SpatialKernelKind::stationary;
  if (s == "graph_laplacian") return SpatialKernelKind::graph_laplacian;
  throw ConfigError("spatial_kernel must be \"stationary\" or \"graph_laplacian\", got \"" + s + "\"");
}

void PriorConfig::validate() const {
  for (int i = 0; i < 3; ++i) {
    if (!(a[i] > 0.0) || !std::isfinite(a[i])) throw ConfigError("prior.a entries must be positive");
    if (!(b[i] > 0.0) || !std::isfinite(b[i])) throw ConfigError("prior.b entries must be positive");
    if (!std::isfinite(m[i])) throw ConfigError("prior.m entries must be finite");
    if (!(V[i] > 0.0) || !std::isfinite(V[i])) throw ConfigError("prior.V entries must be positive");
  }
  if (!std::isfinite(kappa)) throw ConfigError("prior.kappa must be finite");
  if (L < 1) throw ConfigError("prior.L must be >= 1");
  if (!(s_exp > 0.0 && s_exp <= 2.0)) throw ConfigError("prior.s_exp must lie in (0, 2]");
  if (spatial_kernel == SpatialKernelKind::graph_laplacian) {
    if (graph.rows < 2 || graph.cols < 2) throw ConfigError("prior.graph.rows and cols must be >= 2");
    if (graph.w < 1) throw ConfigError("prior.graph.w must be >= 1");
    if (graph.s < 1 || graph.s > 3) throw ConfigError("prior.graph.s must lie in 1..3");
  }
}

void RunParams::validate() const {
  if (n_iter < 0) throw ConfigError("run.n_iter must be >= 0");
  if (burn_in < 0 || burn_in > n_iter) throw ConfigError("run.burn_in must lie in 0..n_iter");
  if (thin < 1) throw ConfigError("run.thin must be >= 1");
}

Eigen::MatrixXd lambda_of(const HyperState& s, double kappa) {
  return s.U * decay_weights(kappa, static_cast<int>(s.U.cols())).asDiagonal();
}

Eigen::MatrixXd time_covariance(const Eigen::VectorXd& times, double sigma2, double eta, double s_exp) {
  Eigen::MatrixXd k = stationary_kernel_1d(times, {1.0, std::exp(eta), s_exp});
  add_jitter(k);
  return sigma2 * k;
}

Eigen::RowVectorXd time_cross_covariance(double t_new, const Eigen::VectorXd& times, double sigma2,
                                         double eta, double s_exp) {
  Eigen::RowVectorXd k = stationary_cross_1d(t_new, times, {1.0, std::exp(eta), s_exp});
  for (Eigen::Index j = 0; j < times.size(); ++j)
    if (times(j) == t_new) k(j) += kJitter;
  return sigma2 * k;
}

// ---------------------------------------------------------------------------
// Spatial model

SpatialModel::SpatialModel(const SpaceGrid& space, const PriorConfig& prior)
    : points_(space.points), L_(prior.L), kind_(prior.spatial_kernel), s_exp_(prior.s_exp),
      graph_(prior.graph) {
  if (L_ < 1 || L_ > I()) {
    throw ConfigError("prior.L=" + std::to_string(L_) + " must lie in 1..I=" + std::to_string(I()));
  }
  if (kind_ == SpatialKernelKind::graph_laplacian) {
    if (graph_.rows * graph_.cols != I()) {
      throw ConfigError("graph grid " + std::to_string(graph_.rows) + "x" + std::to_string(graph_.cols) +
                        " does not match I=" + std::to_string(I()));
    }
    const GraphLaplacian lap = grid_graph_laplacian(graph_.rows, graph_.cols, graph_.w);
    lap_eig_ = std::make_shared<const SparseEigenpairs>(smallest_eigenpairs(lap.entries, L_, kLaplacianSeed));
  }
}

std::shared_ptr<const MercerBasis> SpatialModel::basis(double eta_x) const {
  if (cached_ && cached_eta_ == eta_x) return cached_;
  std::shared_ptr<const MercerBasis> b;
  if (kind_ == SpatialKernelKind::stationary) {
    const Eigen::MatrixXd cx = stationary_kernel(points_, {1.0, std::exp(eta_x), s_exp_});
    b = std::make_shared<const MercerBasis>(mercer_basis(cx, L_));
  } else {
    b = std::make_shared<const MercerBasis>(
        graph_laplacian_basis(*lap_eig_, I(), std::exp(eta_x), graph_.s, 2));
  }
  cached_eta_ = eta_x;
  cached_ = b;
  return b;
}

Eigen::VectorXd SpatialModel::cross_kernel(const Eigen::VectorXd& x_new, double eta_x) const {
  if (kind_ != SpatialKernelKind::stationary) {
    throw DomainError("static cross-kernel is only available for the stationary spatial kernel");
  }
  if (x_new.size() != points_.cols()) throw DomainError("new location has the wrong dimension");
  return stationary_cross_kernel(points_, x_new.transpose(), {1.0, std::exp(eta_x), s_exp_}).col(0);
}

ProjectedStats project_stats(const MercerBasis& basis, const SufficientStats& stats) {
  const Eigen::Index I = stats.I;
  const Eigen::Index J = stats.J;
  if (basis.I() != I) throw DomainError("basis size does not match the data");
  ProjectedStats ps;
  const Eigen::Map<const Eigen::MatrixXd> yb(stats.ybar.data(), I, J);
  ps.ybar_t = basis.phi.transpose() * yb;
  ps.complement = yb.transpose() * yb - ps.ybar_t.transpose() * ps.ybar_t;
  ps.q = Eigen::MatrixXd::Zero(J, basis.L());
  for (Eigen::Index k = 0; k < stats.centered.cols(); ++k) {
    const Eigen::Map<const Eigen::MatrixXd> yk(stats.centered.col(k).data(), I, J);
    ps.q += (basis.phi.transpose() * yk).transpose().array().square().matrix();
  }
  return ps;
}

// ---------------------------------------------------------------------------
// Log-posterior pieces

double loglik_m2(const Eigen::MatrixXd& c_t, std::shared_ptr<const MercerBasis> basis,
                 const Eigen::MatrixXd& lambda, const ProjectedStats& ps, int K) {
  double ll = 0.0;
  if (K > 1) {
    double pseudo_logdet = 0.0;
    double quad = 0.0;
    for (Eigen::Index l = 0; l < lambda.cols(); ++l) {
      for (Eigen::Index j = 0; j < lambda.rows(); ++j) {
        double l2 = lambda(j, l) * lambda(j, l);
        if (l2 < kLambdaFloor) {
          if (ps.q(j, l) > 0.0) return kNegInf;
          l2 = kLambdaFloor;
        }
        pseudo_logdet += std::log(l2);
        quad += ps.q(j, l) / l2;
      }
    }
    ll -= 0.5 * (K - 1) * pseudo_logdet + 0.5 * quad;
  }
  try {
    const Model2Marginal m(c_t, std::move(basis), lambda, K);
    ll -= 0.5 * m.logdet() + 0.5 * m.inverse_quad_projected(ps.ybar_t, ps.complement);
  } catch (const Error&) {
    return kNegInf;
  }
  return std::isfinite(ll) ? ll : kNegInf;
}

double loglik_m1(const Eigen::MatrixXd& c_t, std::shared_ptr<const MercerBasis> basis,
                 const Eigen::MatrixXd& lambda, double sigma2_eps, const SufficientStats& stats) {
  const int K = stats.K;
  const double IJ = static_cast<double>(stats.I) * stats.J;
  double ll = 0.0;
  if (K > 1) {
    // sum_k |vec(Y_k) - ybar|^2 = K (ysq - |ybar|^2)
    const double scatter = stats.centered.squaredNorm();
    ll -= 0.5 * IJ * (K - 1) * std::log(sigma2_eps) + 0.5 * scatter / sigma2_eps;
  }
  try {
    const Model1Marginal m = m1_assemble(c_t, std::move(basis), lambda, sigma2_eps, K);
    const SolveLogdet sl = m1_solve_logdet(m, stats.ybar);
    ll -= 0.5 * sl.logdet + 0.5 * stats.ybar.dot(sl.solve);
  } catch (const CapacityError&) {
    throw;
  } catch (const Error&) {
    return kNegInf;
  }
  return std::isfinite(ll) ? ll : kNegInf;
}

double log_lambda_prior(const HyperState& s, const Eigen::VectorXd& times, const PriorConfig& prior) {
  const Eigen::Index J = s.U.rows();
  const Eigen::Index L = s.U.cols();
  try {
    const Eigen::MatrixXd c_u = time_covariance(times, s.sigma2_u, s.eta_u, prior.s_exp);
    const auto llt = checked_llt(c_u, "C_u");
    const Eigen::VectorXd gamma = decay_weights(prior.kappa, static_cast<int>(L));
    const double quad = llt.matrixL().solve(s.U).squaredNorm();
    const double v = -static_cast<double>(J) * gamma.array().log().sum() -
                     0.5 * static_cast<double>(L) * llt_logdet(llt) - 0.5 * quad;
    return std::isfinite(v) ? v : kNegInf;
  } catch (const Error&) {
    return kNegInf;
  }
}

double log_hyper_prior(const HyperScalars& h, const PriorConfig& prior) {
  double lp = 0.0;
  if (prior.model == ModelKind::I) lp += log_ig(h.sigma2_eps, prior.a[kEps], prior.b[kEps]);
  lp += log_ig(h.sigma2_t, prior.a[kT], prior.b[kT]);
  lp += log_ig(h.sigma2_u, prior.a[kU], prior.b[kU]);
  lp += log_normal(h.eta_x, prior.m[kX], prior.V[kX]);
  lp += log_normal(h.eta_t, prior.m[kT], prior.V[kT]);
  lp += log_normal(h.eta_u, prior.m[kU], prior.V[kU]);
  return std::isfinite(lp) ? lp : kNegInf;
}

namespace {

double safe_time_cov_loglik(const HyperState& s, const Eigen::VectorXd& times, const PriorConfig& prior,
                            const std::shared_ptr<const MercerBasis>& basis, const ProjectedStats* ps,
                            const SufficientStats& stats) {
  Eigen::MatrixXd c_t;
  try {
    c_t = time_covariance(times, s.sigma2_t, s.eta_t, prior.s_exp);
  } catch (const Error&) {
    return kNegInf;
  }
  const Eigen::MatrixXd lambda = lambda_of(s, prior.kappa);
  if (prior.model == ModelKind::II) return loglik_m2(c_t, basis, lambda, *ps, stats.K);
  return loglik_m1(c_t, basis, lambda, s.sigma2_eps, stats);
}

double logpost_impl(const HyperState& s, const SufficientStats& stats, const Eigen::VectorXd& times,
                    const PriorConfig& prior, const SpatialModel& space, bool include_likelihood) {
  if (s.U.rows() != stats.J || s.U.cols() != prior.L) throw DomainError("U must be J x L");
  double lp = log_hyper_prior(s, prior) + log_lambda_prior(s, times, prior);
  if (!std::isfinite(lp)) return kNegInf;
  if (!include_likelihood) return lp;
  std::shared_ptr<const MercerBasis> basis;
  try {
    basis = space.basis(s.eta_x);
  } catch (const Error&) {
    return kNegInf;
  }
  ProjectedStats ps;
  if (prior.model == ModelKind::II) ps = project_stats(*basis, stats);
  lp += safe_time_cov_loglik(s, times, prior, basis, &ps, stats);
  return std::isfinite(lp) ? lp : kNegInf;
}

}  // namespace

double logpost_m2(const HyperState& s, const SufficientStats& stats, const Eigen::VectorXd& times,
                  const PriorConfig& prior, const SpatialModel& space, bool include_likelihood) {
  if (prior.model != ModelKind::II) throw DomainError("logpost_m2 needs a Model II prior");
  return logpost_impl(s, stats, times, prior, space, include_likelihood);
}

double logpost_m1(const HyperState& s, const SufficientStats& stats, const Eigen::VectorXd& times,
                  const PriorConfig& prior, const SpatialModel& space, bool include_likelihood) {
  if (prior.model != ModelKind::I) throw DomainError("logpost_m1 needs a Model I prior");
  return logpost_impl(s, stats, times, prior, space, include_likelihood);
}

// ---------------------------------------------------------------------------
// Gibbs sampler

Chain::Chain(const SufficientStats& stats, const Eigen::VectorXd& times, const PriorConfig& prior,
             const SpatialModel& space, bool use_likelihood)
    : stats_(stats), times_(times), prior_(prior), space_(space), use_likelihood_(use_likelihood) {
  prior_.validate();
  if (times_.size() != stats_.J) throw DomainError("time grid does not match the data");
  if (space_.I() != stats_.I) throw DomainError("space grid does not match the data");
  gamma_ = decay_weights(prior_.kappa, prior_.L);
  current_ = view(prior_.m[kX]);
}

Chain::BasisView Chain::view(double eta_x) const {
  if (current_.basis && (current_.eta_x == eta_x || !space_.basis_depends_on_eta())) {
    BasisView v = current_;
    v.eta_x = eta_x;
    return v;
  }
  BasisView v;
  v.eta_x = eta_x;
  v.basis = space_.basis(eta_x);
  if (prior_.model == ModelKind::II && use_likelihood_) {
    v.ps = std::make_shared<const ProjectedStats>(project_stats(*v.basis, stats_));
  }
  return v;
}

double Chain::loglik(const HyperState& s, const BasisView& v) const {
  if (!use_likelihood_) return 0.0;
  return safe_time_cov_loglik(s, times_, prior_, v.basis, v.ps.get(), stats_);
}

double Chain::logpost(const HyperState& s) const {
  return logpost_impl(s, stats_, times_, prior_, space_, use_likelihood_);
}

HyperState Chain::initial_state(std::uint64_t seed) const {
  HyperState s;
  s.sigma2_eps = prior_mean_or_one(prior_.a[kEps], prior_.b[kEps]);
  s.sigma2_t = prior_mean_or_one(prior_.a[kT], prior_.b[kT]);
  s.sigma2_u = prior_mean_or_one(prior_.a[kU], prior_.b[kU]);
  s.eta_x = prior_.m[kX];
  s.eta_t = prior_.m[kT];
  s.eta_u = prior_.m[kU];
  Rng rng(seed, kInit);
  const Eigen::MatrixXd c_u = time_covariance(times_, s.sigma2_u, s.eta_u, prior_.s_exp);
  const auto llt = checked_llt(c_u, "C_u");
  s.U = llt.matrixL() * rng.normal_matrix(times_.size(), prior_.L);
  return s;
}

HyperState Chain::step(const HyperState& in, std::uint64_t seed, long sweep) {
  HyperState s = in;
  if (s.U.rows() != stats_.J || s.U.cols() != prior_.L) throw DomainError("U must be J x L");
  BasisView cur = view(s.eta_x);
  const double J = static_cast<double>(stats_.J);
  const double L = static_cast<double>(prior_.L);

  auto slice_log_variance = [&](double HyperState::*field, int idx, Stream stream) {
    Rng rng = block_rng(seed, sweep, stream);
    const double a = prior_.a[idx];
    const double b = prior_.b[idx];
    auto target = [&](double logv) {
      HyperState t = s;
      t.*field = std::exp(logv);
      if (!(t.*field > 0.0) || !std::isfinite(t.*field)) return kNegInf;
      const double lp = log_ig(t.*field, a, b) + logv;
      if (!std::isfinite(lp)) return kNegInf;
      return lp + loglik(t, cur);
    };
    s.*field = std::exp(slice_sample_1d(target, std::log(s.*field), slice_, rng, &counters_.slice));
  };

  if (prior_.model == ModelKind::I) slice_log_variance(&HyperState::sigma2_eps, kEps, kSigmaEps);
  slice_log_variance(&HyperState::sigma2_t, kT, kSigmaT);

  {
    // sigma2_u | U ~ IG(a_u + JL/2, b_u + tr(U^T C0u^-1 U)/2)
    Rng rng = block_rng(seed, sweep, kSigmaU);
    const Eigen::MatrixXd c0u = time_covariance(times_, 1.0, s.eta_u, prior_.s_exp);
    const auto llt = checked_llt(c0u, "C0_u");
    const double quad = llt.matrixL().solve(s.U).squaredNorm();
    s.sigma2_u = inverse_gamma_draw(prior_.a[kU] + 0.5 * J * L, prior_.b[kU] + 0.5 * quad, rng);
  }

  {
    Rng rng = block_rng(seed, sweep, kEtaX);
    const bool informative = use_likelihood_ && space_.basis_depends_on_eta();
    auto target = [&](double eta) {
      const double lp = log_normal(eta, prior_.m[kX], prior_.V[kX]);
      if (!informative) return lp;
      BasisView v;
      try {
        v = view(eta);
      } catch (const Error&) {
        return kNegInf;
      }
      return lp + loglik(s, v);
    };
    s.eta_x = slice_sample_1d(target, s.eta_x, slice_, rng, &counters_.slice);
    cur = view(s.eta_x);
    current_ = cur;
  }

  {
    Rng rng = block_rng(seed, sweep, kEtaT);
    auto target = [&](double eta) {
      HyperState t = s;
      t.eta_t = eta;
      return log_normal(eta, prior_.m[kT], prior_.V[kT]) + loglik(t, cur);
    };
    s.eta_t = slice_sample_1d(target, s.eta_t, slice_, rng, &counters_.slice);
  }

  {
    Rng rng = block_rng(seed, sweep, kEtaU);
    auto target = [&](double eta) {
      HyperState t = s;
      t.eta_u = eta;
      return log_normal(eta, prior_.m[kU], prior_.V[kU]) + log_lambda_prior(t, times_, prior_);
    };
    s.eta_u = slice_sample_1d(target, s.eta_u, slice_, rng, &counters_.slice);
  }

  {
    // U ~ MN(0, C_u, I_L) a priori; Lambda = U diag(gamma).
    Rng rng = block_rng(seed, sweep, kStreamU);
    const Eigen::MatrixXd c_u = time_covariance(times_, s.sigma2_u, s.eta_u, prior_.s_exp);
    const Eigen::MatrixXd chol = checked_llt(c_u, "C_u").matrixL();
    const Eigen::Index Jn = s.U.rows();
    const Eigen::Index Ln = s.U.cols();
    auto ll = [&](const Eigen::VectorXd& u) {
      HyperState t = s;
      t.U = Eigen::Map<const Eigen::MatrixXd>(u.data(), Jn, Ln);
      return loglik(t, cur);
    };
    auto prior_draw = [&](Rng& r) {
      Eigen::MatrixXd z = chol * r.normal_matrix(Jn, Ln);
      return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(z.data(), z.size()));
    };
    const Eigen::VectorXd u0 = Eigen::Map<const Eigen::VectorXd>(s.U.data(), s.U.size());
    const double ll0 = ll(u0);
    if (!std::isfinite(ll0)) {
      throw PreconditionError("elliptical slice sampler started at a non-finite log-likelihood");
    }
    const EssResult res = ess_update(ll, prior_draw, u0, ll0, rng);
    s.U = Eigen::Map<const Eigen::MatrixXd>(res.state.data(), Jn, Ln);
    ++counters_.ess_updates;
    counters_.ess_proposals += res.proposals;
  }
  return s;
}

HyperState gibbs_step(const HyperState& s, const SufficientStats& stats, const Eigen::VectorXd& times,
                      const PriorConfig& prior, const SpatialModel& space, Rng& rng) {
  Chain chain(stats, times, prior, space);
  return chain.step(s, rng.next_u64(), 0);
}

// ---------------------------------------------------------------------------
// fit

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& a) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (a + a.transpose()));
  if (eig.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXd root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

Eigen::VectorXd draw_m(const Draw& d, const SufficientStats& stats, const Eigen::VectorXd& times,
                       const PriorConfig& prior, const SpatialModel& space, Rng& rng) {
  const Eigen::MatrixXd c_t = time_covariance(times, d.h.sigma2_t, d.h.eta_t, prior.s_exp);
  auto basis = space.basis(d.h.eta_x);
  if (prior.model == ModelKind::II) {
    const Model2Marginal m(c_t, basis, d.lambda, stats.K);
    return Model2Posterior(m, stats.ybar).draw(rng);
  }
  const Model1Marginal m = m1_assemble(c_t, basis, d.lambda, d.h.sigma2_eps, stats.K);
  const auto llt = checked_llt(m.dense, "Model I marginal");
  const Eigen::VectorXd mean = m.cz * llt.solve(stats.ybar);
  const Eigen::MatrixXd cov = m.cz - m.cz * llt.solve(m.cz);
  return mean + psd_sqrt(cov) * rng.normal_vector(mean.size());
}

PosteriorSamples fit(const SpatioTemporalDataset& ds, const PriorConfig& prior, const RunParams& run) {
  const auto start = std::chrono::steady_clock::now();
  prior.validate();
  run.validate();
  if (prior.model == ModelKind::I &&
      static_cast<std::size_t>(ds.I()) * static_cast<std::size_t>(ds.J()) > kDefaultDenseCap) {
    throw CapacityError("Model I needs a dense " + std::to_string(ds.I() * ds.J()) +
                        "-dimensional covariance, over the cap of " + std::to_string(kDefaultDenseCap));
  }
  const SufficientStats stats = sufficient_stats(ds);
  const SpatialModel space(ds.space, prior);
  Chain chain(stats, ds.time.times, prior, space);

  PosteriorSamples out;
  out.prior = prior;
  out.run = run;
  out.I = ds.I();
  out.J = ds.J();
  out.K = ds.K();
  out.draws.reserve(static_cast<std::size_t>(run.draw_count()));

  HyperState s = chain.initial_state(run.seed);
  const Eigen::VectorXd gamma = decay_weights(prior.kappa, prior.L);
  for (long i = 0; i < run.n_iter; ++i) {
    s = chain.step(s, run.seed, i);
    if (i >= run.burn_in && (i - run.burn_in + 1) % run.thin == 0) {
      Draw d;
      d.h = s;
      d.lambda = s.U * gamma.asDiagonal();
      d.logpost = chain.logpost(s);
      out.draws.push_back(std::move(d));
    }
  }
  if (run.sample_m) {
    Rng rng(run.seed, kStreamM);
    for (auto& d : out.draws) d.m = draw_m(d, stats, ds.time.times, prior, space, rng);
  }
  out.counters = chain.counters();
  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

// ---------------------------------------------------------------------------
// Simulation from the model

SpatioTemporalDataset simulate_from_model(const HyperState& s, const SpaceGrid& space,
                                          const TimeGrid& time, const PriorConfig& prior,
                                          const SpatialModel& sm, int K, Rng& rng) {
  if (K < 1) throw DomainError("K must be >= 1");
  const Eigen::Index I = space.size();
  const Eigen::Index J = time.size();
  const Eigen::MatrixXd c_t = time_covariance(time.times, s.sigma2_t, s.eta_t, prior.s_exp);
  const Eigen::MatrixXd chol = checked_llt(c_t, "C_t").matrixL();
  const MercerBasis& basis = *sm.basis(s.eta_x);
  const Eigen::MatrixXd lambda = lambda_of(s, prior.kappa);
  const Eigen::Index L = lambda.cols();

  Eigen::MatrixXd m(I, J);
  if (prior.model == ModelKind::II) {
    // rows of M are independent GPs in time with covariance C_t
    m = rng.normal_matrix(I, J) * chol.transpose();
  } else {
    const Eigen::MatrixXd w = chol * rng.normal_matrix(J, L);
    for (Eigen::Index j = 0; j < J; ++j) {
      m.col(j) = basis.phi * lambda.row(j).cwiseProduct(w.row(j)).transpose();
    }
  }
  std::vector<Eigen::MatrixXd> trials;
  trials.reserve(K);
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd y = m;
    if (prior.model == ModelKind::II) {
      for (Eigen::Index j = 0; j < J; ++j) {
        const Eigen::VectorXd xi = rng.normal_vector(L);
        y.col(j) += basis.phi * lambda.row(j).transpose().cwiseProduct(xi);
      }
    } else {
      y += std::sqrt(s.sigma2_eps) * rng.normal_matrix(I, J);
    }
    trials.push_back(std::move(y));
  }
  return SpatioTemporalDataset(space, time, std::move(trials));
}

// ---------------------------------------------------------------------------
// TESD estimate

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DomainError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Eigen::MatrixXd tesd_draw(const Draw& d, const MercerBasis& basis, const PriorConfig& prior, int j) {
  if (j < 0 || j >= d.lambda.rows()) throw DomainError("time index out of range");
  Eigen::MatrixXd c = assemble_cxt(basis, d.lambda, j);
  if (prior.model == ModelKind::II) {
    c.diagonal().array() += d.h.sigma2_t;
  } else {
    c *= d.h.sigma2_t * (1.0 + kJitter);
    c.diagonal().array() += d.h.sigma2_eps;
  }
  return c;
}

TesdEstimate estimate_tesd(const PosteriorSamples& samples, const SpatialModel& space,
                           const TesdOptions& opt) {
  if (samples.draws.empty()) throw DomainError("estimate_tesd needs at least one draw");
  const int I = space.I();
  TesdEstimate est;
  if (opt.time_indices.empty()) {
    for (int j = 0; j < samples.J; ++j) est.time_indices.push_back(j);
  } else {
    est.time_indices = opt.time_indices;
  }
  for (int j : est.time_indices)
    if (j < 0 || j >= samples.J) throw DomainError("time index out of range");
  for (const auto& [a, b] : opt.band_pairs)
    if (a < 0 || a >= I || b < 0 || b >= I) throw DomainError("band pair out of range");

  const std::size_t T = est.time_indices.size();
  est.cov.assign(T, Eigen::MatrixXd::Zero(I, I));
  est.corr.assign(T, Eigen::MatrixXd::Zero(I, I));
  std::vector<std::vector<double>> band_values(T * opt.band_pairs.size());

  for (const Draw& d : samples.draws) {
    const auto basis = space.basis(d.h.eta_x);
    for (std::size_t ti = 0; ti < T; ++ti) {
      const Eigen::MatrixXd c = tesd_draw(d, *basis, samples.prior, est.time_indices[ti]);
      const Eigen::VectorXd inv_sd = c.diagonal().cwiseMax(0.0).cwiseSqrt().cwiseInverse();
      est.cov[ti] += c;
      est.corr[ti].noalias() += inv_sd.asDiagonal() * c * inv_sd.asDiagonal();
      for (std::size_t p = 0; p < opt.band_pairs.size(); ++p) {
        const auto [a, b] = opt.band_pairs[p];
        band_values[ti * opt.band_pairs.size() + p].push_back(c(a, b));
      }
    }
  }
  const double inv_n = 1.0 / static_cast<double>(samples.draws.size());
  for (std::size_t ti = 0; ti < T; ++ti) {
    est.cov[ti] *= inv_n;
    est.corr[ti] *= inv_n;
    est.corr[ti].diagonal().setOnes();
    for (std::size_t p = 0; p < opt.band_pairs.size(); ++p) {
      const auto& vals = band_values[ti * opt.band_pairs.size() + p];
      TesdBand band;
      band.time_index = est.time_indices[ti];
      band.i = opt.band_pairs[p].first;
      band.i2 = opt.band_pairs[p].second;
      band.mean = est.cov[ti](band.i, band.i2);
      band.lo = quantile(vals, 0.025);
      band.hi = quantile(vals, 0.975);
      est.bands.push_back(band);
    }
  }
  return est;
}

}  // namespace stgp
