#include "stgp/predict.hpp"

#include <cmath>
#include <sstream>

#include "stgp/error.hpp"

namespace stgp {

namespace {

constexpr double kZ975 = 1.959963984540054;

void check_samples(const PosteriorSamples& s, const SpatioTemporalDataset& ds) {
  if (s.draws.empty()) throw DomainError("prediction needs at least one posterior draw");
  if (s.I != ds.I() || s.J != ds.J()) throw DomainError("samples do not match the dataset grid");
}

void fill_bands(TesdPrediction& p) {
  const Eigen::Index r = p.per_draw.front().rows();
  const Eigen::Index c = p.per_draw.front().cols();
  p.lo.resize(r, c);
  p.hi.resize(r, c);
  std::vector<double> vals(p.per_draw.size());
  for (Eigen::Index j = 0; j < c; ++j) {
    for (Eigen::Index i = 0; i < r; ++i) {
      for (std::size_t s = 0; s < p.per_draw.size(); ++s) vals[s] = p.per_draw[s](i, j);
      p.lo(i, j) = quantile(vals, 0.025);
      p.hi(i, j) = quantile(vals, 0.975);
    }
  }
}

}  // namespace

Predictor::Predictor(const PosteriorSamples& samples, const SpatioTemporalDataset& ds)
    : samples_(samples), ds_(ds), stats_(sufficient_stats(ds)), space_(ds.space, samples.prior) {
  check_samples(samples_, ds_);
}

int Predictor::match_location(const Eigen::VectorXd& x) const {
  const Eigen::MatrixXd& p = space_.points();
  if (x.size() != p.cols()) throw DomainError("location has the wrong dimension");
  if (!x.allFinite()) throw DomainError("location must be finite");
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    if (p.row(i).transpose() == x) return static_cast<int>(i);
  return -1;
}

int Predictor::match_time(double t) const {
  if (!std::isfinite(t)) throw DomainError("time must be finite");
  const Eigen::VectorXd& times = ds_.time.times;
  for (Eigen::Index j = 0; j < times.size(); ++j)
    if (times(j) == t) return static_cast<int>(j);
  return -1;
}

Eigen::VectorXd Predictor::lambda_at(const Draw& d, double t_star, Eigen::VectorXd* cond_var) const {
  const int j = match_time(t_star);
  const PriorConfig& prior = samples_.prior;
  const Eigen::VectorXd gamma = decay_weights(prior.kappa, prior.L);
  if (j >= 0) {
    if (cond_var) *cond_var = Eigen::VectorXd::Zero(prior.L);
    return d.lambda.row(j).transpose();
  }
  const Eigen::VectorXd& times = ds_.time.times;
  const Eigen::MatrixXd c_u = time_covariance(times, d.h.sigma2_u, d.h.eta_u, prior.s_exp);
  const Eigen::VectorXd c = time_cross_covariance(t_star, times, d.h.sigma2_u, d.h.eta_u, prior.s_exp)
                                .transpose();
  const auto llt = checked_llt(c_u, "C_u");
  const Eigen::VectorXd w = llt.solve(c);
  if (cond_var) {
    const double v = std::max(d.h.sigma2_u * (1.0 + kJitter) - c.dot(w), 0.0);
    *cond_var = gamma.array().square() * v;
  }
  return d.lambda.transpose() * w;
}

Eigen::VectorXd Predictor::phi_at(const Draw& d, const MercerBasis& basis, const Eigen::VectorXd& x_star,
                                  long* dropped) const {
  const int i = match_location(x_star);
  if (i >= 0) return basis.phi.row(i).transpose();
  if (space_.kind() != SpatialKernelKind::stationary) {
    throw DomainError("extension to new locations is unsupported for the graph-Laplacian kernel");
  }
  const Eigen::VectorXd k = space_.cross_kernel(x_star, d.h.eta_x);
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(basis.L());
  const double top = basis.lambda0(0);
  for (int l = 0; l < basis.L(); ++l) {
    const double l0 = basis.lambda0(l);
    if (!(l0 >= kNystromFloor * top) || l0 == 0.0) {
      if (dropped) ++*dropped;
      continue;
    }
    phi(l) = k.dot(basis.phi.col(l)) / (l0 * l0);
  }
  return phi;
}

MeanDraw Predictor::mean_draw(const Draw& d, const SpaceTimePoint& z) const {
  const PriorConfig& prior = samples_.prior;
  const Eigen::VectorXd& times = ds_.time.times;
  const int I = ds_.I();
  const int J = ds_.J();
  const Eigen::MatrixXd c_t = time_covariance(times, d.h.sigma2_t, d.h.eta_t, prior.s_exp);
  const Eigen::VectorXd ct_star =
      time_cross_covariance(z.t, times, d.h.sigma2_t, d.h.eta_t, prior.s_exp).transpose();
  const double ct_ss = d.h.sigma2_t * (1.0 + kJitter);
  const auto basis = space_.basis(d.h.eta_x);
  MeanDraw out;

  if (prior.model == ModelKind::II) {
    // C_M = C_t (x) I_x: m(z*) correlates only with M at the same location.
    const int i = match_location(z.x);
    if (i < 0) {
      out.var = ct_ss;
      return out;
    }
    Eigen::MatrixXd cs = Eigen::MatrixXd::Zero(I, J);
    cs.row(i) = ct_star.transpose();
    const Eigen::VectorXd c = vec(cs);
    const Model2Marginal m(c_t, basis, d.lambda, stats_.K);
    out.mean = c.dot(m.inverse_apply(stats_.ybar));
    out.var = std::max(ct_ss - c.dot(m.inverse_apply(c)), 0.0);
    return out;
  }

  const Eigen::VectorXd lam = lambda_at(d, z.t);
  const Eigen::VectorXd phi = phi_at(d, *basis, z.x);
  const Eigen::VectorXd a = lam.cwiseProduct(phi);
  Eigen::MatrixXd cs(I, J);
  for (int j = 0; j < J; ++j) {
    cs.col(j) = ct_star(j) * (basis->phi * d.lambda.row(j).transpose().cwiseProduct(a));
  }
  const Eigen::VectorXd c = vec(cs);
  const Model1Marginal m = m1_assemble(c_t, basis, d.lambda, d.h.sigma2_eps, stats_.K);
  const auto llt = checked_llt(m.dense, "Model I marginal");
  out.mean = c.dot(llt.solve(stats_.ybar));
  out.var = std::max(ct_ss * a.squaredNorm() - c.dot(llt.solve(c)), 0.0);
  return out;
}

std::vector<MeanPrediction> Predictor::mean(const std::vector<SpaceTimePoint>& targets) const {
  std::vector<MeanPrediction> out(targets.size());
  for (const Draw& d : samples_.draws)
    for (std::size_t n = 0; n < targets.size(); ++n) out[n].per_draw.push_back(mean_draw(d, targets[n]));
  const double S = static_cast<double>(samples_.draws.size());
  for (auto& p : out) {
    double sum = 0.0;
    double within = 0.0;
    for (const auto& md : p.per_draw) {
      sum += md.mean;
      within += md.var;
    }
    p.mean = sum / S;
    double between = 0.0;
    for (const auto& md : p.per_draw) between += (md.mean - p.mean) * (md.mean - p.mean);
    p.variance = within / S + between / S;
    const double half = kZ975 * std::sqrt(p.variance);
    p.lo = p.mean - half;
    p.hi = p.mean + half;
  }
  return out;
}

TesdPrediction Predictor::tesd_future(double t_star, bool add_conditional_variance) const {
  if (samples_.prior.model == ModelKind::I) {
    throw DomainError("TESD prediction is unsupported for model I");
  }
  if (!std::isfinite(t_star)) throw DomainError("t* must be finite");
  const int I = ds_.I();
  TesdPrediction p;
  p.mean = Eigen::MatrixXd::Zero(I, I);
  p.corr = Eigen::MatrixXd::Zero(I, I);
  for (const Draw& d : samples_.draws) {
    const auto basis = space_.basis(d.h.eta_x);
    Eigen::VectorXd var;
    const Eigen::VectorXd lam = lambda_at(d, t_star, add_conditional_variance ? &var : nullptr);
    Eigen::VectorXd l2 = lam.array().square();
    if (add_conditional_variance) l2 += var;
    Eigen::MatrixXd c = basis->phi * l2.asDiagonal() * basis->phi.transpose();
    const Eigen::VectorXd sd = c.diagonal().cwiseMax(0.0).cwiseSqrt();
    for (Eigen::Index b = 0; b < I; ++b)
      for (Eigen::Index a = 0; a < I; ++a)
        if (sd(a) > 0.0 && sd(b) > 0.0) p.corr(a, b) += c(a, b) / (sd(a) * sd(b));
    p.mean += c;
    p.per_draw.push_back(std::move(c));
  }
  const double inv = 1.0 / static_cast<double>(samples_.draws.size());
  p.mean *= inv;
  p.corr *= inv;
  fill_bands(p);
  return p;
}

TesdPrediction Predictor::tesd_neighbor(const Eigen::VectorXd& x_star) const {
  if (samples_.prior.model == ModelKind::I) {
    throw DomainError("TESD prediction is unsupported for model I");
  }
  const int I = ds_.I();
  const int J = ds_.J();
  TesdPrediction p;
  p.mean = Eigen::MatrixXd::Zero(I, J);
  p.corr = Eigen::MatrixXd::Zero(I, J);
  for (const Draw& d : samples_.draws) {
    const auto basis = space_.basis(d.h.eta_x);
    const Eigen::VectorXd phi_star = phi_at(d, *basis, x_star, &p.dropped_terms);
    Eigen::MatrixXd c(I, J);
    for (int j = 0; j < J; ++j) {
      const Eigen::VectorXd l2 = d.lambda.row(j).transpose().array().square();
      c.col(j) = basis->phi * l2.cwiseProduct(phi_star);
      const double v_star = l2.dot(phi_star.cwiseAbs2());
      for (int i = 0; i < I; ++i) {
        const double v_i = l2.dot(basis->phi.row(i).transpose().cwiseAbs2());
        if (v_i > 0.0 && v_star > 0.0) p.corr(i, j) += c(i, j) / std::sqrt(v_i * v_star);
      }
    }
    p.mean += c;
    p.per_draw.push_back(std::move(c));
  }
  const double inv = 1.0 / static_cast<double>(samples_.draws.size());
  p.mean *= inv;
  p.corr *= inv;
  fill_bands(p);
  return p;
}

void write_prediction_csv(const std::filesystem::path& path, const std::vector<PredictionRow>& rows) {
  std::ostringstream os;
  os << "target-id,estimate,lo2.5,hi97.5\n";
  for (const auto& r : rows) {
    os << r.id << ',' << format_double(r.estimate) << ',' << format_double(r.lo) << ','
       << format_double(r.hi) << '\n';
  }
  atomic_write(path, os.str());
}

}  // namespace stgp
