#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "stgp/error.hpp"

namespace stgp {

/// Counter-based generator. Draw n of stream s under seed is a pure function of
/// (seed, s, n), so results do not depend on platform or on the order in which
/// other streams are consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  /// Standard gamma with unit scale.
  double gamma(double shape);

  Eigen::VectorXd normal_vector(Eigen::Index n);
  Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);

  /// Independent generator for `stream` under the same seed.
  Rng split(std::uint64_t stream) const { return Rng(seed_, stream); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

struct SliceConfig {
  double width = 1.0;
  int max_steps = 50;
};

/// Running totals reported by fit().
struct SliceCounters {
  long updates = 0;
  long evaluations = 0;
  long shrinkages = 0;
};

inline constexpr int kMaxShrinkage = 1000;

/// One stepping-out and shrinkage slice update (Neal 2003) of a univariate density
/// given on the log scale.
template <typename LogDensity>
double slice_sample_1d(LogDensity&& logdensity, double x0, const SliceConfig& cfg, Rng& rng,
                       SliceCounters* counters = nullptr) {
  if (!(cfg.width > 0.0) || cfg.max_steps < 1) throw DomainError("invalid slice configuration");
  const double f0 = logdensity(x0);
  if (!std::isfinite(f0)) {
    throw PreconditionError("slice sampler started where the log-density is not finite");
  }
  long evals = 1;
  const double level = f0 + std::log(rng.uniform());

  double left = x0 - cfg.width * rng.uniform();
  double right = left + cfg.width;
  long left_steps = static_cast<long>(std::floor(cfg.max_steps * rng.uniform()));
  long right_steps = cfg.max_steps - 1 - left_steps;
  while (left_steps > 0) {
    ++evals;
    if (!(logdensity(left) > level)) break;
    left -= cfg.width;
    --left_steps;
  }
  while (right_steps > 0) {
    ++evals;
    if (!(logdensity(right) > level)) break;
    right += cfg.width;
    --right_steps;
  }

  for (int shrink = 0; shrink < kMaxShrinkage; ++shrink) {
    const double x1 = rng.uniform(left, right);
    ++evals;
    const double f1 = logdensity(x1);
    if (f1 > level && std::isfinite(f1)) {
      if (counters) {
        ++counters->updates;
        counters->evaluations += evals;
        counters->shrinkages += shrink;
      }
      return x1;
    }
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  throw NumericalError("slice sampler: no acceptance after " + std::to_string(kMaxShrinkage) +
                       " contractions");
}

struct EssResult {
  Eigen::VectorXd state;
  double loglik = 0.0;
  int proposals = 0;
};

/// One elliptical slice sampling update (Murray, Adams & MacKay 2010) for a zero-mean
/// Gaussian prior. `prior_draw(rng)` returns an independent prior sample.
template <typename LogLik, typename PriorDraw>
EssResult ess_update(LogLik&& loglik, PriorDraw&& prior_draw, const Eigen::VectorXd& current,
                     double current_loglik, Rng& rng) {
  if (!std::isfinite(current_loglik)) {
    throw PreconditionError("elliptical slice sampler started at a non-finite log-likelihood");
  }
  const Eigen::VectorXd nu = prior_draw(rng);
  const double level = current_loglik + std::log(rng.uniform());
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double theta = rng.uniform(0.0, two_pi);
  double lo = theta - two_pi;
  double hi = theta;
  EssResult out;
  for (int n = 1;; ++n) {
    Eigen::VectorXd prop = std::cos(theta) * current + std::sin(theta) * nu;
    const double ll = loglik(prop);
    if (ll > level && std::isfinite(ll)) {
      out.state = std::move(prop);
      out.loglik = ll;
      out.proposals = n;
      return out;
    }
    if (theta < 0.0) {
      lo = theta;
    } else {
      hi = theta;
    }
    if (hi - lo < 1e-300) {
      // Bracket collapsed onto the current point, which always satisfies the slice.
      out.state = current;
      out.loglik = current_loglik;
      out.proposals = n;
      return out;
    }
    theta = rng.uniform(lo, hi);
  }
}

template <typename LogLik, typename PriorDraw>
Eigen::VectorXd ess_update(LogLik&& loglik, PriorDraw&& prior_draw, const Eigen::VectorXd& current,
                           Rng& rng) {
  const double ll = loglik(current);
  return ess_update(loglik, prior_draw, current, ll, rng).state;
}

/// Draw with density proportional to x^(-a-1) exp(-b/x).
double inverse_gamma_draw(double a, double b, Rng& rng);

}  // namespace stgp
