#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stgp/inference.hpp"

namespace stgp {

struct SpaceTimePoint {
  Eigen::VectorXd x;
  double t = 0.0;
};

/// Conditional mean and variance of m(z*) given ybar under one posterior draw.
struct MeanDraw {
  double mean = 0.0;
  double var = 0.0;
};

struct MeanPrediction {
  double mean = 0.0;
  double variance = 0.0;  // law of total variance across draws
  double lo = 0.0;        // normal 95% band
  double hi = 0.0;
  std::vector<MeanDraw> per_draw;
};

struct TesdPrediction {
  Eigen::MatrixXd mean;  // future time: I x I; new location: I x J (column j is C_{x|t_j}(X, x*))
  Eigen::MatrixXd lo;    // 2.5% empirical quantile across draws
  Eigen::MatrixXd hi;    // 97.5%
  Eigen::MatrixXd corr;  // posterior mean of per-draw correlations, same shape as mean
  std::vector<Eigen::MatrixXd> per_draw;
  long dropped_terms = 0;  // basis terms skipped for tiny static eigenvalues
};

/// Static eigenvalues below this fraction of the largest are dropped from the Nystrom extension.
inline constexpr double kNystromFloor = 1e-12;

/// Posterior predictions for one fitted dataset. Holds the sufficient statistics and the
/// spatial model rebuilt from the samples' prior.
class Predictor {
 public:
  Predictor(const PosteriorSamples& samples, const SpatioTemporalDataset& ds);

  const SpatialModel& space() const { return space_; }

  /// m' = c_*^T (C_M + K^-1 C_{Y|M})^-1 ybar and C' per draw, aggregated over draws.
  std::vector<MeanPrediction> mean(const std::vector<SpaceTimePoint>& targets) const;
  MeanDraw mean_draw(const Draw& d, const SpaceTimePoint& z) const;

  /// Conditional-GP extrapolation of each lambda_l to t*, then Phi diag(lambda*^2) Phi^T.
  TesdPrediction tesd_future(double t_star, bool add_conditional_variance = false) const;
  /// Per-draw lambda(t*) (length L); also returns the conditional variance of each entry.
  Eigen::VectorXd lambda_at(const Draw& d, double t_star, Eigen::VectorXd* cond_var = nullptr) const;

  /// Nystrom extension of the basis to x*, then C_{x|t_j}(X, x*) for every fitted time.
  TesdPrediction tesd_neighbor(const Eigen::VectorXd& x_star) const;
  /// Per-draw phi(x*) (length L). Counts dropped terms in *dropped.
  Eigen::VectorXd phi_at(const Draw& d, const MercerBasis& basis, const Eigen::VectorXd& x_star,
                         long* dropped = nullptr) const;

 private:
  const PosteriorSamples& samples_;
  const SpatioTemporalDataset& ds_;
  SufficientStats stats_;
  SpatialModel space_;

  int match_location(const Eigen::VectorXd& x) const;
  int match_time(double t) const;
};

struct PredictionRow {
  std::string id;
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// CSV with header target-id,estimate,lo2.5,hi97.5.
void write_prediction_csv(const std::filesystem::path& path, const std::vector<PredictionRow>& rows);

}  // namespace stgp
