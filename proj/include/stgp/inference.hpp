#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stgp/kernels.hpp"
#include "stgp/kronalg.hpp"
#include "stgp/samplers.hpp"
#include "stgp/stdata.hpp"

namespace stgp {

enum class ModelKind { I, II };
enum class SpatialKernelKind { stationary, graph_laplacian };

std::string to_string(ModelKind m);
std::string to_string(SpatialKernelKind k);
ModelKind parse_model_kind(const std::string& s);
SpatialKernelKind parse_spatial_kernel(const std::string& s);

struct GraphKernelConfig {
  int rows = 0;
  int cols = 0;
  int w = 1;
  int s = 2;
};

/// Priors sigma2_* ~ IG(a_*, b_*) and eta_* ~ N(m_*, V_*).
/// a and b are indexed (eps, t, u); m and V are indexed (x, t, u).
struct PriorConfig {
  std::array<double, 3> a{1.0, 1.0, 1.0};
  std::array<double, 3> b{0.1, 1.0, 5.0};
  std::array<double, 3> m{0.0, 0.0, 0.0};
  std::array<double, 3> V{1.0, 1.0, 1.0};
  double kappa = 2.0;
  int L = 5;
  ModelKind model = ModelKind::II;
  SpatialKernelKind spatial_kernel = SpatialKernelKind::stationary;
  GraphKernelConfig graph;
  double s_exp = 2.0;

  void validate() const;
};

inline constexpr int kEps = 0;
inline constexpr int kX = 0;
inline constexpr int kT = 1;
inline constexpr int kU = 2;

struct HyperScalars {
  double sigma2_eps = 1.0;  // Model I only
  double sigma2_t = 1.0;
  double sigma2_u = 1.0;
  double eta_x = 0.0;  // log tau2 under the graph-Laplacian kernel
  double eta_t = 0.0;
  double eta_u = 0.0;
};

struct HyperState : HyperScalars {
  Eigen::MatrixXd U;  // J x L; Lambda = U diag(gamma)
};

Eigen::MatrixXd lambda_of(const HyperState& s, double kappa);

/// sigma2 * (C0(times; exp(eta)) + jitter I): temporal covariance with unit-variance base kernel.
Eigen::MatrixXd time_covariance(const Eigen::VectorXd& times, double sigma2, double eta, double s_exp);
/// Cross-covariance of a new time with the grid, consistent with time_covariance on exact matches.
Eigen::RowVectorXd time_cross_covariance(double t_new, const Eigen::VectorXd& times, double sigma2,
                                         double eta, double s_exp);

/// Spatial side of the model: produces the Mercer basis for a given eta_x.
class SpatialModel {
 public:
  SpatialModel(const SpaceGrid& space, const PriorConfig& prior);

  int I() const { return static_cast<int>(points_.rows()); }
  int L() const { return L_; }
  SpatialKernelKind kind() const { return kind_; }
  const Eigen::MatrixXd& points() const { return points_; }
  /// False when Phi does not depend on eta_x (graph-Laplacian kernel).
  bool basis_depends_on_eta() const { return kind_ == SpatialKernelKind::stationary; }

  std::shared_ptr<const MercerBasis> basis(double eta_x) const;
  /// Static spatial kernel C_x(points, x*) with sigma2_x = 1. Stationary kernel only.
  Eigen::VectorXd cross_kernel(const Eigen::VectorXd& x_new, double eta_x) const;

 private:
  Eigen::MatrixXd points_;
  int L_;
  SpatialKernelKind kind_;
  double s_exp_;
  GraphKernelConfig graph_;
  std::shared_ptr<const SparseEigenpairs> lap_eig_;
  mutable double cached_eta_ = 0.0;
  mutable std::shared_ptr<const MercerBasis> cached_;
};

/// Data summaries in the coordinates of one basis Phi (Model II).
struct ProjectedStats {
  Eigen::MatrixXd ybar_t;      // L x J, Phi^T Ybar
  Eigen::MatrixXd complement;  // J x J, Ybar^T Ybar - ybar_t^T ybar_t
  Eigen::MatrixXd q;           // J x L, sum_k (phi_l^T Y*_kj)^2
};

ProjectedStats project_stats(const MercerBasis& basis, const SufficientStats& stats);

inline constexpr double kLambdaFloor = 1e-12;

/// Model II log-likelihood with M integrated out, up to an additive constant.
double loglik_m2(const Eigen::MatrixXd& c_t, std::shared_ptr<const MercerBasis> basis,
                 const Eigen::MatrixXd& lambda, const ProjectedStats& ps, int K);
/// Model I log-likelihood with M integrated out, up to an additive constant.
double loglik_m1(const Eigen::MatrixXd& c_t, std::shared_ptr<const MercerBasis> basis,
                 const Eigen::MatrixXd& lambda, double sigma2_eps, const SufficientStats& stats);

/// log p(U | sigma2_u, eta_u) in Lambda coordinates: -J sum log gamma - (L/2) log|C_u| - tr(U^T C_u^-1 U)/2.
double log_lambda_prior(const HyperState& s, const Eigen::VectorXd& times, const PriorConfig& prior);
/// Inverse-gamma and log-normal priors on the scalar hyperparameters in use by the model.
double log_hyper_prior(const HyperScalars& h, const PriorConfig& prior);

/// Full log-posterior of the marginalized models (never throws on numerical failure; returns -inf).
double logpost_m2(const HyperState& s, const SufficientStats& stats, const Eigen::VectorXd& times,
                  const PriorConfig& prior, const SpatialModel& space, bool include_likelihood = true);
double logpost_m1(const HyperState& s, const SufficientStats& stats, const Eigen::VectorXd& times,
                  const PriorConfig& prior, const SpatialModel& space, bool include_likelihood = true);

struct GibbsCounters {
  SliceCounters slice;
  long ess_updates = 0;
  long ess_proposals = 0;
};

/// State shared across sweeps of one chain.
class Chain {
 public:
  Chain(const SufficientStats& stats, const Eigen::VectorXd& times, const PriorConfig& prior,
        const SpatialModel& space, bool use_likelihood = true);

  /// One Metropolis-within-Gibbs sweep.
  HyperState step(const HyperState& s, std::uint64_t seed, long sweep);
  double logpost(const HyperState& s) const;
  HyperState initial_state(std::uint64_t seed) const;

  const GibbsCounters& counters() const { return counters_; }
  const SliceConfig& slice_config() const { return slice_; }

 private:
  const SufficientStats& stats_;
  Eigen::VectorXd times_;
  PriorConfig prior_;
  const SpatialModel& space_;
  bool use_likelihood_;
  SliceConfig slice_;
  GibbsCounters counters_;
  Eigen::VectorXd gamma_;

  struct BasisView {
    double eta_x = 0.0;
    std::shared_ptr<const MercerBasis> basis;
    std::shared_ptr<const ProjectedStats> ps;  // Model II only
  };
  BasisView current_;

  BasisView view(double eta_x) const;
  double loglik(const HyperState& s, const BasisView& v) const;
};

/// Convenience wrapper running one sweep with a throwaway Chain.
HyperState gibbs_step(const HyperState& s, const SufficientStats& stats, const Eigen::VectorXd& times,
                      const PriorConfig& prior, const SpatialModel& space, Rng& rng);

struct RunParams {
  long n_iter = 6000;
  long burn_in = 2000;
  long thin = 2;
  std::uint64_t seed = 1;
  bool sample_m = false;

  void validate() const;
  long draw_count() const { return n_iter > burn_in ? (n_iter - burn_in) / thin : 0; }
};

struct Draw {
  HyperScalars h;
  Eigen::MatrixXd lambda;  // J x L
  double logpost = 0.0;
  Eigen::VectorXd m;  // vec(M), empty unless sampled
};

struct PosteriorSamples {
  PriorConfig prior;
  RunParams run;
  int I = 0;
  int J = 0;
  int K = 0;
  double wall_seconds = 0.0;
  GibbsCounters counters;
  std::vector<Draw> draws;
};

PosteriorSamples fit(const SpatioTemporalDataset& ds, const PriorConfig& prior, const RunParams& run);

/// Draw vec(M) from its analytic conditional posterior given one retained state.
Eigen::VectorXd draw_m(const Draw& d, const SufficientStats& stats, const Eigen::VectorXd& times,
                       const PriorConfig& prior, const SpatialModel& space, Rng& rng);

/// Simulates K trials from the model at a given state (used by joint-distribution tests).
SpatioTemporalDataset simulate_from_model(const HyperState& s, const SpaceGrid& space,
                                          const TimeGrid& time, const PriorConfig& prior,
                                          const SpatialModel& sm, int K, Rng& rng);

struct TesdOptions {
  std::vector<int> time_indices;              // 0-based; empty means all
  std::vector<std::pair<int, int>> band_pairs;  // 0-based entries to report bands for
};

struct TesdBand {
  int time_index = 0;
  int i = 0;
  int i2 = 0;
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct TesdEstimate {
  std::vector<int> time_indices;
  std::vector<Eigen::MatrixXd> cov;   // posterior mean of C_{y|t_j}
  std::vector<Eigen::MatrixXd> corr;  // posterior mean of the per-draw correlation
  std::vector<TesdBand> bands;
};

/// Per-draw C_{y|t_j}: sigma2_t I + Phi diag(Lambda_j^2) Phi^T (Model II) or
/// C_t(t_j, t_j) Phi diag(Lambda_j^2) Phi^T + sigma2_eps I (Model I).
Eigen::MatrixXd tesd_draw(const Draw& d, const MercerBasis& basis, const PriorConfig& prior, int j);

TesdEstimate estimate_tesd(const PosteriorSamples& samples, const SpatialModel& space,
                           const TesdOptions& opt = {});

/// Empirical quantile with linear interpolation (type 7).
double quantile(std::vector<double> v, double q);

}  // namespace stgp
