#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "stgp/inference.hpp"
#include "stgp/stdata.hpp"

namespace stgp {

/// Synthetic process on x in [-1, 1] (Nx intervals) and t in [0, 1] (Nt intervals).
/// I and J select an equally spaced sub-mesh; 0 means the full mesh.
struct SimParams {
  double ell_x = 0.5;
  double ell_t = 0.3;
  double ell_xt = 0.3872983346207417;  // sqrt(ell_x * ell_t)
  double sigma2_eps = 1e-2;
  int Nx = 200;
  int Nt = 100;
  int I = 0;
  int J = 0;
  int K = 1;
  std::uint64_t seed = 1;

  void validate() const;
  int mesh_I() const { return I == 0 ? Nx + 1 : I; }
  int mesh_J() const { return J == 0 ? Nt + 1 : J; }
};

/// Largest joint covariance generate() will factor densely.
inline constexpr long kSimCapacity = 25000;

double true_mean(double x, double t);
/// exp(-|x-x'|^2/(2 ell_x) - |x-x'| t/(2 ell_xt)) + sigma2_eps [x == x']
double true_tesd(double x, double x2, double t, const SimParams& p);
/// Joint kernel without the nugget.
double joint_kernel(double x, double t, double x2, double t2, const SimParams& p);

/// Every floor(N/(n-1))-th node of a mesh with N intervals.
std::vector<int> submesh_indices(int N, int n);
SpaceGrid sim_space(const SimParams& p);
TimeGrid sim_time(const SimParams& p);

/// K exact joint-Gaussian draws on the sub-mesh. Trial k uses RNG stream k + 1.
SpatioTemporalDataset generate(const SimParams& p);

/// Closed-form truth for tesd_error.
struct TruthOracle {
  SimParams p;

  double mean(double x, double t) const { return true_mean(x, t); }
  Eigen::MatrixXd cov(const Eigen::VectorXd& x, double t) const;
};

struct TesdError {
  double rmse_overall = 0.0;
  double flatness_estimate = 0.0;
  double flatness_truth = 0.0;
};

/// rmse over all (i, i', j); flatness is the mean over pairs i < i' of the standard deviation
/// across time of the covariance entry.
TesdError tesd_error(const TesdEstimate& est, const Eigen::VectorXd& x, const Eigen::VectorXd& times,
                     const TruthOracle& oracle);

/// Synthetic stand-in for an image study: smooth blobs whose amplitudes drift over time,
/// subject-level random amplitudes, and white noise, on a rows x cols pixel grid.
struct ImageDemoParams {
  int rows = 40;
  int cols = 40;
  int J = 5;
  int K = 10;
  int cohorts = 3;
  double noise = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

/// One dataset per cohort.
std::vector<SpatioTemporalDataset> generate_image_demo(const ImageDemoParams& p);

}  // namespace stgp
