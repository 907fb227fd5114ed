#include "stgp/simharness.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "stgp/error.hpp"
#include "stgp/kronalg.hpp"

namespace stgp {

void SimParams::validate() const {
  if (!(ell_x > 0.0) || !(ell_t > 0.0) || !(ell_xt > 0.0)) throw ConfigError("length-scales must be positive");
  if (!(sigma2_eps >= 0.0) || !std::isfinite(sigma2_eps)) throw ConfigError("sigma2_eps must be non-negative");
  if (Nx < 1 || Nt < 1) throw ConfigError("Nx and Nt must be >= 1");
  if (I < 0 || I > Nx + 1) throw ConfigError("I must lie in 1..Nx+1 (0 for the full mesh)");
  if (J < 0 || J > Nt + 1) throw ConfigError("J must lie in 1..Nt+1 (0 for the full mesh)");
  if (K < 1) throw ConfigError("K must be >= 1");
}

double true_mean(double x, double t) {
  return std::cos(std::numbers::pi * x) * std::sin(2.0 * std::numbers::pi * t);
}

double true_tesd(double x, double x2, double t, const SimParams& p) {
  const double d = std::abs(x - x2);
  double v = std::exp(-d * d / (2.0 * p.ell_x) - d * t / (2.0 * p.ell_xt));
  if (x == x2) v += p.sigma2_eps;
  return v;
}

double joint_kernel(double x, double t, double x2, double t2, const SimParams& p) {
  const double dx = x - x2;
  const double dt = t - t2;
  return std::exp(-dx * dx / (2.0 * p.ell_x) - dt * dt / (2.0 * p.ell_t) -
                  std::abs(x * t - x2 * t2) / (2.0 * p.ell_xt));
}

std::vector<int> submesh_indices(int N, int n) {
  if (n < 1 || n > N + 1) throw DomainError("sub-mesh size must lie in 1..N+1");
  std::vector<int> idx(n);
  const int stride = n == 1 ? 0 : N / (n - 1);
  for (int k = 0; k < n; ++k) idx[k] = k * stride;
  return idx;
}

SpaceGrid sim_space(const SimParams& p) {
  const auto idx = submesh_indices(p.Nx, p.mesh_I());
  Eigen::MatrixXd pts(idx.size(), 1);
  for (std::size_t k = 0; k < idx.size(); ++k) pts(k, 0) = -1.0 + 2.0 * idx[k] / p.Nx;
  return SpaceGrid(pts);
}

TimeGrid sim_time(const SimParams& p) {
  const auto idx = submesh_indices(p.Nt, p.mesh_J());
  Eigen::VectorXd t(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) t(k) = static_cast<double>(idx[k]) / p.Nt;
  return TimeGrid(t);
}

SpatioTemporalDataset generate(const SimParams& p) {
  p.validate();
  const long I = p.mesh_I();
  const long J = p.mesh_J();
  if (I * J > kSimCapacity) {
    throw CapacityError("simulation mesh of " + std::to_string(I * J) + " points exceeds the dense capacity of " +
                        std::to_string(kSimCapacity) + "; request a sub-mesh with I and J");
  }
  const SpaceGrid space = sim_space(p);
  const TimeGrid time = sim_time(p);
  const Eigen::Index n = I * J;
  Eigen::VectorXd xs(n);
  Eigen::VectorXd ts(n);
  Eigen::VectorXd mu(n);
  for (Eigen::Index j = 0; j < J; ++j) {
    for (Eigen::Index i = 0; i < I; ++i) {
      xs(j * I + i) = space.points(i, 0);
      ts(j * I + i) = time.times(j);
      mu(j * I + i) = true_mean(xs(j * I + i), ts(j * I + i));
    }
  }
  Eigen::MatrixXd c(n, n);
  for (Eigen::Index b = 0; b < n; ++b) {
    c(b, b) = 1.0 + p.sigma2_eps;
    for (Eigen::Index a = b + 1; a < n; ++a) {
      c(a, b) = joint_kernel(xs(a), ts(a), xs(b), ts(b), p);
      c(b, a) = c(a, b);
    }
  }
  add_jitter(c);
  const auto llt = checked_llt(c, "simulation kernel");
  std::vector<Eigen::MatrixXd> trials;
  trials.reserve(p.K);
  for (int k = 0; k < p.K; ++k) {
    Rng rng(p.seed, static_cast<std::uint64_t>(k) + 1);
    const Eigen::VectorXd y = mu + llt.matrixL() * rng.normal_vector(n);
    trials.emplace_back(Eigen::Map<const Eigen::MatrixXd>(y.data(), I, J));
  }
  return SpatioTemporalDataset(space, time, std::move(trials));
}

Eigen::MatrixXd TruthOracle::cov(const Eigen::VectorXd& x, double t) const {
  const Eigen::Index I = x.size();
  Eigen::MatrixXd c(I, I);
  for (Eigen::Index b = 0; b < I; ++b)
    for (Eigen::Index a = 0; a < I; ++a) c(a, b) = true_tesd(x(a), x(b), t, p);
  return c;
}

namespace {

double flatness(const std::vector<Eigen::MatrixXd>& mats) {
  const Eigen::Index I = mats.front().rows();
  const double T = static_cast<double>(mats.size());
  double total = 0.0;
  long pairs = 0;
  for (Eigen::Index b = 1; b < I; ++b) {
    for (Eigen::Index a = 0; a < b; ++a) {
      double mean = 0.0;
      for (const auto& m : mats) mean += m(a, b);
      mean /= T;
      double ss = 0.0;
      for (const auto& m : mats) ss += (m(a, b) - mean) * (m(a, b) - mean);
      total += std::sqrt(ss / T);
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : total / static_cast<double>(pairs);
}

}  // namespace

TesdError tesd_error(const TesdEstimate& est, const Eigen::VectorXd& x, const Eigen::VectorXd& times,
                     const TruthOracle& oracle) {
  if (est.cov.empty()) throw DomainError("empty TESD estimate");
  if (est.cov.size() != est.time_indices.size()) throw DomainError("malformed TESD estimate");
  std::vector<Eigen::MatrixXd> truth;
  double ss = 0.0;
  double count = 0.0;
  for (std::size_t ti = 0; ti < est.cov.size(); ++ti) {
    const int j = est.time_indices[ti];
    if (j < 0 || j >= times.size()) throw DomainError("estimate time index outside the time grid");
    if (est.cov[ti].rows() != x.size() || est.cov[ti].cols() != x.size()) {
      throw DomainError("estimate and truth grids do not align");
    }
    truth.push_back(oracle.cov(x, times(j)));
    ss += (est.cov[ti] - truth.back()).squaredNorm();
    count += static_cast<double>(x.size() * x.size());
  }
  TesdError e;
  e.rmse_overall = std::sqrt(ss / count);
  e.flatness_estimate = flatness(est.cov);
  e.flatness_truth = flatness(truth);
  return e;
}

void ImageDemoParams::validate() const {
  if (rows < 2 || cols < 2) throw ConfigError("image grid needs at least 2 rows and 2 cols");
  if (J < 1 || K < 1 || cohorts < 1) throw ConfigError("J, K and cohorts must be >= 1");
  if (!(noise >= 0.0)) throw ConfigError("noise must be non-negative");
}

std::vector<SpatioTemporalDataset> generate_image_demo(const ImageDemoParams& p) {
  p.validate();
  struct Blob {
    double r, c, radius, base, slope;
  };
  const double R = p.rows;
  const double C = p.cols;
  const std::vector<Blob> blobs = {
      {0.30 * R, 0.30 * C, 0.12 * R, 1.0, 0.2},
      {0.65 * R, 0.40 * C, 0.10 * R, 0.6, 0.6},
      {0.45 * R, 0.75 * C, 0.15 * R, 0.4, 1.0},
  };
  const SpaceGrid space = SpaceGrid::image(p.rows, p.cols);
  const TimeGrid time = TimeGrid::linspace(0.0, 1.0, p.J);
  const Eigen::Index I = space.size();

  // Unit-peak blob profiles over the pixels.
  Eigen::MatrixXd profile(I, blobs.size());
  for (Eigen::Index i = 0; i < I; ++i) {
    const double r = space.points(i, 0);
    const double c = space.points(i, 1);
    for (std::size_t b = 0; b < blobs.size(); ++b) {
      const double dr = r - blobs[b].r;
      const double dc = c - blobs[b].c;
      profile(i, b) = std::exp(-(dr * dr + dc * dc) / (2.0 * blobs[b].radius * blobs[b].radius));
    }
  }

  std::vector<SpatioTemporalDataset> out;
  for (int g = 0; g < p.cohorts; ++g) {
    const double rate = 1.0 + 0.5 * g;  // later cohorts progress faster
    std::vector<Eigen::MatrixXd> trials;
    for (int k = 0; k < p.K; ++k) {
      Rng rng(p.seed, static_cast<std::uint64_t>(g) * 100000 + k + 1);
      Eigen::MatrixXd y(I, p.J);
      const Eigen::VectorXd subject = 0.3 * rng.normal_vector(blobs.size());
      for (int j = 0; j < p.J; ++j) {
        const double t = time.times(j);
        Eigen::VectorXd amp(blobs.size());
        for (std::size_t b = 0; b < blobs.size(); ++b) {
          amp(b) = (blobs[b].base + rate * blobs[b].slope * t) * (1.0 + subject(b) * (1.0 + t));
        }
        y.col(j) = profile * amp + p.noise * rng.normal_vector(I);
      }
      trials.push_back(std::move(y));
    }
    out.emplace_back(space, time, std::move(trials));
  }
  return out;
}

}  // namespace stgp
