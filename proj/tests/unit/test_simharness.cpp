#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "stgp/error.hpp"
#include "stgp/simharness.hpp"

using namespace stgp;

TEST(TrueMean, ClosedForm) {
  EXPECT_NEAR(true_mean(0.0, 0.25), 1.0, 1e-15);
  for (double t : {0.1, 0.3, 0.77}) {
    EXPECT_NEAR(true_mean(1.0, t), -std::sin(2.0 * std::numbers::pi * t), 1e-15);
    EXPECT_NEAR(true_mean(0.5, t), 0.0, 1e-15);
  }
}

TEST(TrueTesd, ClosedForm) {
  const SimParams p;
  EXPECT_NEAR(p.ell_xt, std::sqrt(p.ell_x * p.ell_t), 1e-15);
  EXPECT_DOUBLE_EQ(true_tesd(0.3, 0.3, 0.6, p), 1.01);
  EXPECT_NEAR(true_tesd(-0.5, 0.5, 0.0, p), std::exp(-1.0), 1e-15);
  double prev = true_tesd(0.1, 0.6, 0.0, p);
  for (int n = 1; n <= 10; ++n) {
    const double cur = true_tesd(0.1, 0.6, 0.1 * n, p);
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(TrueTesd, AtTimeZeroIsSpatialFactorPlusNugget) {
  const SimParams p;
  for (double x2 : {-1.0, -0.2, 0.4}) {
    const double d = 0.4 - x2;
    const double spatial = std::exp(-d * d / (2.0 * p.ell_x));
    EXPECT_NEAR(true_tesd(0.4, x2, 0.0, p), spatial + (d == 0.0 ? p.sigma2_eps : 0.0), 1e-15);
  }
}

TEST(SubMesh, FiveByHundredOne) {
  SimParams p;
  p.I = 5;
  p.J = 101;
  const auto s = sim_space(p);
  const auto t = sim_time(p);
  ASSERT_EQ(s.size(), 5);
  ASSERT_EQ(t.size(), 101);
  const double want[] = {-1.0, -0.5, 0.0, 0.5, 1.0};
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(s.points(i, 0), want[i]);
  EXPECT_DOUBLE_EQ(t.times(0), 0.0);
  EXPECT_DOUBLE_EQ(t.times(100), 1.0);
  EXPECT_EQ(submesh_indices(40, 41).back(), 40);
  EXPECT_EQ(submesh_indices(200, 5), (std::vector<int>{0, 50, 100, 150, 200}));
}

TEST(Generate, CapacityAndValidation) {
  SimParams p;
  p.Nx = 400;
  EXPECT_THROW(generate(p), CapacityError);
  p = SimParams{};
  p.K = 0;
  EXPECT_THROW(generate(p), ConfigError);
  p = SimParams{};
  p.I = 500;
  EXPECT_THROW(generate(p), ConfigError);
}

TEST(Generate, FiveByHundredOneFactorizes) {
  SimParams p;
  p.I = 5;
  p.J = 101;
  p.K = 2;
  const auto ds = generate(p);
  EXPECT_EQ(ds.I(), 5);
  EXPECT_EQ(ds.J(), 101);
  EXPECT_EQ(ds.K(), 2);
}

TEST(Generate, Deterministic) {
  SimParams p;
  p.I = 4;
  p.J = 6;
  p.K = 3;
  p.seed = 17;
  const auto a = generate(p);
  const auto b = generate(p);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(a.trials[k], b.trials[k]);
  p.seed = 18;
  EXPECT_NE(generate(p).trials[0], a.trials[0]);
}

TEST(Generate, UnitVarianceWithoutNugget) {
  SimParams p;
  p.I = 5;
  p.J = 5;
  p.K = 2000;
  p.sigma2_eps = 0.0;
  const auto ds = generate(p);
  double m = 0.0;
  for (const auto& y : ds.trials) m += y(2, 3);
  m /= p.K;
  double v = 0.0;
  for (const auto& y : ds.trials) v += (y(2, 3) - m) * (y(2, 3) - m);
  v /= p.K - 1;
  EXPECT_LE(std::abs(v - 1.0), 3.0 * std::sqrt(2.0 / p.K));
}

TEST(Generate, EmpiricalMomentsMatchTruth) {
  SimParams p;
  p.I = 5;
  p.J = 6;
  p.K = 5000;
  const auto ds = generate(p);
  const int n = p.K;
  for (int j = 0; j < ds.J(); ++j) {
    for (int i = 0; i < ds.I(); ++i) {
      double m = 0.0;
      for (const auto& y : ds.trials) m += y(i, j);
      m /= n;
      const double se = std::sqrt((1.0 + p.sigma2_eps) / n);
      EXPECT_LE(std::abs(m - true_mean(ds.space.points(i, 0), ds.time.times(j))), 4.0 * se) << i << "," << j;
    }
  }
  // Covariance of one spatial pair at a fixed time.
  const int a = 1;
  const int b = 3;
  const int j = 4;
  const double ta = ds.time.times(j);
  const double xa = ds.space.points(a, 0);
  const double xb = ds.space.points(b, 0);
  Eigen::ArrayXd ya(n);
  Eigen::ArrayXd yb(n);
  for (int k = 0; k < n; ++k) {
    ya(k) = ds.trials[k](a, j) - true_mean(xa, ta);
    yb(k) = ds.trials[k](b, j) - true_mean(xb, ta);
  }
  const Eigen::ArrayXd prod = ya * yb;
  const double cov = prod.mean();
  const double se = std::sqrt((prod - cov).square().sum() / (n - 1) / n);
  EXPECT_LE(std::abs(cov - true_tesd(xa, xb, ta, p)), 4.0 * se);
}

TEST(TesdError, Trivial) {
  SimParams p;
  p.I = 5;
  p.J = 6;
  const TruthOracle oracle{p};
  const Eigen::VectorXd x = sim_space(p).points.col(0);
  const Eigen::VectorXd t = sim_time(p).times;
  TesdEstimate est;
  for (int j = 0; j < 6; ++j) {
    est.time_indices.push_back(j);
    est.cov.push_back(oracle.cov(x, t(j)));
  }
  const auto e = tesd_error(est, x, t, oracle);
  EXPECT_EQ(e.rmse_overall, 0.0);
  EXPECT_GT(e.flatness_truth, 0.0);
  EXPECT_DOUBLE_EQ(e.flatness_estimate, e.flatness_truth);

  for (auto& c : est.cov) c = oracle.cov(x, 0.3);
  EXPECT_NEAR(tesd_error(est, x, t, oracle).flatness_estimate, 0.0, 1e-15);

  est.cov[2] = Eigen::MatrixXd::Zero(4, 4);
  EXPECT_THROW(tesd_error(est, x, t, oracle), DomainError);
}

TEST(TesdError, TruthFlatnessOnFittingMesh) {
  SimParams p;
  p.I = 5;
  p.J = 41;
  p.Nt = 40;
  const TruthOracle oracle{p};
  const Eigen::VectorXd x = sim_space(p).points.col(0);
  const Eigen::VectorXd t = sim_time(p).times;
  TesdEstimate est;
  for (int j = 0; j < 41; ++j) {
    est.time_indices.push_back(j);
    est.cov.push_back(oracle.cov(x, t(j)));
  }
  const double f = tesd_error(est, x, t, oracle).flatness_truth;
  EXPECT_GT(f, 0.0);
  RecordProperty("flatness_truth", std::to_string(f));
}

TEST(ImageDemo, ShapesAndDeterminism) {
  ImageDemoParams p;
  p.rows = 6;
  p.cols = 5;
  p.J = 3;
  p.K = 4;
  const auto a = generate_image_demo(p);
  ASSERT_EQ(a.size(), 3u);
  for (const auto& ds : a) {
    EXPECT_EQ(ds.I(), 30);
    EXPECT_EQ(ds.J(), 3);
    EXPECT_EQ(ds.K(), 4);
  }
  const auto b = generate_image_demo(p);
  EXPECT_EQ(a[1].trials[2], b[1].trials[2]);
  EXPECT_NE(a[0].trials[0], a[1].trials[0]);
  p.cohorts = 0;
  EXPECT_THROW(generate_image_demo(p), ConfigError);
}
