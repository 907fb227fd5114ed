#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "stgp/error.hpp"
#include "stgp/predict.hpp"

using namespace stgp;

namespace {

PriorConfig prior_for(ModelKind model, int L) {
  PriorConfig p;
  p.model = model;
  p.L = L;
  p.a = {3.0, 3.0, 3.0};
  p.b = {1.0, 2.0, 2.0};
  p.m = {0.0, -0.5, -0.5};
  p.V = {0.25, 0.25, 0.25};
  return p;
}

struct Fitted {
  SpatioTemporalDataset ds;
  PosteriorSamples samples;
};

Fitted small_fit(Rng& rng, ModelKind model, int I, int J, int K, int L, long iters = 12) {
  auto in = oracle::random_logpost_instance(rng, model, 2, 2, 1);
  std::vector<Eigen::MatrixXd> y;
  for (int k = 0; k < K; ++k) y.push_back(rng.normal_matrix(I, J));
  Fitted f;
  f.ds = SpatioTemporalDataset(SpaceGrid::linspace(-1, 1, I), TimeGrid::linspace(0.1, 1.0, J), y);
  f.samples = fit(f.ds, prior_for(model, L), RunParams{iters, iters - 5, 1, rng.next_u64() % 1000, false});
  return f;
}

}  // namespace

TEST(PredictMean, Model2MatchesDenseConditioning) {
  Rng rng(1);
  for (int rep = 0; rep < 25; ++rep) {
    const int I = 2 + rep % 4;
    const int J = 1 + rep % 5;
    const auto f = small_fit(rng, ModelKind::II, I, J, 1 + rep % 3, 1 + rep % I);
    const Predictor pred(f.samples, f.ds);
    const int i = rep % I;
    const double t_star = rng.uniform(0.0, 1.3);
    for (const Draw& d : f.samples.draws) {
      const auto basis = pred.space().basis(d.h.eta_x);
      const auto want = oracle::dense_predict_m2(d.h, d.lambda, f.ds, f.samples.prior, *basis, i, t_star);
      const auto got = pred.mean_draw(d, {f.ds.space.points.row(i).transpose(), t_star});
      ASSERT_NEAR(got.mean, want.mean, 1e-8 * std::max(1.0, std::abs(want.mean)));
      ASSERT_NEAR(got.var, std::max(want.var, 0.0), 1e-8 * std::max(1.0, want.var));
    }
  }
}

TEST(PredictMean, Model1MatchesDenseConditioning) {
  Rng rng(2);
  for (int rep = 0; rep < 25; ++rep) {
    const int I = 2 + rep % 4;
    const int J = 1 + rep % 5;
    const auto f = small_fit(rng, ModelKind::I, I, J, 1 + rep % 3, 1 + rep % I);
    const Predictor pred(f.samples, f.ds);
    const int i = rep % I;
    const double t_star = (rep % 2) ? f.ds.time.times(rep % J) : rng.uniform(0.0, 1.3);
    for (const Draw& d : f.samples.draws) {
      const auto basis = pred.space().basis(d.h.eta_x);
      const Eigen::VectorXd phi_star = basis->phi.row(i).transpose();
      const auto want = oracle::dense_predict_m1(d.h, d.lambda, f.ds, f.samples.prior, *basis, phi_star, t_star);
      const auto got = pred.mean_draw(d, {f.ds.space.points.row(i).transpose(), t_star});
      ASSERT_NEAR(got.mean, want.mean, 1e-8 * std::max(1.0, std::abs(want.mean)));
      ASSERT_NEAR(got.var, std::max(want.var, 0.0), 1e-8 * std::max(1.0, want.var));
    }
  }
}

TEST(PredictMean, Model1InterpolatesAtTinyNoise) {
  Rng rng(3);
  auto f = small_fit(rng, ModelKind::I, 3, 3, 2, 3, 6);
  for (auto& d : f.samples.draws) d.h.sigma2_eps = 1e-10;
  const Predictor pred(f.samples, f.ds);
  const auto stats = sufficient_stats(f.ds);
  for (int j = 0; j < 3; ++j) {
    for (int i = 0; i < 3; ++i) {
      const auto p = pred.mean({{f.ds.space.points.row(i).transpose(), f.ds.time.times(j)}});
      EXPECT_NEAR(p[0].mean, stats.ybar(j * 3 + i), 1e-4);
    }
  }
}

TEST(PredictMean, AggregationAndBands) {
  Rng rng(4);
  const auto f = small_fit(rng, ModelKind::II, 4, 3, 2, 2);
  const Predictor pred(f.samples, f.ds);
  const auto p = pred.mean({{f.ds.space.points.row(1).transpose(), 0.55}, {Eigen::VectorXd::Constant(1, 0.123), 0.3}});
  ASSERT_EQ(p.size(), 2u);
  for (const auto& m : p) {
    EXPECT_GE(m.variance, 0.0);
    EXPECT_LE(m.lo, m.mean);
    EXPECT_GE(m.hi, m.mean);
    double mean = 0.0;
    for (const auto& d : m.per_draw) mean += d.mean;
    EXPECT_NEAR(m.mean, mean / m.per_draw.size(), 1e-14);
  }
  // Off-grid location under Model II carries no information from the data.
  for (const auto& d : p[1].per_draw) EXPECT_EQ(d.mean, 0.0);
}

TEST(PredictTesdFuture, ReproducesFittedValuesAtTrainingTimes) {
  Rng rng(5);
  const auto f = small_fit(rng, ModelKind::II, 4, 4, 2, 3);
  const Predictor pred(f.samples, f.ds);
  for (int j = 0; j < 4; ++j) {
    const auto p = pred.tesd_future(f.ds.time.times(j));
    for (std::size_t s = 0; s < f.samples.draws.size(); ++s) {
      const auto& d = f.samples.draws[s];
      const auto want = assemble_cxt(*pred.space().basis(d.h.eta_x), d.lambda, j);
      EXPECT_LE((p.per_draw[s] - want).cwiseAbs().maxCoeff(), 1e-10);
    }
  }
}

TEST(PredictTesdFuture, MatchesDenseConditionalPerDraw) {
  Rng rng(6);
  const auto f = small_fit(rng, ModelKind::II, 4, 5, 2, 3);
  const Predictor pred(f.samples, f.ds);
  for (double t_star : {0.05, 0.47, 1.2, 2.0}) {
    const auto p = pred.tesd_future(t_star);
    for (std::size_t s = 0; s < f.samples.draws.size(); ++s) {
      const auto& d = f.samples.draws[s];
      const auto basis = pred.space().basis(d.h.eta_x);
      const Eigen::VectorXd lam = oracle::dense_lambda_at(d.h, d.lambda, f.ds.time.times, t_star, 2.0);
      const Eigen::MatrixXd want = basis->phi * lam.array().square().matrix().asDiagonal() * basis->phi.transpose();
      EXPECT_LE((p.per_draw[s] - want).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_TRUE((p.lo.array() <= p.hi.array()).all());
    EXPECT_LE(p.corr.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
  }
}

TEST(PredictTesdFuture, DecaysFarFromData) {
  Rng rng(7);
  const auto f = small_fit(rng, ModelKind::II, 3, 4, 2, 2);
  const Predictor pred(f.samples, f.ds);
  double rho = 0.0;
  for (const auto& d : f.samples.draws) rho = std::max(rho, std::exp(d.h.eta_u));
  const auto p = pred.tesd_future(f.ds.time.times.maxCoeff() + 100.0 * rho);
  EXPECT_LE(p.mean.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(PredictTesdFuture, ConditionalVarianceOption) {
  Rng rng(8);
  const auto f = small_fit(rng, ModelKind::II, 3, 4, 2, 2);
  const Predictor pred(f.samples, f.ds);
  const auto a = pred.tesd_future(0.33, false);
  const auto b = pred.tesd_future(0.33, true);
  EXPECT_TRUE((b.mean.diagonal().array() >= a.mean.diagonal().array()).all());
  const auto c = pred.tesd_future(f.ds.time.times(2), true);
  const auto e = pred.tesd_future(f.ds.time.times(2), false);
  EXPECT_LE((c.mean - e.mean).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictTesdNeighbor, ReproducesFittedColumnsAtTrainingLocations) {
  Rng rng(9);
  const auto f = small_fit(rng, ModelKind::II, 5, 3, 2, 3);
  const Predictor pred(f.samples, f.ds);
  for (int i = 0; i < 5; ++i) {
    const auto p = pred.tesd_neighbor(f.ds.space.points.row(i).transpose());
    EXPECT_EQ(p.dropped_terms, 0);
    for (std::size_t s = 0; s < f.samples.draws.size(); ++s) {
      const auto& d = f.samples.draws[s];
      const auto basis = pred.space().basis(d.h.eta_x);
      for (int j = 0; j < 3; ++j) {
        const Eigen::VectorXd want = assemble_cxt(*basis, d.lambda, j).col(i);
        EXPECT_LE((p.per_draw[s].col(j) - want).cwiseAbs().maxCoeff(), 1e-10);
      }
    }
  }
}

TEST(PredictTesdNeighbor, MatchesDenseNystromPerDraw) {
  Rng rng(10);
  const auto f = small_fit(rng, ModelKind::II, 5, 3, 2, 3);
  const Predictor pred(f.samples, f.ds);
  const Eigen::VectorXd x_star = Eigen::VectorXd::Constant(1, 0.1);
  const auto p = pred.tesd_neighbor(x_star);
  for (std::size_t s = 0; s < f.samples.draws.size(); ++s) {
    const auto& d = f.samples.draws[s];
    const auto basis = pred.space().basis(d.h.eta_x);
    const double rho = std::exp(d.h.eta_x);
    Eigen::VectorXd k(5);
    for (int i = 0; i < 5; ++i) {
      const double dx = f.ds.space.points(i, 0) - 0.1;
      k(i) = std::exp(-0.5 * dx * dx / (rho * rho));
    }
    for (int j = 0; j < 3; ++j) {
      for (int i = 0; i < 5; ++i) {
        double want = 0.0;
        for (int l = 0; l < 3; ++l) {
          const double phi_star = k.dot(basis->phi.col(l)) / (basis->lambda0(l) * basis->lambda0(l));
          want += d.lambda(j, l) * d.lambda(j, l) * basis->phi(i, l) * phi_star;
        }
        EXPECT_NEAR(p.per_draw[s](i, j), want, 1e-10 * std::max(1.0, std::abs(want)));
      }
    }
  }
}

TEST(PredictTesdNeighbor, DecaysFarAway) {
  Rng rng(11);
  const auto f = small_fit(rng, ModelKind::II, 4, 3, 2, 2);
  const Predictor pred(f.samples, f.ds);
  const auto p = pred.tesd_neighbor(Eigen::VectorXd::Constant(1, 1e3));
  EXPECT_LE(p.mean.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PredictTesd, UnsupportedForModelI) {
  Rng rng(12);
  const auto f = small_fit(rng, ModelKind::I, 3, 3, 2, 2);
  const Predictor pred(f.samples, f.ds);
  try {
    pred.tesd_neighbor(Eigen::VectorXd::Constant(1, 0.1));
    FAIL();
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("unsupported for model I"), std::string::npos);
  }
  EXPECT_THROW(pred.tesd_future(0.5), DomainError);
}

TEST(PredictTesdNeighbor, GraphLaplacianUnsupportedOffGrid) {
  Rng rng(13);
  PriorConfig p = prior_for(ModelKind::II, 3);
  p.spatial_kernel = SpatialKernelKind::graph_laplacian;
  p.graph = {3, 3, 1, 2};
  std::vector<Eigen::MatrixXd> y{rng.normal_matrix(9, 2), rng.normal_matrix(9, 2)};
  const SpatioTemporalDataset ds(SpaceGrid::image(3, 3), TimeGrid::linspace(0, 1, 2), y);
  const auto s = fit(ds, p, RunParams{4, 2, 1, 1, false});
  const Predictor pred(s, ds);
  EXPECT_THROW(pred.tesd_neighbor(Eigen::Vector2d(0.5, 0.5)), DomainError);
  EXPECT_NO_THROW(pred.tesd_neighbor(Eigen::Vector2d(1.0, 2.0)));
}

TEST(PredictionCsv, Layout) {
  const auto dir = std::filesystem::temp_directory_path() / "stgp_test_predcsv";
  std::filesystem::create_directories(dir);
  write_prediction_csv(dir / "p.csv", {{"a", 1.5, 1.0, 2.0}, {"b", -0.25, -1.0, 0.5}});
  EXPECT_EQ(read_file(dir / "p.csv"), "target-id,estimate,lo2.5,hi97.5\na,1.5,1,2\nb,-0.25,-1,0.5\n");
}
