#include <gtest/gtest.h>

#include "kadapt/optimization_limits.hpp"
#include "kadapt/stats.hpp"
#include "oracles.hpp"

using namespace kadapt;

namespace {

RegressionDataset scalar_dataset(std::vector<double> ys, double r = 1.0) {
  RegressionDataset data;
  data.noise_var = r;
  for (double y : ys) {
    data.regressors.push_back(Vector::Ones(1));
    data.targets.push_back(y);
  }
  return data;
}

RegressionDataset random_dataset(Rng& rng, Index d, std::size_t n, double r) {
  RegressionDataset data;
  data.noise_var = r;
  data.truth = rng.normal_vector(d);
  for (std::size_t t = 0; t < n; ++t) {
    data.regressors.push_back(rng.normal_vector(d));
    data.targets.push_back(data.regressors.back().dot(*data.truth) + std::sqrt(r) * rng.normal());
  }
  return data;
}

}  // namespace

TEST(BatchPosterior, EmptyReturnsPrior) {
  const auto prior = GaussianBelief::isotropic(Vector::Ones(2), 3.0);
  const auto post = batch_posterior(RegressionDataset{}, prior);
  EXPECT_EQ(post.mean(), prior.mean());
  EXPECT_EQ(post.covariance(), prior.covariance());
}

TEST(BatchPosterior, SingleObservation) {
  const auto post = batch_posterior(scalar_dataset({2.0}), GaussianBelief::isotropic(Vector::Zero(1), 1.0));
  EXPECT_DOUBLE_EQ(post.mean()(0), 1.0);
  EXPECT_DOUBLE_EQ(post.covariance()(0, 0), 0.5);
}

TEST(BatchPosterior, MatchesSequentialFilter) {
  Rng rng(30);
  const auto data = random_dataset(rng, 6, 100, 0.4);
  const GaussianBelief prior(rng.normal_vector(6), oracle::random_spd(rng, 6));
  const auto batch = batch_posterior(data, prior);
  const auto steps = run_filter(StateSpaceModel::random_walk(6), prior, to_observations(data));
  EXPECT_LT(oracle::rel(steps.back().posterior.mean(), batch.mean()), 1e-10);
  EXPECT_LT(oracle::rel(steps.back().posterior.covariance(), batch.covariance()), 1e-10);
}

TEST(Dataset, Validation) {
  RegressionDataset data = scalar_dataset({1.0, 2.0});
  data.targets.pop_back();
  EXPECT_THROW(data.validate(), Error);
  data = scalar_dataset({1.0}, -1.0);
  EXPECT_THROW(data.validate(), Error);
}

TEST(GdLimit, ZeroOperatorNoMovement) {
  const GaussianBelief b(Vector::Ones(2), Matrix::Identity(2, 2));
  for (double eps : {1e-3, 0.1, 1.0}) {
    EXPECT_EQ(gd_limit_step(b, Observation::scalar(RowVector::Zero(2), 1.0, 5.0), eps), b.mean());
  }
}

TEST(GdLimit, ZeroOperatorAtZeroEpsilonIsSingular) {
  const GaussianBelief b(Vector::Ones(2), Matrix::Identity(2, 2));
  EXPECT_THROW(gd_limit_step(b, Observation::scalar(RowVector::Zero(2), 1.0, 5.0), 0.0), Error);
}

TEST(GdLimit, FullCorrectionAtZero) {
  const auto b = GaussianBelief::isotropic(Vector::Zero(1), 1.0);
  EXPECT_DOUBLE_EQ(gd_limit_step(b, Observation::scalar(RowVector::Ones(1), 1.0, 2.0), 0.0)(0), 2.0);
}

TEST(GdLimit, DeviationLinearInEpsilon) {
  Rng rng(31);
  const GaussianBelief b(rng.normal_vector(3), oracle::random_spd(rng, 3, 1.0));
  const auto obs = Observation::scalar(rng.normal_vector(3).transpose(), 1.0, 4.0);
  const Vector limit = gd_limit_step(b, obs, 0.0);
  const std::vector<double> eps{1.0, 0.1, 0.01, 0.001};
  std::vector<double> dev;
  for (double e : eps) dev.push_back((gd_limit_step(b, obs, e) - limit).norm());
  EXPECT_NEAR(stats::power_law_exponent(eps, dev), 1.0, 0.1);
}

TEST(GdLimit, Singular) {
  const auto b = GaussianBelief::isotropic(Vector::Zero(2), 1.0);
  try {
    gd_limit_step(b, Observation::scalar(RowVector::Zero(2), 1.0, 1.0), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularInnovation);
  }
}

TEST(Sgd, ZeroTargetsStayAtZero) {
  Rng rng(32);
  RegressionDataset data = random_dataset(rng, 3, 10, 1.0);
  std::fill(data.targets.begin(), data.targets.end(), 0.0);
  for (const auto& it : sgd_baseline(data, Vector::Zero(3), 0.1)) EXPECT_EQ(it, Vector::Zero(3));
}

TEST(Sgd, GeometricApproach) {
  const auto iterates = sgd_baseline(scalar_dataset({1, 1, 1}), Vector::Zero(1), 0.5);
  ASSERT_EQ(iterates.size(), 3U);
  EXPECT_DOUBLE_EQ(iterates[0](0), 0.5);
  EXPECT_DOUBLE_EQ(iterates[1](0), 0.75);
  EXPECT_DOUBLE_EQ(iterates[2](0), 0.875);
}

TEST(Sgd, DivergesAboveStabilityThreshold) {
  const auto iterates = sgd_baseline(scalar_dataset(std::vector<double>(20, 1.0)), Vector::Zero(1), 2.5);
  for (std::size_t t = 1; t < iterates.size(); ++t) {
    EXPECT_GT(std::abs(iterates[t](0) - 1.0), std::abs(iterates[t - 1](0) - 1.0));
  }
}

TEST(Ridge, LargeLambdaShrinksToZero) {
  Rng rng(33);
  EXPECT_LT(ridge_baseline(random_dataset(rng, 3, 20, 0.1), 1e12).norm(), 1e-9);
}

TEST(Ridge, MatchesPosteriorMean) {
  Rng rng(34);
  const auto data = random_dataset(rng, 4, 30, 0.5);
  const double p0 = 3.0;
  const auto post = batch_posterior(data, GaussianBelief::isotropic(Vector::Zero(4), p0));
  EXPECT_LT(oracle::rel(ridge_baseline(data, data.noise_var / p0), post.mean()), 1e-10);
}

TEST(Ridge, ExactRecoveryWithoutRegularization) {
  Rng rng(35);
  RegressionDataset data = random_dataset(rng, 4, 4, 1.0);
  for (std::size_t i = 0; i < 4; ++i) data.targets[i] = data.regressors[i].dot(*data.truth);
  EXPECT_LT((ridge_baseline(data, 0.0) - *data.truth).norm(), 1e-10);
}

TEST(Ridge, RankDeficient) {
  try {
    ridge_baseline(scalar_dataset({1.0}), 0.0);
  } catch (...) {
    FAIL() << "scalar design is full rank";
  }
  RegressionDataset data;
  data.regressors = {Vector::Ones(2), Vector::Ones(2)};
  data.targets = {1.0, 1.0};
  try {
    ridge_baseline(data, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSingularSystem);
  }
}

TEST(Regret, PerfectPriorHasNoRegret) {
  RegressionDataset data = scalar_dataset({1, 1, 1});
  data.truth = Vector::Ones(1);
  const auto steps = run_filter(StateSpaceModel::random_walk(1), GaussianBelief::isotropic(Vector::Ones(1), 1.0),
                                to_observations(data));
  for (const auto& p : regret_curve(steps, data)) EXPECT_EQ(p.instantaneous, 0.0);
}

TEST(Regret, ScalarClosedForm) {
  // μ_t = t/(t+1) for noise-free y = 1, so r_t = 1/t².
  RegressionDataset data = scalar_dataset(std::vector<double>(50, 1.0));
  data.truth = Vector::Ones(1);
  const auto steps = run_filter(StateSpaceModel::random_walk(1), GaussianBelief::isotropic(Vector::Zero(1), 1.0),
                                to_observations(data));
  const auto curve = regret_curve(steps, data);
  double cumulative = 0.0;
  for (std::size_t t = 1; t <= curve.size(); ++t) {
    const double want = 1.0 / static_cast<double>(t * t);
    cumulative += want;
    EXPECT_NEAR(curve[t - 1].instantaneous, want, 1e-14);
    EXPECT_NEAR(curve[t - 1].cumulative, cumulative, 1e-12);
    EXPECT_NEAR(curve[t - 1].log_det_bound, std::log(1.0 + static_cast<double>(t)), 1e-12);
  }
}

TEST(Regret, MissingTruth) {
  const auto data = scalar_dataset({1.0});
  const auto steps = run_filter(StateSpaceModel::random_walk(1), GaussianBelief::isotropic(Vector::Zero(1), 1.0),
                                to_observations(data));
  try {
    regret_curve(steps, data);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingTruth);
  }
}

TEST(Regret, LogarithmicGrowth) {
  std::vector<double> at{0, 0, 0};
  const std::vector<std::size_t> horizons{100, 1000, 10000};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(36 + seed);
    const auto data = random_dataset(rng, 3, 10000, 0.25);
    const auto steps = run_filter(StateSpaceModel::random_walk(3), GaussianBelief::isotropic(Vector::Zero(3), 1.0),
                                  to_observations(data));
    const auto curve = regret_curve(steps, data);
    for (std::size_t k = 0; k < 3; ++k) at[k] += curve[horizons[k] - 1].cumulative;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_LT(at[k] / 5.0 / std::log(static_cast<double>(horizons[k])), 5.0);
  }
}

TEST(PersistentExcitation, ErrorVanishes) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    const auto data = random_dataset(rng, 4, 10000, 0.25);
    const auto steps = run_filter(StateSpaceModel::random_walk(4), GaussianBelief::isotropic(Vector::Zero(4), 10.0),
                                  to_observations(data));
    EXPECT_LT((steps.back().posterior.mean() - *data.truth).norm(), 0.05);
    EXPECT_GT(1.0 / max_eigenvalue(steps.back().posterior.covariance()),
              1.0 / max_eigenvalue(steps[999].posterior.covariance()));
  }
}
