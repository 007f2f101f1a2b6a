#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "kadapt/experiments.hpp"
#include "kadapt/rng.hpp"

using namespace kadapt;

namespace {

FewShotConfig small_fewshot() {
  FewShotConfig c;
  c.seeds = seed_range(0, 8);
  c.num_samples = 20;
  c.prior_sensitivity.clear();
  c.noise_sweep.clear();
  return c;
}

ExperimentTrace predictive_trace(std::size_t n, double variance, double spread, std::uint64_t seed) {
  Rng rng(seed);
  ExperimentTrace t;
  for (std::size_t i = 0; i < n; ++i) t.predictive.push_back({0.0, variance, spread * rng.normal()});
  return t;
}

}  // namespace

TEST(FewShot, DeterministicAcrossThreadCounts) {
  const auto config = small_fewshot();
  const auto a = run_fewshot_regression(config, {0, 1});
  const auto b = run_fewshot_regression(config, {0, 4});
  ASSERT_EQ(a.traces.size(), b.traces.size());
  for (std::size_t i = 0; i < a.traces.size(); ++i) {
    EXPECT_EQ(a.traces[i].arm, b.traces[i].arm);
    EXPECT_EQ(a.traces[i].records, b.traces[i].records);
  }
  EXPECT_EQ(a.kalman_mse, b.kalman_mse);
}

TEST(FewShot, TracesHaveStrictlyIncreasingSteps) {
  const auto r = run_fewshot_regression(small_fewshot());
  EXPECT_EQ(r.traces.size(), 8u * 6u);
  for (const auto& t : r.traces) {
    EXPECT_NO_THROW(validate_trace(t));
    EXPECT_EQ(t.records.size(), 20u);
    EXPECT_EQ(t.records.front().step, 1u);
  }
}

TEST(FewShot, KalmanBeatsSgdOnAverage) {
  const auto r = run_fewshot_regression(small_fewshot());
  for (const auto& sgd : r.sgd_mse) EXPECT_LT(r.kalman_mse.back(), sgd.back());
}

TEST(FewShot, Validation) {
  auto c = small_fewshot();
  c.noise_var = -1.0;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigInvalid);
    EXPECT_NE(std::string(e.what()).find("noise_var"), std::string::npos);
  }
  c = small_fewshot();
  c.seeds.clear();
  EXPECT_THROW(c.validate(), Error);
}

TEST(ValidateTrace, RejectsRepeatedStep) {
  ExperimentTrace t;
  t.records = {StepRecord{.step = 1}, StepRecord{.step = 1}};
  EXPECT_THROW(validate_trace(t), Error);
  t.records[1].step = 2;
  EXPECT_NO_THROW(validate_trace(t));
}

TEST(TraceFromFilter, FieldsMatchSteps) {
  Rng rng(60);
  std::vector<Observation> obs;
  for (int i = 0; i < 5; ++i) obs.push_back(Observation::scalar(rng.normal_vector(3).transpose(), 0.5, rng.normal()));
  const auto model = StateSpaceModel::random_walk(3);
  const auto init = GaussianBelief::isotropic(Vector::Zero(3), 2.0);
  const auto steps = run_filter(model, init, obs);
  const std::vector<Vector> truths(5, Vector::Ones(3));
  const auto t = trace_from_filter("kalman", steps, truths, 7, 3, obs);
  ASSERT_EQ(t.records.size(), 5u);
  ASSERT_EQ(t.predictive.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    const Matrix& p = steps[i].posterior.covariance();
    EXPECT_EQ(t.records[i].step, i + 1);
    EXPECT_NEAR(*t.records[i].trace_P, p.trace(), 1e-12);
    Eigen::SelfAdjointEigenSolver<Matrix> es(p);
    EXPECT_NEAR(*t.records[i].lambda_min, 1.0 / es.eigenvalues().maxCoeff(), 1e-10);
    EXPECT_NEAR(*t.records[i].sq_error, (steps[i].posterior.mean() - truths[i]).squaredNorm(), 1e-12);
    EXPECT_FALSE(t.records[i].heldout_metric.has_value());
    EXPECT_DOUBLE_EQ(t.predictive[i].target, obs[i].value()(0));
  }
  EXPECT_THROW(trace_from_filter("kalman", steps, std::vector<Vector>(2, Vector::Ones(3)), 7, 3), Error);
}

TEST(Calibration, InfiniteVarianceCoversEverything) {
  const std::vector<ExperimentTrace> traces{predictive_trace(100, std::numeric_limits<double>::infinity(), 1.0, 1)};
  const std::vector<double> levels{0.5, 0.9};
  const auto r = compute_calibration(traces, levels);
  EXPECT_EQ(r.empirical_coverage, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(r.num_trials, 100u);
}

TEST(Calibration, TooFewEvents) {
  const std::vector<ExperimentTrace> traces{predictive_trace(49, 1.0, 1.0, 2)};
  const std::vector<double> levels{0.9};
  try {
    compute_calibration(traces, levels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientData);
  }
}

TEST(Calibration, MatchedVarianceIsNominal) {
  const std::vector<ExperimentTrace> traces{predictive_trace(20000, 1.0, 1.0, 3)};
  const std::vector<double> levels{0.5, 0.9};
  const auto r = compute_calibration(traces, levels);
  EXPECT_NEAR(r.empirical_coverage[0], 0.5, 0.02);
  EXPECT_NEAR(r.empirical_coverage[1], 0.9, 0.02);
}

TEST(Calibration, UnderstatedNoiseUndercovers) {
  auto config = small_fewshot();
  config.seeds = seed_range(0, 40);
  config.filter_noise_factor = 0.1;
  const auto r = run_fewshot_regression(config);
  EXPECT_LT(r.calibration.value().empirical_coverage.back(), 0.8);
}

TEST(HalfLife, Examples) {
  EXPECT_EQ(half_life(std::vector<double>{4, 3, 2, 1}), 2u);
  EXPECT_EQ(half_life(std::vector<double>{4, 3, 3}), 3u);
  EXPECT_EQ(half_life(std::vector<double>{0, 0}), 1u);
}

TEST(Shift, ZeroShiftNeedsNoRecovery) {
  ShiftConfig c;
  c.horizon = 300;
  c.window = 50;
  c.shift_norm = 0.0;
  c.seeds = seed_range(0, 5);
  const auto r = run_streaming_shift(c);
  const auto& q = r.arm("kalman_q0.01");
  ASSERT_TRUE(q.recovery_steps.has_value());
  EXPECT_LE(*q.recovery_steps, 1u);
  EXPECT_NO_THROW(r.arm("kalman_q0"));
  EXPECT_THROW(r.arm("missing"), Error);
}

TEST(Shift, ProcessNoiseRecoversAndFrozenDoesNot) {
  ShiftConfig c;
  c.seeds = seed_range(0, 10);
  const auto r = run_streaming_shift(c);
  const auto& tracked = r.arm("kalman_q0.01");
  const auto& frozen = r.arm("kalman_q0");
  ASSERT_TRUE(tracked.recovery_steps.has_value());
  EXPECT_LE(*tracked.recovery_steps, c.window);
  EXPECT_GT(frozen.post_shift_min, (1.0 + c.recovery_tolerance) * frozen.pre_shift_level);
}

TEST(Shift, Validation) {
  ShiftConfig c;
  c.q_grid = {-0.1};
  EXPECT_THROW(c.validate(), Error);
  c = ShiftConfig{};
  c.window = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(ToyLlm, SummariesAndDeterminism) {
  ToyLlmConfig c;
  c.seeds = seed_range(0, 3);
  const auto a = run_toy_llm(c, {0, 1});
  const auto b = run_toy_llm(c, {0, 3});
  ASSERT_EQ(a.seeds.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_TRUE(a.seeds[i].base_params_unchanged);
    EXPECT_LT(a.seeds[i].trace_ratio, 0.1);
    EXPECT_EQ(a.traces[i].records, b.traces[i].records);
    EXPECT_TRUE(a.traces[i].records.back().heldout_metric.has_value());
  }
}

TEST(Spectral, DriverMatchesSingleRun) {
  SpectralConfig c;
  c.seeds = seed_range(0, 4);
  const auto r = run_spectral(c);
  ASSERT_EQ(r.final_error.size(), 4u);
  EXPECT_EQ(r.mean_error.size(), c.run.num_obs);
  c.components = 40;
  EXPECT_THROW(c.validate(), Error);
}
