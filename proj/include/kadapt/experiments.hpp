#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kadapt/adaptation_subspace.hpp"
#include "kadapt/linear_filter.hpp"
#include "kadapt/observability.hpp"
#include "kadapt/optimization_limits.hpp"
#include "kadapt/spectral.hpp"

namespace kadapt {

/// One row of a trace. Unset fields are inapplicable to the producing arm.
struct StepRecord {
  std::size_t step = 0;
  std::optional<double> trace_P;
  std::optional<double> lambda_min;  // λ_min(Λ_t) = 1/λ_max(P_t)
  std::optional<double> gain_norm;
  std::optional<double> innovation;
  std::optional<double> sq_error;
  std::optional<double> heldout_metric;

  bool operator==(const StepRecord&) const = default;
};

/// One-step-ahead Gaussian predictive and the value that was then observed.
struct PredictiveEvent {
  double mean = 0.0;
  double variance = 0.0;
  double target = 0.0;
};

struct ExperimentTrace {
  std::string arm;  // e.g. "kalman", "sgd_0.1"
  std::vector<StepRecord> records;
  std::uint64_t config_fingerprint = 0;
  std::uint64_t seed = 0;
  std::vector<PredictiveEvent> predictive;  // not serialized
};

/// Records for a filter run, steps numbered from 1. `truths` may be empty
/// or hold one state per step. Given the scalar observations that drove the
/// run, predictive events are filled as well.
ExperimentTrace trace_from_filter(std::string arm, std::span<const FilterStep> steps,
                                  std::span<const Vector> truths, std::uint64_t fingerprint,
                                  std::uint64_t seed,
                                  std::span<const Observation> observations = {});

/// Throws InvalidArgument unless step indices strictly increase.
void validate_trace(const ExperimentTrace& trace);

struct CalibrationReport {
  std::vector<double> nominal_levels;
  std::vector<double> empirical_coverage;
  std::size_t num_trials = 0;
};

inline constexpr std::size_t kMinCalibrationEvents = 50;

/// Fraction of targets inside mean ± z·sqrt(variance), pooled over traces.
CalibrationReport compute_calibration(std::span<const ExperimentTrace> traces,
                                      std::span<const double> nominal_levels);

/// Execution-only settings; excluded from the fingerprint.
struct ExecutionOptions {
  std::uint64_t fingerprint = 0;
  unsigned threads = 0;  // 0 = hardware concurrency
};

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count);

enum class FeatureKind { kGaussian, kEncoder };

struct FewShotConfig {
  Index dim = 8;
  double noise_var = 0.25;
  double prior_scale = 10.0;
  std::size_t num_samples = 50;
  std::vector<std::uint64_t> seeds = seed_range(0, 200);
  std::vector<double> sgd_steps{0.01, 0.05, 0.1, 0.5};
  double ridge_lambda = 1.0;
  std::vector<double> prior_sensitivity{1.0, 10.0, 100.0};
  std::vector<double> noise_sweep{0.01, 0.25, 1.0, 4.0};
  std::vector<double> calibration_levels{0.5, 0.9};
  /// Variance the filter assumes, as a multiple of noise_var (1 = exact model).
  double filter_noise_factor = 1.0;
  FeatureKind features = FeatureKind::kGaussian;
  Index encoder_input_dim = 4;

  void validate() const;
};

/// Mean over seeds of a per-step quantity, index n−1 for n samples.
using Curve = std::vector<double>;

struct SweepRow {
  double parameter = 0.0;
  Curve kalman_mse;
  std::vector<Curve> sgd_mse;  // parallel to FewShotConfig::sgd_steps
};

struct FewShotResult {
  std::vector<ExperimentTrace> traces;  // per seed: kalman, each sgd, ridge
  Curve kalman_mse;
  std::vector<Curve> sgd_mse;
  Curve ridge_mse;
  std::optional<CalibrationReport> calibration;  // none below kMinCalibrationEvents
  MseReport envelope;
  std::vector<SweepRow> prior_sensitivity;
  std::vector<SweepRow> noise_sweep;
  std::vector<std::vector<FilterStep>> kalman_steps;  // per seed
  std::vector<Vector> truths;                          // per seed
};

FewShotResult run_fewshot_regression(const FewShotConfig& config,
                                     const ExecutionOptions& exec = {});

/// Regression data for one seed, as used by the few-shot and shift drivers.
RegressionDataset make_regression_dataset(const FewShotConfig& config, std::uint64_t seed);

struct ShiftConfig {
  Index dim = 4;
  std::size_t horizon = 1000;
  double shift_norm = 2.0;
  double noise_var = 0.25;
  double prior_scale = 10.0;
  std::vector<double> q_grid{0.01};
  std::vector<double> sgd_steps{0.01, 0.05, 0.1, 0.5};
  std::vector<std::uint64_t> seeds = seed_range(0, 50);
  std::size_t window = 100;  // pre-shift averaging and post-shift recovery horizon
  double recovery_tolerance = 0.1;

  std::size_t shift_time() const noexcept { return horizon / 2; }
  void validate() const;
};

struct ShiftArmSummary {
  std::string arm;
  Curve mean_error;  // ‖μ_t − x*_t‖² averaged over seeds
  double pre_shift_level = 0.0;
  double post_shift_mean = 0.0;  // over the `window` steps after the shift
  /// Steps after the shift until error ≤ (1 + tol)·pre level; none if not within `window`.
  std::optional<std::size_t> recovery_steps;
  double post_shift_min = 0.0;
};

struct ShiftResult {
  std::vector<ExperimentTrace> traces;
  std::vector<ShiftArmSummary> arms;  // kalman_q<q> per grid entry, kalman_q0, sgd_<step>...
  std::string best_sgd_arm;           // lowest pre-shift level

  const ShiftArmSummary& arm(const std::string& name) const;
};

ShiftResult run_streaming_shift(const ShiftConfig& config, const ExecutionOptions& exec = {});

struct ToyLlmConfig {
  ToyTaskConfig task;
  double noise_var = 1.0;
  double prior_scale = 2.0;
  double process_noise = 0.0;
  LinearizationOptions linearization;
  std::vector<std::uint64_t> seeds = seed_range(0, 10);

  void validate() const;
};

struct ToyLlmSeedSummary {
  std::uint64_t seed = 0;
  double base_heldout_nll = 0.0;
  double final_heldout_nll = 0.0;
  std::size_t trace_half_life = 0;  // steps; demo length + 1 if never halved
  std::size_t error_half_life = 0;
  std::vector<double> gain_norms;
  double trace_ratio = 0.0;  // tr(P_n) / tr(P_0)
  bool base_params_unchanged = false;
};

struct ToyLlmResult {
  std::vector<ExperimentTrace> traces;
  std::vector<ToyLlmSeedSummary> seeds;
};

ToyLlmResult run_toy_llm(const ToyLlmConfig& config, const ExecutionOptions& exec = {});

/// First step at which series[t] ≤ series[0]/2, or series.size() if none.
std::size_t half_life(std::span<const double> series);

enum class BasisKind { kCosine, kLaplacian };

struct SpectralConfig {
  BasisKind basis = BasisKind::kCosine;
  Index domain_size = 32;
  Index components = 8;
  SpectralRunOptions run;
  std::vector<std::uint64_t> seeds = seed_range(0, 20);

  void validate() const;
};

struct SpectralResult {
  std::vector<ExperimentTrace> traces;
  Curve mean_error;
  std::vector<double> final_error;  // ‖â − a*‖ per seed
};

SpectralResult run_spectral(const SpectralConfig& config, const ExecutionOptions& exec = {});

}  // namespace kadapt
