#include "kadapt/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "kadapt/rng.hpp"
#include "kadapt/stats.hpp"

namespace kadapt {
namespace {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written to index i only, so output order does not depend on scheduling.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (n == 0) return;
  std::size_t workers = threads != 0 ? threads : std::max(1U, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    for (std::size_t k = 1; k < workers; ++k) pool.emplace_back(work);
    work();
  }
  if (failure) std::rethrow_exception(failure);
}

[[noreturn]] void invalid(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfigInvalid, field + ": " + why);
}

void require_positive(double value, const char* field) {
  if (!(value > 0.0) || !std::isfinite(value)) invalid(field, "must be a finite value > 0");
}

void require_seeds(const std::vector<std::uint64_t>& seeds, const char* field) {
  if (seeds.empty()) invalid(field, "seed list must be nonempty");
}

std::string arm_name(const char* prefix, double parameter) {
  std::ostringstream out;
  out << prefix << parameter;
  return out.str();
}

double finite_or_inf(double x) { return std::isfinite(x) ? x : std::numeric_limits<double>::infinity(); }

// Column means of per-seed curves of equal length.
Curve average(const std::vector<Curve>& per_seed) {
  Curve out(per_seed.front().size(), 0.0);
  for (const Curve& c : per_seed) {
    for (std::size_t t = 0; t < c.size(); ++t) out[t] += c[t];
  }
  for (double& v : out) v /= static_cast<double>(per_seed.size());
  return out;
}

Curve squared_errors(std::span<const FilterStep> steps, std::span<const Vector> truths) {
  Curve out;
  out.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    out.push_back((steps[t].posterior.mean() - truths[t]).squaredNorm());
  }
  return out;
}

Curve squared_errors(std::span<const Vector> iterates, std::span<const Vector> truths) {
  Curve out;
  out.reserve(iterates.size());
  for (std::size_t t = 0; t < iterates.size(); ++t) {
    out.push_back((iterates[t] - truths[t]).squaredNorm());
  }
  return out;
}

ExperimentTrace trace_from_iterates(std::string arm, const RegressionDataset& data,
                                    std::span<const Vector> iterates,
                                    std::span<const Vector> truths, const Vector& init,
                                    std::uint64_t fingerprint, std::uint64_t seed) {
  ExperimentTrace trace{std::move(arm), {}, fingerprint, seed, {}};
  trace.records.reserve(iterates.size());
  for (std::size_t t = 0; t < iterates.size(); ++t) {
    const Vector& before = t == 0 ? init : iterates[t - 1];
    StepRecord r;
    r.step = t + 1;
    r.innovation = data.targets[t] - data.regressors[t].dot(before);
    r.sq_error = (iterates[t] - truths[t]).squaredNorm();
    trace.records.push_back(r);
  }
  return trace;
}

std::vector<Vector> constant_truths(const Vector& truth, std::size_t count) {
  return std::vector<Vector>(count, truth);
}

GaussianBelief regression_prior(Index dim, double scale) {
  return GaussianBelief::isotropic(Vector::Zero(dim), scale);
}

std::vector<Observation> filter_observations(const RegressionDataset& data, double filter_var) {
  RegressionDataset assumed = data;
  assumed.noise_var = filter_var;
  return to_observations(assumed);
}

}  // namespace

ExperimentTrace trace_from_filter(std::string arm, std::span<const FilterStep> steps,
                                  std::span<const Vector> truths, std::uint64_t fingerprint,
                                  std::uint64_t seed, std::span<const Observation> observations) {
  if (!truths.empty() && truths.size() != steps.size()) {
    throw Error(ErrorCode::kLengthMismatch, "truths must be empty or one per step");
  }
  if (!observations.empty() && observations.size() != steps.size()) {
    throw Error(ErrorCode::kLengthMismatch, "observations must be empty or one per step");
  }
  ExperimentTrace trace{std::move(arm), {}, fingerprint, seed, {}};
  trace.records.reserve(steps.size());
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const FilterStep& s = steps[t];
    const Matrix& p = s.posterior.covariance();
    StepRecord r;
    r.step = t + 1;
    r.trace_P = p.trace();
    r.lambda_min = 1.0 / max_eigenvalue(p);
    r.gain_norm = s.gain.cols() == 1 ? s.gain.norm() : spectral_norm(s.gain);
    r.innovation = s.innovation.size() == 1 ? s.innovation(0) : s.innovation.norm();
    if (!truths.empty()) r.sq_error = (s.posterior.mean() - truths[t]).squaredNorm();
    trace.records.push_back(r);
    if (!observations.empty() && s.innovation.size() == 1) {
      const double y = observations[t].value()(0);
      trace.predictive.push_back({y - s.innovation(0), s.innovation_cov(0, 0), y});
    }
  }
  return trace;
}

void validate_trace(const ExperimentTrace& trace) {
  for (std::size_t i = 1; i < trace.records.size(); ++i) {
    if (trace.records[i].step <= trace.records[i - 1].step) {
      throw Error(ErrorCode::kInvalidArgument, "trace steps must strictly increase");
    }
  }
}

CalibrationReport compute_calibration(std::span<const ExperimentTrace> traces,
                                      std::span<const double> nominal_levels) {
  std::size_t events = 0;
  for (const ExperimentTrace& t : traces) events += t.predictive.size();
  if (events < kMinCalibrationEvents) {
    throw Error(ErrorCode::kInsufficientData, "calibration needs at least 50 predictive events, got " +
                                                  std::to_string(events));
  }
  CalibrationReport report;
  report.num_trials = events;
  for (const double level : nominal_levels) {
    if (!(level > 0.0 && level < 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "nominal level must lie in (0, 1)");
    }
    const double z = stats::central_interval_z(level);
    std::size_t inside = 0;
    for (const ExperimentTrace& t : traces) {
      for (const PredictiveEvent& e : t.predictive) {
        if (std::abs(e.target - e.mean) <= z * std::sqrt(e.variance)) ++inside;
      }
    }
    report.nominal_levels.push_back(level);
    report.empirical_coverage.push_back(static_cast<double>(inside) / static_cast<double>(events));
  }
  return report;
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  std::iota(seeds.begin(), seeds.end(), first);
  return seeds;
}

// ---- few-shot regression ---------------------------------------------------

void FewShotConfig::validate() const {
  if (dim < 1) invalid("fewshot.dim", "must be >= 1");
  require_positive(noise_var, "fewshot.noise_var");
  require_positive(prior_scale, "fewshot.prior_scale");
  if (num_samples < 1) invalid("fewshot.num_samples", "must be >= 1");
  require_seeds(seeds, "fewshot.seeds");
  if (sgd_steps.empty()) invalid("fewshot.sgd_steps", "must be nonempty");
  for (double s : sgd_steps) require_positive(s, "fewshot.sgd_steps");
  if (!(ridge_lambda >= 0.0)) invalid("fewshot.ridge_lambda", "must be >= 0");
  for (double s : prior_sensitivity) require_positive(s, "fewshot.prior_sensitivity");
  for (double s : noise_sweep) require_positive(s, "fewshot.noise_sweep");
  for (double l : calibration_levels) {
    if (!(l > 0.0 && l < 1.0)) invalid("fewshot.calibration_levels", "entries must lie in (0, 1)");
  }
  require_positive(filter_noise_factor, "fewshot.filter_noise_factor");
  if (encoder_input_dim < 1) invalid("fewshot.encoder_input_dim", "must be >= 1");
}

RegressionDataset make_regression_dataset(const FewShotConfig& config, std::uint64_t seed) {
  Rng truth_rng(seed, Stream::kTruth);
  Rng regressor_rng(seed, Stream::kRegressors);
  Rng noise_rng(seed, Stream::kNoise);
  RegressionDataset data;
  data.noise_var = config.noise_var;
  data.truth = truth_rng.normal_vector(config.dim);

  Matrix encoder;
  if (config.features == FeatureKind::kEncoder) {
    Rng encoder_rng(seed, Stream::kEncoder);
    encoder = encoder_rng.normal_matrix(config.dim, config.encoder_input_dim) /
              std::sqrt(static_cast<double>(config.encoder_input_dim));
  }
  const double noise_sd = std::sqrt(config.noise_var);
  for (std::size_t t = 0; t < config.num_samples; ++t) {
    Vector phi = config.features == FeatureKind::kGaussian
                     ? regressor_rng.normal_vector(config.dim)
                     : Vector((encoder * regressor_rng.normal_vector(config.encoder_input_dim))
                                  .array()
                                  .tanh());
    data.targets.push_back(phi.dot(*data.truth) + noise_sd * noise_rng.normal());
    data.regressors.push_back(std::move(phi));
  }
  return data;
}

namespace {

struct FewShotSeedRun {
  std::vector<FilterStep> kalman;
  std::vector<ExperimentTrace> traces;
  Curve kalman_err;
  std::vector<Curve> sgd_err;
  Curve ridge_err;
};

FewShotSeedRun run_fewshot_seed(const FewShotConfig& config, std::uint64_t seed,
                                std::uint64_t fingerprint, bool with_baselines,
                                bool with_ridge) {
  const RegressionDataset data = make_regression_dataset(config, seed);
  const auto truths = constant_truths(*data.truth, data.size());
  const auto model = StateSpaceModel::random_walk(config.dim);
  FewShotSeedRun out;
  const auto observations =
      filter_observations(data, config.filter_noise_factor * data.noise_var);
  out.kalman = run_filter(model, regression_prior(config.dim, config.prior_scale), observations);
  out.kalman_err = squared_errors(out.kalman, truths);
  out.traces.push_back(
      trace_from_filter("kalman", out.kalman, truths, fingerprint, seed, observations));
  if (!with_baselines) return out;

  const Vector init = Vector::Zero(config.dim);
  for (const double step : config.sgd_steps) {
    const auto iterates = sgd_baseline(data, init, step);
    out.sgd_err.push_back(squared_errors(iterates, truths));
    out.traces.push_back(
        trace_from_iterates(arm_name("sgd_", step), data, iterates, truths, init, fingerprint, seed));
  }
  if (!with_ridge) return out;

  std::vector<Vector> ridge;
  RegressionDataset prefix;
  prefix.noise_var = data.noise_var;
  for (std::size_t n = 1; n <= data.size(); ++n) {
    prefix.regressors.push_back(data.regressors[n - 1]);
    prefix.targets.push_back(data.targets[n - 1]);
    ridge.push_back(ridge_baseline(prefix, config.ridge_lambda));
  }
  out.ridge_err = squared_errors(ridge, truths);
  out.traces.push_back(trace_from_iterates("ridge", data, ridge, truths, init, fingerprint, seed));
  return out;
}

SweepRow sweep_row(const FewShotConfig& config, double parameter, bool with_baselines,
                   unsigned threads) {
  std::vector<FewShotSeedRun> runs(config.seeds.size());
  parallel_for(runs.size(), threads, [&](std::size_t i) {
    runs[i] = run_fewshot_seed(config, config.seeds[i], 0, with_baselines, false);
  });
  SweepRow row;
  row.parameter = parameter;
  std::vector<Curve> kalman;
  for (const auto& r : runs) kalman.push_back(r.kalman_err);
  row.kalman_mse = average(kalman);
  if (with_baselines) {
    for (std::size_t k = 0; k < config.sgd_steps.size(); ++k) {
      std::vector<Curve> per_seed;
      for (const auto& r : runs) per_seed.push_back(r.sgd_err[k]);
      row.sgd_mse.push_back(average(per_seed));
    }
  }
  return row;
}

}  // namespace

FewShotResult run_fewshot_regression(const FewShotConfig& config, const ExecutionOptions& exec) {
  config.validate();
  std::vector<FewShotSeedRun> runs(config.seeds.size());
  parallel_for(runs.size(), exec.threads, [&](std::size_t i) {
    runs[i] = run_fewshot_seed(config, config.seeds[i], exec.fingerprint, true, true);
  });

  FewShotResult result;
  std::vector<Curve> kalman;
  std::vector<Curve> ridge;
  std::vector<std::vector<Vector>> truths;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    kalman.push_back(runs[i].kalman_err);
    ridge.push_back(runs[i].ridge_err);
    const Vector truth = *make_regression_dataset(config, config.seeds[i]).truth;
    truths.push_back(constant_truths(truth, config.num_samples));
    result.truths.push_back(truth);
  }
  result.kalman_mse = average(kalman);
  result.ridge_mse = average(ridge);
  for (std::size_t k = 0; k < config.sgd_steps.size(); ++k) {
    std::vector<Curve> per_seed;
    for (const auto& r : runs) per_seed.push_back(r.sgd_err[k]);
    result.sgd_mse.push_back(average(per_seed));
  }
  for (auto& r : runs) {
    result.kalman_steps.push_back(std::move(r.kalman));
    for (auto& t : r.traces) result.traces.push_back(std::move(t));
  }

  std::vector<ExperimentTrace> kalman_traces;
  std::size_t events = 0;
  for (const auto& t : result.traces) {
    if (t.arm != "kalman") continue;
    kalman_traces.push_back(t);
    events += t.predictive.size();
  }
  if (events >= kMinCalibrationEvents) {
    result.calibration = compute_calibration(kalman_traces, config.calibration_levels);
  }
  result.envelope = mse_vs_trace(result.kalman_steps, truths);

  for (const double scale : config.prior_sensitivity) {
    FewShotConfig variant = config;
    variant.prior_scale = scale;
    result.prior_sensitivity.push_back(sweep_row(variant, scale, false, exec.threads));
  }
  for (const double noise : config.noise_sweep) {
    FewShotConfig variant = config;
    variant.noise_var = noise;
    result.noise_sweep.push_back(sweep_row(variant, noise, true, exec.threads));
  }
  return result;
}

// ---- streaming shift ---------------------------------------------------------

void ShiftConfig::validate() const {
  if (dim < 1) invalid("shift.dim", "must be >= 1");
  if (horizon < 4) invalid("shift.horizon", "must be >= 4");
  if (!(shift_norm >= 0.0)) invalid("shift.shift_norm", "must be >= 0");
  require_positive(noise_var, "shift.noise_var");
  require_positive(prior_scale, "shift.prior_scale");
  if (q_grid.empty()) invalid("shift.q_grid", "must be nonempty");
  for (double q : q_grid) {
    if (!(q >= 0.0) || !std::isfinite(q)) invalid("shift.q_grid", "entries must be finite and >= 0");
  }
  if (sgd_steps.empty()) invalid("shift.sgd_steps", "must be nonempty");
  for (double s : sgd_steps) require_positive(s, "shift.sgd_steps");
  require_seeds(seeds, "shift.seeds");
  if (window < 1 || window > shift_time() || shift_time() + window > horizon) {
    invalid("shift.window", "must fit on both sides of the shift");
  }
  if (!(recovery_tolerance >= 0.0)) invalid("shift.recovery_tolerance", "must be >= 0");
}

const ShiftArmSummary& ShiftResult::arm(const std::string& name) const {
  for (const auto& a : arms) {
    if (a.arm == name) return a;
  }
  throw Error(ErrorCode::kInvalidArgument, "no shift arm named " + name);
}

ShiftResult run_streaming_shift(const ShiftConfig& config, const ExecutionOptions& exec) {
  config.validate();
  const std::size_t shift_at = config.shift_time();
  // The Q = 0 comparator is always present; it is not duplicated if the grid has 0.
  std::vector<double> qs = config.q_grid;
  if (std::find(qs.begin(), qs.end(), 0.0) == qs.end()) qs.push_back(0.0);
  std::vector<std::string> names;
  for (double q : qs) names.push_back(arm_name("kalman_q", q));
  for (double s : config.sgd_steps) names.push_back(arm_name("sgd_", s));

  struct SeedRun {
    std::vector<ExperimentTrace> traces;
    std::vector<Curve> errors;  // parallel to names
  };
  std::vector<SeedRun> runs(config.seeds.size());
  parallel_for(runs.size(), exec.threads, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    Rng truth_rng(seed, Stream::kTruth);
    Rng shift_rng(seed, Stream::kShift);
    Rng regressor_rng(seed, Stream::kRegressors);
    Rng noise_rng(seed, Stream::kNoise);
    const Vector before = truth_rng.normal_vector(config.dim);
    Vector direction = shift_rng.normal_vector(config.dim);
    direction.normalize();
    const Vector after = before + config.shift_norm * direction;

    RegressionDataset data;
    data.noise_var = config.noise_var;
    std::vector<Vector> truths;
    const double noise_sd = std::sqrt(config.noise_var);
    for (std::size_t t = 0; t < config.horizon; ++t) {
      const Vector& truth = t < shift_at ? before : after;
      Vector phi = regressor_rng.normal_vector(config.dim);
      data.targets.push_back(phi.dot(truth) + noise_sd * noise_rng.normal());
      data.regressors.push_back(std::move(phi));
      truths.push_back(truth);
    }
    const auto observations = to_observations(data);
    const auto prior = regression_prior(config.dim, config.prior_scale);
    SeedRun& run = runs[i];
    for (std::size_t k = 0; k < qs.size(); ++k) {
      const auto steps = run_filter(StateSpaceModel::random_walk(config.dim, qs[k]), prior, observations);
      run.errors.push_back(squared_errors(steps, truths));
      run.traces.push_back(
          trace_from_filter(names[k], steps, truths, exec.fingerprint, seed, observations));
    }
    const Vector init = Vector::Zero(config.dim);
    for (std::size_t k = 0; k < config.sgd_steps.size(); ++k) {
      const auto iterates = sgd_baseline(data, init, config.sgd_steps[k]);
      run.errors.push_back(squared_errors(iterates, truths));
      run.traces.push_back(trace_from_iterates(names[qs.size() + k], data, iterates, truths, init,
                                               exec.fingerprint, seed));
    }
  });

  ShiftResult result;
  for (std::size_t a = 0; a < names.size(); ++a) {
    std::vector<Curve> per_seed;
    for (const auto& r : runs) per_seed.push_back(r.errors[a]);
    ShiftArmSummary s;
    s.arm = names[a];
    s.mean_error = average(per_seed);
    const auto pre = std::span(s.mean_error).subspan(shift_at - config.window, config.window);
    const auto post = std::span(s.mean_error).subspan(shift_at, config.window);
    s.pre_shift_level = finite_or_inf(stats::mean(pre));
    s.post_shift_mean = finite_or_inf(stats::mean(post));
    s.post_shift_min = finite_or_inf(*std::min_element(post.begin(), post.end()));
    const double target = (1.0 + config.recovery_tolerance) * s.pre_shift_level;
    for (std::size_t k = 0; k < post.size(); ++k) {
      if (post[k] <= target) {
        s.recovery_steps = k;
        break;
      }
    }
    result.arms.push_back(std::move(s));
  }
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < config.sgd_steps.size(); ++k) {
    const auto& s = result.arms[qs.size() + k];
    if (result.best_sgd_arm.empty() || s.pre_shift_level < best) {
      best = s.pre_shift_level;
      result.best_sgd_arm = s.arm;
    }
  }
  for (auto& r : runs) {
    for (auto& t : r.traces) result.traces.push_back(std::move(t));
  }
  return result;
}

// ---- toy language model --------------------------------------------------------

void ToyLlmConfig::validate() const {
  const auto& s = task.shape;
  if (s.vocab_size < 2) invalid("toy_llm.vocab_size", "must be >= 2");
  if (s.feature_dim < 1) invalid("toy_llm.feature_dim", "must be >= 1");
  if (s.context_length < 1) invalid("toy_llm.context_length", "must be >= 1");
  if (s.embedding_dim < 1) invalid("toy_llm.embedding_dim", "must be >= 1");
  if (task.latent_dim < 1 || task.latent_dim >= s.vocab_size * s.feature_dim) {
    invalid("toy_llm.latent_dim", "must satisfy 1 <= d < vocab_size*feature_dim");
  }
  if (task.orthogonal_subspace && task.latent_dim + 1 > s.vocab_size * s.feature_dim) {
    invalid("toy_llm.latent_dim", "too large for an orthogonal subspace");
  }
  if (!(task.shift >= 0.0)) invalid("toy_llm.shift", "must be >= 0");
  if (!(task.base_scale >= 0.0)) invalid("toy_llm.base_scale", "must be >= 0");
  if (task.demo_tokens < 1) invalid("toy_llm.demo_tokens", "must be >= 1");
  if (task.heldout_tokens < 1) invalid("toy_llm.heldout_tokens", "must be >= 1");
  require_positive(noise_var, "toy_llm.noise_var");
  require_positive(prior_scale, "toy_llm.prior_scale");
  if (!(process_noise >= 0.0)) invalid("toy_llm.process_noise", "must be >= 0");
  require_seeds(seeds, "toy_llm.seeds");
}

std::size_t half_life(std::span<const double> series) {
  if (series.empty()) return 0;
  const double half = 0.5 * series.front();
  for (std::size_t t = 1; t < series.size(); ++t) {
    if (series[t] <= half) return t;
  }
  return series.size();
}

ToyLlmResult run_toy_llm(const ToyLlmConfig& config, const ExecutionOptions& exec) {
  config.validate();
  struct SeedRun {
    ExperimentTrace trace;
    ToyLlmSeedSummary summary;
  };
  std::vector<SeedRun> runs(config.seeds.size());
  parallel_for(runs.size(), exec.threads, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    const ToyTask task = make_toy_task(config.task, seed);
    const Index d = task.subspace.latent_dim();
    const Vector base_before = task.subspace.base_params();
    const auto prior = GaussianBelief::isotropic(Vector::Zero(d), config.prior_scale);
    const AdaptationRun run =
        ekf_adapt(task.model, task.subspace, prior, task.demonstration, task.heldout,
                  config.noise_var, config.process_noise * Matrix::Identity(d, d),
                  config.linearization);

    const auto truths = constant_truths(task.true_state, run.steps.size());
    SeedRun& out = runs[i];
    out.trace = trace_from_filter("kalman", run.steps, truths, exec.fingerprint, seed);
    for (std::size_t t = 0; t < run.steps.size(); ++t) {
      out.trace.records[t].heldout_metric = run.heldout_nll[t];
    }
    ToyLlmSeedSummary& s = out.summary;
    s.seed = seed;
    s.base_heldout_nll = run.base_heldout_nll;
    s.final_heldout_nll = run.heldout_nll.back();
    std::vector<double> traces{prior.covariance().trace()};
    std::vector<double> errors{(prior.mean() - task.true_state).norm()};
    for (const FilterStep& step : run.steps) {
      traces.push_back(step.posterior.covariance().trace());
      errors.push_back((step.posterior.mean() - task.true_state).norm());
      s.gain_norms.push_back(step.gain.norm());
    }
    s.trace_half_life = half_life(traces);
    s.error_half_life = half_life(errors);
    s.trace_ratio = traces.back() / traces.front();
    // Exact comparison on purpose: the run must not write to θ_0.
    s.base_params_unchanged = task.subspace.base_params().size() == base_before.size() &&
                              (task.subspace.base_params().array() == base_before.array()).all();
  });
  ToyLlmResult result;
  for (auto& r : runs) {
    result.traces.push_back(std::move(r.trace));
    result.seeds.push_back(std::move(r.summary));
  }
  return result;
}

// ---- spectral ------------------------------------------------------------------

void SpectralConfig::validate() const {
  if (components < 1) invalid("spectral.components", "must be >= 1");
  if (domain_size < components) invalid("spectral.domain_size", "must be >= components");
  if (run.num_obs < 1) invalid("spectral.num_obs", "must be >= 1");
  require_positive(run.noise_var, "spectral.noise_var");
  if (!(run.process_noise >= 0.0)) invalid("spectral.process_noise", "must be >= 0");
  if (!(run.drift >= 0.0)) invalid("spectral.drift", "must be >= 0");
  require_positive(run.prior_scale, "spectral.prior_scale");
  require_seeds(seeds, "spectral.seeds");
}

SpectralResult run_spectral(const SpectralConfig& config, const ExecutionOptions& exec) {
  config.validate();
  const SpectralBasis basis = config.basis == BasisKind::kCosine
                                  ? SpectralBasis::cosine(config.domain_size, config.components)
                                  : SpectralBasis::path_laplacian(config.domain_size, config.components);
  struct SeedRun {
    ExperimentTrace trace;
    Curve errors;
  };
  std::vector<SeedRun> runs(config.seeds.size());
  parallel_for(runs.size(), exec.threads, [&](std::size_t i) {
    const std::uint64_t seed = config.seeds[i];
    Rng truth_rng(seed, Stream::kTruth);
    const Vector response = truth_rng.normal_vector(config.components);
    const SpectralRun run = run_spectral_experiment(basis, response, config.run, seed);
    runs[i].trace = trace_from_filter("kalman", run.steps, run.true_response, exec.fingerprint, seed);
    runs[i].errors = run.response_sq_error;
  });
  SpectralResult result;
  std::vector<Curve> errors;
  for (auto& r : runs) {
    result.final_error.push_back(std::sqrt(r.errors.back()));
    errors.push_back(std::move(r.errors));
    result.traces.push_back(std::move(r.trace));
  }
  result.mean_error = average(errors);
  return result;
}

}  // namespace kadapt
