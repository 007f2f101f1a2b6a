#include "kadapt/verify.hpp"

#include <algorithm>
#include <Eigen/QR>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>

#include "kadapt/config.hpp"
#include "kadapt/experiments.hpp"
#include "kadapt/observability.hpp"
#include "kadapt/optimization_limits.hpp"
#include "kadapt/rng.hpp"
#include "kadapt/spectral.hpp"
#include "kadapt/stats.hpp"
#include "kadapt/trace_io.hpp"

namespace kadapt {
namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

constexpr double kNoLimit = std::numeric_limits<double>::infinity();

// Runs `body`, failing it on an exception or when it exceeds `limit_seconds`.
CheckResult run_check(std::string id, std::string title, double limit_seconds,
                      const std::function<Outcome()>& body) {
  CheckResult result{std::move(id), std::move(title), false, {}, 0.0};
  const auto start = std::chrono::steady_clock::now();
  try {
    Outcome o = body();
    result.passed = o.passed;
    result.detail = std::move(o.detail);
  } catch (const std::exception& e) {
    result.detail = std::string("exception: ") + e.what();
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (result.seconds >= limit_seconds) {
    result.passed = false;
    std::ostringstream note;
    note << "; runtime " << result.seconds << " s exceeds " << limit_seconds << " s";
    result.detail += note.str();
  }
  return result;
}

double relative_error(const Matrix& got, const Matrix& want) {
  const double scale = std::max(want.norm(), std::numeric_limits<double>::min());
  return (got - want).norm() / scale;
}

double belief_error(const GaussianBelief& got, const GaussianBelief& want) {
  return std::max(relative_error(got.mean(), want.mean()),
                  relative_error(got.covariance(), want.covariance()));
}

RegressionDataset random_dataset(Rng& rng, Index d, std::size_t n, double noise_var) {
  RegressionDataset data;
  data.noise_var = noise_var;
  data.truth = rng.normal_vector(d);
  for (std::size_t t = 0; t < n; ++t) {
    Vector phi = rng.normal_vector(d);
    data.targets.push_back(phi.dot(*data.truth) + std::sqrt(noise_var) * rng.normal());
    data.regressors.push_back(std::move(phi));
  }
  return data;
}

std::string fmt(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.4g", v);
  return buffer;
}

FewShotConfig fewshot_acceptance_config() {
  FewShotConfig config;
  config.prior_sensitivity.clear();
  config.noise_sweep.clear();
  return config;
}

// Criteria that share one experiment run compute it on first use.
struct SharedRuns {
  unsigned threads = 0;
  std::optional<FewShotResult> fewshot;
  std::optional<ToyLlmResult> toy;
  std::optional<ShiftResult> shift;

  const FewShotResult& few() {
    if (!fewshot) fewshot = run_fewshot_regression(fewshot_acceptance_config(), {0, threads});
    return *fewshot;
  }
  const ToyLlmResult& toy_llm() {
    if (!toy) toy = run_toy_llm(ToyLlmConfig{}, {0, threads});
    return *toy;
  }
  const ShiftResult& shifted() {
    if (!shift) shift = run_streaming_shift(ShiftConfig{}, {0, threads});
    return *shift;
  }
};

Vector central_difference(const ToyTokenModel& model, const Vector& params,
                          std::span<const int> context, int target, double h) {
  Vector fd(params.size());
  Vector probe = params;
  for (Index i = 0; i < params.size(); ++i) {
    probe(i) = params(i) + h;
    const double up = token_nll(model, probe, context, target);
    probe(i) = params(i) - h;
    const double down = token_nll(model, probe, context, target);
    probe(i) = params(i);
    fd(i) = (up - down) / (2.0 * h);
  }
  return fd;
}

}  // namespace

std::vector<CheckResult> run_acceptance(unsigned threads) {
  SharedRuns shared{threads, {}, {}, {}};
  std::vector<CheckResult> out;

  out.push_back(run_check("A1", "sequential filter equals batch posterior", 10.0, [] {
    Rng rng(1, Stream::kCases);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const Index d = 1 + static_cast<Index>(rng.index(8));
      const std::size_t n = 1 + rng.index(200);
      const GaussianBelief prior(rng.normal_vector(d), rng.spd_matrix(d, 0.5, 5.0));
      const RegressionDataset data = random_dataset(rng, d, n, rng.uniform(0.1, 2.0));
      const auto steps = run_filter(StateSpaceModel::random_walk(d), prior, to_observations(data));
      worst = std::max(worst, belief_error(steps.back().posterior, batch_posterior(data, prior)));
    }
    return Outcome{worst <= 1e-10, "max relative error " + fmt(worst) + " over 100 instances (tol 1e-10)"};
  }));

  out.push_back(run_check("A2", "moment and information forms agree", kNoLimit, [] {
    Rng rng(2, Stream::kCases);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Index d = 2 + static_cast<Index>(rng.index(5));
      const Index m = 1 + static_cast<Index>(rng.index(2));
      GaussianBelief moment(rng.normal_vector(d), rng.spd_matrix(d, 0.5, 5.0));
      PrecisionBelief info = to_information(moment);
      for (int t = 0; t < 100; ++t) {
        const Matrix a = Matrix::Identity(d, d) + 0.1 * rng.normal_matrix(d, d) / std::sqrt(double(d));
        const StateSpaceModel model(a, rng.spd_matrix(d, 1e-3, 0.1));
        const Observation obs(rng.normal_matrix(m, d), rng.spd_matrix(m, 0.2, 2.0), rng.normal_vector(m));
        moment = update(predict(model, moment), obs).posterior;
        info = update_information(predict_information(model, info), obs);
      }
      worst = std::max(worst, belief_error(from_information(info), moment));
    }
    return Outcome{worst <= 1e-9, "max relative difference " + fmt(worst) +
                                      " after 100 steps on 50 time-varying models (tol 1e-9)"};
  }));

  out.push_back(run_check("A3", "scalar harmonic decay P_t = 1/(1+t)", kNoLimit, [] {
    const auto model = StateSpaceModel::random_walk(1);
    const std::vector<Observation> obs(1000, Observation::scalar(RowVector::Ones(1), 1.0, 0.0));
    const auto steps = run_filter(model, GaussianBelief::isotropic(Vector::Zero(1), 1.0), obs);
    double worst = 0.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
      const double want = 1.0 / (2.0 + static_cast<double>(t));
      worst = std::max(worst, std::abs(steps[t].posterior.covariance()(0, 0) - want));
    }
    return Outcome{worst <= 1e-12, "max |P_t - 1/(1+t)| = " + fmt(worst) + " for t <= 1000 (tol 1e-12)"};
  }));

  out.push_back(run_check("A4", "information accumulation over observability windows", kNoLimit, [] {
    double worst = std::numeric_limits<double>::infinity();
    double min_alpha = std::numeric_limits<double>::infinity();
    bool all = true;
    std::size_t windows = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed, Stream::kCases);
      const auto model = StateSpaceModel::random_walk(4);
      const auto obs = to_observations(random_dataset(rng, 4, 120, 0.25));
      const auto steps = run_filter(model, GaussianBelief::isotropic(Vector::Zero(4), 10.0), obs);
      const auto grams = sliding_gramians(model, obs, 8);
      const auto report = check_information_accumulation(model, steps, grams);
      all = all && report.all_passed;
      windows += report.windows.size();
      for (const auto& w : report.windows) worst = std::min(worst, w.slack);
      for (const auto& g : grams) min_alpha = std::min(min_alpha, g.min_eigenvalue);
    }
    return Outcome{all, "min slack " + fmt(worst) + " over " + std::to_string(windows) +
                            " windows (tol -1e-9), min alpha " + fmt(min_alpha)};
  }));

  out.push_back(run_check("A5", "exponential covariance contraction", 30.0, [] {
    const FewShotConfig config = fewshot_acceptance_config();
    const auto model = StateSpaceModel::random_walk(config.dim);
    const auto prior = GaussianBelief::isotropic(Vector::Zero(config.dim), config.prior_scale);
    double worst_rate = 0.0;
    double worst_ratio = 0.0;
    bool bounds = true;
    for (const auto seed : config.seeds) {
      const auto obs = to_observations(make_regression_dataset(config, seed));
      const auto steps = run_filter(model, prior, obs);
      const auto grams = sliding_gramians(model, obs, static_cast<std::size_t>(config.dim));
      const auto report = check_contraction(model, steps, static_cast<std::size_t>(config.dim), grams);
      worst_rate = std::max(worst_rate, report.fitted_rate);
      worst_ratio = std::max(worst_ratio, steps[19].posterior.covariance().trace() /
                                              prior.covariance().trace());
      bounds = bounds && report.bounds_passed;
    }
    return Outcome{worst_rate < 1.0 && worst_ratio < 0.1 && bounds,
                   "max fitted rho " + fmt(worst_rate) + ", max tr(P_20)/tr(P_0) " + fmt(worst_ratio) +
                       " over 200 seeds, window bounds " + (bounds ? "hold" : "violated")};
  }));

  out.push_back(run_check("A6", "bounded steady state independent of initialization", kNoLimit, [] {
    double worst_gap = 0.0;
    bool bounded = true;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed, Stream::kCases);
      const auto model = StateSpaceModel::random_walk(4, 0.01);
      const auto obs = to_observations(random_dataset(rng, 4, 500, 0.25));
      const auto report =
          check_boundedness(model, GaussianBelief::isotropic(Vector::Zero(4), 1.0), obs, 100.0, 1e-6);
      worst_gap = std::max(worst_gap, report.initialization_gap);
      bounded = bounded && report.bounded;
    }
    return Outcome{worst_gap <= 1e-6 && bounded,
                   "max |P_500(P_0) - P_500(100 P_0)| = " + fmt(worst_gap) + " (tol 1e-6), " +
                       (bounded ? "bounded" : "unbounded") + " on 10 seeds"};
  }));

  out.push_back(run_check("A7", "empirical MSE within 1.1 x trace(P_t)", kNoLimit, [&shared] {
    const auto& env = shared.few().envelope;
    double worst = 0.0;
    for (std::size_t t = 0; t < env.mean_sq_error.size(); ++t) {
      worst = std::max(worst, env.mean_sq_error[t] / env.mean_trace[t]);
    }
    return Outcome{env.within_envelope, "max MSE/trace " + fmt(worst) + " over 200 seeds (limit 1.1)"};
  }));

  out.push_back(run_check("A8", "gradient-descent singular limit is first order in eps", kNoLimit, [] {
    Rng rng(8, Stream::kCases);
    const std::vector<double> eps{1.0, 1e-1, 1e-2, 1e-3, 1e-4};
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Index d = 2 + static_cast<Index>(rng.index(7));
      const GaussianBelief belief(rng.normal_vector(d), rng.spd_matrix(d, 1.0, 10.0));
      Vector h = rng.normal_vector(d);
      h *= rng.uniform(1.0, 3.0) / h.norm();
      const double y = h.dot(belief.mean()) + 1.0 + std::abs(rng.normal());
      const auto obs = Observation::scalar(h.transpose(), 1.0, y);
      const Vector limit = gd_limit_step(belief, obs, 0.0);
      std::vector<double> dev;
      for (double e : eps) dev.push_back((gd_limit_step(belief, obs, e) - limit).norm());
      worst = std::max(worst, std::abs(stats::power_law_exponent(eps, dev) - 1.0));
    }
    return Outcome{worst <= 0.1, "max |slope - 1| = " + fmt(worst) + " on 20 cases (tol 0.1)"};
  }));

  out.push_back(run_check("A9", "cumulative regret grows sub-polynomially", 60.0, [] {
    FewShotConfig config;
    config.dim = 4;
    config.noise_var = 0.25;
    config.prior_scale = 1.0;
    config.num_samples = 10000;
    const std::vector<std::size_t> horizons{100, 1000, 10000};
    std::vector<double> cumulative(horizons.size(), 0.0);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto data = make_regression_dataset(config, seed);
      const auto steps = run_filter(StateSpaceModel::random_walk(4),
                                    GaussianBelief::isotropic(Vector::Zero(4), 1.0), to_observations(data));
      const auto curve = regret_curve(steps, data);
      for (std::size_t k = 0; k < horizons.size(); ++k) cumulative[k] += curve[horizons[k] - 1].cumulative / 20.0;
    }
    std::vector<double> x(horizons.begin(), horizons.end());
    const double exponent = stats::power_law_exponent(x, cumulative);
    return Outcome{exponent <= 0.15, "mean cumulative regret " + fmt(cumulative[0]) + ", " +
                                         fmt(cumulative[1]) + ", " + fmt(cumulative[2]) +
                                         "; power-law exponent " + fmt(exponent) + " (limit 0.15)"};
  }));

  out.push_back(run_check("A10", "covariance half-life precedes mean-error half-life", kNoLimit, [&shared] {
    int ok = 0;
    for (const auto& s : shared.toy_llm().seeds) ok += s.trace_half_life < s.error_half_life ? 1 : 0;
    return Outcome{ok >= 8, std::to_string(ok) + "/10 seeds (need >= 8)"};
  }));

  out.push_back(run_check("A11", "few-shot advantage at n=10", kNoLimit, [&shared] {
    const auto& r = shared.few();
    const double k10 = r.kalman_mse[9];
    const double k50 = r.kalman_mse[49];
    double best_sgd = std::numeric_limits<double>::infinity();
    for (const auto& curve : r.sgd_mse) best_sgd = std::min(best_sgd, curve[9]);
    const bool within = k10 <= 2.0 * k50;
    const bool beats = k10 < best_sgd;
    return Outcome{within && beats, "Kalman MSE n=10 " + fmt(k10) + ", n=50 " + fmt(k50) + " (ratio " +
                                        fmt(k10 / k50) + ", limit 2); best SGD n=10 " + fmt(best_sgd)};
  }));

  out.push_back(run_check("A12", "shift tracking with process noise", kNoLimit, [&shared] {
    const auto& r = shared.shifted();
    const auto& tracked = r.arm("kalman_q0.01");
    const auto& frozen = r.arm("kalman_q0");
    const bool recovers = tracked.recovery_steps.has_value();
    const bool stuck = frozen.post_shift_min > 5.0 * tracked.pre_shift_level;
    return Outcome{recovers && stuck,
                   "q=0.01 pre-shift level " + fmt(tracked.pre_shift_level) + ", recovers within 10% after " +
                       (recovers ? std::to_string(*tracked.recovery_steps) : std::string("never")) +
                       " steps; Q=0 post-shift min " + fmt(frozen.post_shift_min) + " (needs > " +
                       fmt(5.0 * tracked.pre_shift_level) + ")"};
  }));

  out.push_back(run_check("A13", "90% predictive interval calibration", kNoLimit, [&shared] {
    const auto& cal = shared.few().calibration.value();
    double coverage = -1.0;
    for (std::size_t k = 0; k < cal.nominal_levels.size(); ++k) {
      if (cal.nominal_levels[k] == 0.9) coverage = cal.empirical_coverage[k];
    }
    return Outcome{coverage >= 0.85 && coverage <= 0.95 && cal.num_trials >= 200,
                   "coverage " + fmt(coverage) + " over " + std::to_string(cal.num_trials) +
                       " events (band [0.85, 0.95])"};
  }));

  out.push_back(run_check("A14", "token gradient matches central differences", kNoLimit, [] {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto model = ToyTokenModel::random(ToyModelShape{}, seed);
      Rng rng(seed, Stream::kCases);
      const Vector params = 0.5 * rng.normal_vector(model.param_dim());
      std::vector<int> context;
      for (Index k = 0; k < model.context_length(); ++k) {
        context.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(model.vocab_size()))));
      }
      const int target = static_cast<int>(rng.index(static_cast<std::size_t>(model.vocab_size())));
      const Vector g = token_gradient(model, params, context, target);
      const Vector fd = central_difference(model, params, context, target, 1e-5);
      worst = std::max(worst, (g - fd).lpNorm<Eigen::Infinity>() / g.lpNorm<Eigen::Infinity>());
    }
    return Outcome{worst < 1e-4, "max relative error " + fmt(worst) + " on 20 cases (limit 1e-4)"};
  }));

  out.push_back(run_check("A15", "toy-LLM adaptation without gradient updates", kNoLimit, [&shared] {
    int improved = 0;
    int gain_drop = 0;
    bool frozen = true;
    for (const auto& s : shared.toy_llm().seeds) {
      improved += s.final_heldout_nll < s.base_heldout_nll ? 1 : 0;
      gain_drop += s.gain_norms.back() < s.gain_norms[2] ? 1 : 0;
      frozen = frozen && s.base_params_unchanged;
    }
    return Outcome{frozen && improved >= 9 && gain_drop == 10,
                   std::string("theta_0 ") + (frozen ? "bit-identical" : "modified") + "; heldout improved on " +
                       std::to_string(improved) + "/10 (need >= 9); final gain below token-3 gain on " +
                       std::to_string(gain_drop) + "/10"};
  }));

  out.push_back(run_check("A16", "spectral pipeline equals least-squares oracle", kNoLimit, [] {
    const auto basis = SpectralBasis::cosine(32, 8);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      Rng rng(seed, Stream::kTruth);
      const Vector response = rng.normal_vector(8);
      SpectralRunOptions options;
      options.num_obs = 200;
      options.noise_var = 0.1;
      const auto run = run_spectral_experiment(basis, response, options, seed);
      RegressionDataset data{run.coefficients, run.targets, options.noise_var, response};
      const auto prior = GaussianBelief::isotropic(Vector::Zero(8), options.prior_scale);
      worst = std::max(worst, belief_error(run.steps.back().posterior, batch_posterior(data, prior)));
    }
    Rng rng(16, Stream::kCases);
    const Vector response = rng.normal_vector(8);
    std::vector<Observation> exact;
    for (int k = 0; k < 8; ++k) {
      const Vector c = rng.normal_vector(8);
      exact.push_back(spectral_observation(SpectralSignal{c, response}, 1e-12));
    }
    const auto steps = run_filter(StateSpaceModel::random_walk(8),
                                  GaussianBelief::isotropic(Vector::Zero(8), 10.0), exact);
    const double recovery = relative_error(steps.back().posterior.mean(), response);
    return Outcome{worst <= 1e-8 && recovery <= 1e-6,
                   "max relative difference to batch posterior " + fmt(worst) + " (tol 1e-8); noise-free K=8 "
                   "recovery error " + fmt(recovery) + " (tol 1e-6)"};
  }));

  return out;
}

std::vector<CheckResult> run_property_checks(unsigned threads) {
  std::vector<CheckResult> out;

  out.push_back(run_check("P1", "information form round trip", kNoLimit, [] {
    Rng rng(101, Stream::kCases);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const Index d = 1 + static_cast<Index>(rng.index(8));
      const GaussianBelief b(rng.normal_vector(d), rng.spd_matrix(d, 0.1, 10.0));
      worst = std::max(worst, belief_error(from_information(to_information(b)), b));
    }
    return Outcome{worst <= 1e-10, "max relative error " + fmt(worst)};
  }));

  out.push_back(run_check("P2", "updates keep covariance symmetric and shrink it", kNoLimit, [] {
    Rng rng(102, Stream::kCases);
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      const Index d = 1 + static_cast<Index>(rng.index(6));
      const Index m = 1 + static_cast<Index>(rng.index(3));
      const GaussianBelief prior(rng.normal_vector(d), rng.spd_matrix(d, 0.1, 10.0));
      const Observation obs(rng.normal_matrix(m, d), rng.spd_matrix(m, 0.1, 2.0), rng.normal_vector(m));
      const FilterStep step = update(prior, obs);
      const Matrix& p = step.posterior.covariance();
      ok = ok && max_asymmetry(p) == 0.0 && loewner_leq(p, prior.covariance()) && min_eigenvalue(p) > 0.0;
    }
    return Outcome{ok, "100 random updates"};
  }));

  out.push_back(run_check("P3", "diagonal approximation exact for aligned observations", kNoLimit, [] {
    Rng rng(103, Stream::kCases);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Index d = 1 + static_cast<Index>(rng.index(6));
      Vector diag(d);
      for (Index k = 0; k < d; ++k) diag(k) = rng.uniform(0.1, 5.0);
      const GaussianBelief prior(rng.normal_vector(d), diag.asDiagonal().toDenseMatrix());
      RowVector h = RowVector::Zero(d);
      h(static_cast<Index>(rng.index(static_cast<std::size_t>(d)))) = rng.uniform(0.5, 2.0);
      const auto obs = Observation::scalar(h, 0.5, rng.normal());
      worst = std::max(worst, belief_error(diagonal_update(prior, obs), update(prior, obs).posterior));
    }
    return Outcome{worst <= 1e-12, "max relative error " + fmt(worst)};
  }));

  out.push_back(run_check("P4", "transported information accumulation for A != I", kNoLimit, [] {
    Rng rng(104, Stream::kCases);
    const Index d = 3;
    // Scaled rotation: a strongly contracting A would make Λ ill-conditioned.
    const Eigen::HouseholderQR<Matrix> qr(rng.normal_matrix(d, d));
    const Matrix a = 0.98 * Matrix(qr.householderQ());
    const StateSpaceModel model(a, Matrix::Zero(d, d));
    const auto obs = to_observations(random_dataset(rng, d, 60, 0.5));
    const auto steps = run_filter(model, GaussianBelief::isotropic(Vector::Zero(d), 5.0), obs);
    const auto grams = sliding_gramians(model, obs, 6);
    const auto report = check_information_accumulation(model, steps, grams);
    double residual = 0.0;
    for (const auto& w : report.windows) residual = std::max(residual, w.residual);
    return Outcome{report.all_passed, "max Gramian identity residual " + fmt(residual)};
  }));

  out.push_back(run_check("P5", "ridge equals batch posterior mean with matched prior", kNoLimit, [] {
    Rng rng(105, Stream::kCases);
    const auto data = random_dataset(rng, 5, 40, 0.3);
    const double lambda = 2.0;
    const auto post = batch_posterior(data, GaussianBelief::isotropic(Vector::Zero(5), data.noise_var / lambda));
    const double err = relative_error(ridge_baseline(data, lambda), post.mean());
    return Outcome{err <= 1e-10, "relative difference " + fmt(err)};
  }));

  out.push_back(run_check("P6", "singular-limit step interpolates the observation", kNoLimit, [] {
    Rng rng(106, Stream::kCases);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
      const GaussianBelief b(rng.normal_vector(4), rng.spd_matrix(4, 0.5, 5.0));
      const RowVector h = rng.normal_vector(4).transpose();
      const double y = rng.normal();
      worst = std::max(worst, std::abs(h.dot(gd_limit_step(b, Observation::scalar(h, 1.0, y), 0.0)) - y));
    }
    return Outcome{worst <= 1e-10, "max |H mu+ - y| = " + fmt(worst)};
  }));

  out.push_back(run_check("P7", "regret terms nonnegative and log-det bound nondecreasing", kNoLimit, [] {
    Rng rng(107, Stream::kCases);
    const auto data = random_dataset(rng, 3, 300, 0.25);
    const auto steps = run_filter(StateSpaceModel::random_walk(3),
                                  GaussianBelief::isotropic(Vector::Zero(3), 1.0), to_observations(data));
    const auto curve = regret_curve(steps, data);
    bool ok = true;
    for (std::size_t t = 0; t < curve.size(); ++t) {
      ok = ok && curve[t].instantaneous >= 0.0;
      if (t > 0) ok = ok && curve[t].log_det_bound >= curve[t - 1].log_det_bound;
    }
    return Outcome{ok, "300 steps"};
  }));

  out.push_back(run_check("P8", "token observation operator is the chain-rule Jacobian", kNoLimit, [] {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const ToyTask task = make_toy_task(ToyTaskConfig{}, seed);
      Rng rng(seed, Stream::kCases);
      const Vector mean = rng.normal_vector(task.subspace.latent_dim());
      const TokenEvent& event = task.demonstration.front();
      const auto obs = linearize_token(task.model, task.subspace, mean, event, 1.0);
      const double h = 1e-6;
      for (Index k = 0; k < mean.size(); ++k) {
        Vector up = mean;
        Vector down = mean;
        up(k) += h;
        down(k) -= h;
        const double fd = (token_nll(task.model, task.subspace.params(up), event.context, event.target) -
                           token_nll(task.model, task.subspace.params(down), event.context, event.target)) /
                          (2.0 * h);
        worst = std::max(worst, std::abs(fd - obs.op(k)) / std::max(1.0, std::abs(fd)));
      }
    }
    return Outcome{worst <= 1e-6, "max relative error " + fmt(worst)};
  }));

  out.push_back(run_check("P9", "spectral bases orthonormal and round trip exact", kNoLimit, [] {
    Rng rng(109, Stream::kCases);
    double worst = 0.0;
    for (const auto& basis : {SpectralBasis::cosine(32, 8), SpectralBasis::path_laplacian(16, 6)}) {
      const Vector c = rng.normal_vector(basis.num_components());
      worst = std::max(worst, (analyze(basis, synthesize(basis, c)) - c).norm());
    }
    return Outcome{worst < 1e-10, "max round-trip error " + fmt(worst)};
  }));

  out.push_back(run_check("P10", "per-coefficient variance nonincreasing without process noise", kNoLimit, [] {
    const auto basis = SpectralBasis::cosine(32, 8);
    Rng rng(110, Stream::kTruth);
    const auto run = run_spectral_experiment(basis, rng.normal_vector(8), SpectralRunOptions{}, 110);
    bool ok = true;
    Vector previous = Vector::Constant(8, SpectralRunOptions{}.prior_scale);
    for (const auto& step : run.steps) {
      const Vector diag = step.posterior.covariance().diagonal();
      ok = ok && (diag.array() <= previous.array() + 1e-15).all();
      previous = diag;
    }
    return Outcome{ok, std::to_string(run.steps.size()) + " steps"};
  }));

  out.push_back(run_check("P11", "process noise tracks a drifting spectral response", kNoLimit, [threads] {
    SpectralConfig config;
    config.run.num_obs = 400;
    config.run.drift = 0.05;
    config.run.process_noise = 0.05 * 0.05;
    const auto tracked = run_spectral(config, {0, threads});
    config.run.process_noise = 0.0;
    const auto frozen = run_spectral(config, {0, threads});
    const auto tail = [](const Curve& c) { return stats::mean(std::span(c).subspan(3 * c.size() / 4)); };
    const double a = tail(tracked.mean_error);
    const double b = tail(frozen.mean_error);
    return Outcome{a < b, "final-quarter squared error Q>0 " + fmt(a) + " vs Q=0 " + fmt(b)};
  }));

  out.push_back(run_check("P12", "experiments are deterministic per seed", kNoLimit, [threads] {
    FewShotConfig config = fewshot_acceptance_config();
    config.seeds = {3, 4};
    const auto first = run_fewshot_regression(config, {7, threads});
    const auto second = run_fewshot_regression(config, {7, 1});
    bool same = first.traces.size() == second.traces.size();
    for (std::size_t i = 0; same && i < first.traces.size(); ++i) {
      same = first.traces[i].records == second.traces[i].records;
    }
    return Outcome{same, std::to_string(first.traces.size()) + " traces compared across thread counts"};
  }));

  out.push_back(run_check("P13", "experiment Kalman arm matches a direct filter run", kNoLimit, [] {
    FewShotConfig config = fewshot_acceptance_config();
    config.seeds = {11};
    const auto result = run_fewshot_regression(config, {0, 1});
    const auto data = make_regression_dataset(config, 11);
    const auto steps = run_filter(StateSpaceModel::random_walk(config.dim),
                                  GaussianBelief::isotropic(Vector::Zero(config.dim), config.prior_scale),
                                  to_observations(data));
    const std::vector<Vector> truths(steps.size(), *data.truth);
    const auto direct = trace_from_filter("kalman", steps, truths, 0, 11);
    return Outcome{direct.records == result.traces.front().records, "seed 11"};
  }));

  out.push_back(run_check("P14", "tuned SGD trails the Q>0 filter after a shift", kNoLimit, [threads] {
    const auto r = run_streaming_shift(ShiftConfig{}, {0, threads});
    const auto& sgd = r.arm(r.best_sgd_arm);
    const auto& kalman = r.arm("kalman_q0.01");
    return Outcome{sgd.post_shift_mean > kalman.post_shift_mean,
                   r.best_sgd_arm + " post-shift mean " + fmt(sgd.post_shift_mean) + " vs Kalman " +
                       fmt(kalman.post_shift_mean)};
  }));

  out.push_back(run_check("P15", "orthogonal subspace contracts without comparable gain", kNoLimit, [threads] {
    ToyLlmConfig aligned;
    ToyLlmConfig orthogonal;
    orthogonal.task.orthogonal_subspace = true;
    const auto a = run_toy_llm(aligned, {0, threads});
    const auto o = run_toy_llm(orthogonal, {0, threads});
    double gain_a = 0.0;
    double gain_o = 0.0;
    bool contracts = true;
    for (std::size_t i = 0; i < a.seeds.size(); ++i) {
      gain_a += (a.seeds[i].base_heldout_nll - a.seeds[i].final_heldout_nll) / double(a.seeds.size());
      gain_o += (o.seeds[i].base_heldout_nll - o.seeds[i].final_heldout_nll) / double(o.seeds.size());
      contracts = contracts && o.seeds[i].trace_ratio < 1.0;
    }
    return Outcome{contracts && gain_o < gain_a,
                   "mean heldout improvement aligned " + fmt(gain_a) + ", orthogonal " + fmt(gain_o)};
  }));

  out.push_back(run_check("P16", "underestimated noise undercovers", kNoLimit, [threads] {
    FewShotConfig config = fewshot_acceptance_config();
    config.filter_noise_factor = 0.25;
    config.calibration_levels = {0.9};
    const auto r = run_fewshot_regression(config, {0, threads});
    const double coverage = r.calibration.value().empirical_coverage.front();
    return Outcome{coverage < 0.9, "coverage " + fmt(coverage) + " at nominal 0.9 with R/4"};
  }));

  out.push_back(run_check("P17", "trace column header is stable", kNoLimit, [] {
    const std::string golden = "step,trace_P,lambda_min,gain_norm,innovation,sq_error,heldout_metric,seed";
    return Outcome{csv_header() == golden, csv_header()};
  }));

  out.push_back(run_check("P18", "trace serialization round trips byte-identically", kNoLimit, [] {
    ToyLlmConfig config;
    config.seeds = {5};
    const auto trace = run_toy_llm(config, {42, 1}).traces.front();
    const auto again = run_toy_llm(config, {42, 1}).traces.front();
    std::ostringstream csv_a, csv_b, json_a, json_b;
    write_trace_csv(trace, csv_a);
    write_trace_csv(again, csv_b);
    write_trace_jsonl(trace, json_a);
    write_trace_jsonl(again, json_b);
    std::istringstream json_in(json_a.str());
    std::istringstream csv_in(csv_a.str());
    const auto from_json = read_trace_jsonl(json_in);
    const auto from_csv = read_trace_csv(csv_in);
    const bool ok = csv_a.str() == csv_b.str() && json_a.str() == json_b.str() &&
                    from_json.records == trace.records && from_json.config_fingerprint == 42 &&
                    from_csv.records == trace.records;
    return Outcome{ok, std::to_string(trace.records.size()) + " records"};
  }));

  out.push_back(run_check("P19", "strict configuration parsing", kNoLimit, [] {
    const auto rejects = [](const std::string& text, const std::string& field) {
      try {
        parse_config(text);
      } catch (const Error& e) {
        return e.code() == ErrorCode::kConfigInvalid && std::string(e.what()).find(field) != std::string::npos;
      }
      return false;
    };
    const bool unknown = rejects(R"({"fewshot": {"nosie_var": 1}})", "fewshot.nosie_var");
    const bool negative = rejects(R"({"fewshot": {"noise_var": -1}})", "fewshot.noise_var");
    const auto base = parse_config(R"({"experiment": "fewshot"})");
    ConfigOverrides o;
    o.seeds = {1, 2};
    const auto overridden = parse_config(R"({"experiment": "fewshot"})", o);
    const bool seeds = base.fingerprint != overridden.fingerprint && overridden.fewshot.seeds.size() == 2;
    const bool stable = base.fingerprint == parse_config(R"({"experiment": "fewshot"})").fingerprint;
    return Outcome{unknown && negative && seeds && stable, "unknown key, negative variance, seed override"};
  }));

  out.push_back(run_check("P20", "gain at token 30 below gain at token 3", kNoLimit, [threads] {
    const auto r = run_toy_llm(ToyLlmConfig{}, {0, threads});
    int ok = 0;
    for (const auto& s : r.seeds) ok += s.gain_norms[29] < s.gain_norms[2] ? 1 : 0;
    return Outcome{ok == static_cast<int>(r.seeds.size()), std::to_string(ok) + "/" + std::to_string(r.seeds.size())};
  }));

  return out;
}

std::string format_check(const CheckResult& result) {
  char seconds[32];
  std::snprintf(seconds, sizeof seconds, "%.2f", result.seconds);
  return std::string(result.passed ? "PASS " : "FAIL ") + result.id + " " + result.title + ": " +
         result.detail + " (" + seconds + " s)";
}

}  // namespace kadapt
