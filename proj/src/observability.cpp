#include "kadapt/observability.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace kadapt {

namespace {

Matrix matrix_power(const Matrix& a, std::size_t k) {
  Matrix out = Matrix::Identity(a.rows(), a.cols());
  for (std::size_t i = 0; i < k; ++i) out = a * out;
  return out;
}

}  // namespace

GramianReport gramian(const StateSpaceModel& model, std::span<const Observation> observations,
                      std::size_t start, std::size_t length) {
  if (length == 0 || start + length > observations.size()) {
    throw Error(ErrorCode::kWindowTooShort, "window [" + std::to_string(start) + ", " +
                                                std::to_string(start + length) + ") exceeds " +
                                                std::to_string(observations.size()) +
                                                " observations");
  }
  const Index d = model.state_dim();
  Matrix w = Matrix::Zero(d, d);
  Matrix transport = Matrix::Identity(d, d);
  for (std::size_t k = start; k < start + length; ++k) {
    const Observation& obs = observations[k];
    require_same(obs.state_dim(), d, "observation/model dimension");
    const auto r_llt =
        spd_factor(obs.noise_cov(), ErrorCode::kSingularInnovation, "observation noise covariance");
    const Matrix ha = obs.op() * transport;
    w += ha.transpose() * r_llt.solve(ha);
    transport = model.transition() * transport;
  }
  GramianReport report;
  report.gramian = symmetrize(w);
  report.window_start = start;
  report.window_length = length;
  const Vector eig =
      Eigen::SelfAdjointEigenSolver<Matrix>(report.gramian, Eigen::EigenvaluesOnly).eigenvalues();
  report.min_eigenvalue = eig.minCoeff();
  const double cutoff = 1e-10 * std::max(1.0, eig.maxCoeff());
  report.rank = static_cast<Index>((eig.array() > cutoff).count());
  return report;
}

std::vector<GramianReport> sliding_gramians(const StateSpaceModel& model,
                                            std::span<const Observation> observations,
                                            std::size_t length, std::size_t stride) {
  std::vector<GramianReport> out;
  if (length == 0 || stride == 0) {
    throw Error(ErrorCode::kInvalidArgument, "window length and stride must be positive");
  }
  for (std::size_t t = 0; t + length <= observations.size(); t += stride) {
    out.push_back(gramian(model, observations, t, length));
  }
  return out;
}

std::vector<Matrix> prior_precisions(const StateSpaceModel& model,
                                     std::span<const FilterStep> trace) {
  std::vector<Matrix> out;
  out.reserve(trace.size() + 1);
  for (const FilterStep& step : trace) {
    out.push_back(to_information(step.prior).information_matrix());
  }
  if (!trace.empty()) {
    out.push_back(to_information(predict(model, trace.back().posterior)).information_matrix());
  }
  return out;
}

AccumulationReport check_information_accumulation(const StateSpaceModel& model,
                                                  std::span<const Matrix> precisions,
                                                  std::span<const GramianReport> gramians,
                                                  double tol) {
  AccumulationReport report;
  const Index d = model.state_dim();
  for (const GramianReport& g : gramians) {
    const std::size_t t = g.window_start;
    const std::size_t t_end = t + g.window_length;
    if (t_end >= precisions.size()) {
      throw Error(ErrorCode::kWindowTooShort, "precision sequence shorter than gramian window");
    }
    const Matrix transport = matrix_power(model.transition(), g.window_length);
    const Matrix transported = transport.transpose() * precisions[t_end] * transport;
    const Matrix gained = transported - precisions[t];
    WindowCheck check;
    check.window_start = t;
    check.slack = min_eigenvalue(gained - g.min_eigenvalue * Matrix::Identity(d, d));
    check.residual = (gained - g.gramian).norm();
    check.passed = check.slack >= -tol;
    report.all_passed = report.all_passed && check.passed;
    report.windows.push_back(check);
  }
  return report;
}

AccumulationReport check_information_accumulation(const StateSpaceModel& model,
                                                  std::span<const FilterStep> trace,
                                                  std::span<const GramianReport> gramians,
                                                  double tol) {
  const std::vector<Matrix> precisions = prior_precisions(model, trace);
  return check_information_accumulation(model, precisions, gramians, tol);
}

ContractionReport check_contraction(const StateSpaceModel& model,
                                    std::span<const FilterStep> trace, std::size_t window,
                                    std::span<const GramianReport> gramians, double tol) {
  if (window == 0 || trace.size() < 3 * window) {
    throw Error(ErrorCode::kWindowTooShort, "contraction fit needs at least 3 windows of data");
  }
  ContractionReport report;
  const std::size_t n = trace.size();
  std::vector<double> log_norms(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Matrix& p = trace[k].posterior.covariance();
    report.trace_series.push_back(p.trace());
    const double lmax = max_eigenvalue(p);
    report.precision_min_eig_series.push_back(1.0 / lmax);
    log_norms[k] = std::log(lmax);
  }

  // OLS of log‖P_k‖ on ⌊k/T⌋ over the final two thirds.
  const std::size_t first = n / 3;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double count = static_cast<double>(n - first);
  for (std::size_t k = first; k < n; ++k) {
    const double x = static_cast<double>(k / window);
    sx += x;
    sy += log_norms[k];
    sxx += x * x;
    sxy += x * log_norms[k];
  }
  const double denom = count * sxx - sx * sx;
  const double slope = denom > 0 ? (count * sxy - sx * sy) / denom : 0.0;
  const double intercept = (sy - slope * sx) / count;
  report.fitted_rate = std::exp(slope);
  report.fit_constant = std::exp(intercept) / spectral_norm(trace.front().prior.covariance());

  if (!gramians.empty()) {
    const Index d = model.state_dim();
    for (const GramianReport& g : gramians) {
      const std::size_t t = g.window_start;
      const std::size_t t_end = t + g.window_length;
      if (t_end >= n) continue;
      const Matrix lambda_t = to_information(trace[t].prior).information_matrix();
      const Matrix bound =
          spd_inverse(lambda_t + g.min_eigenvalue * Matrix::Identity(d, d),
                      ErrorCode::kNonPositiveDefinite, "contraction bound");
      // Pull P_{t+T} back to the time-t state: A^{-T} P (A^{-T})ᵀ.
      const Eigen::PartialPivLU<Matrix> lu(matrix_power(model.transition(), g.window_length));
      const Matrix left = lu.solve(trace[t_end].prior.covariance());
      const Matrix pulled = symmetrize(lu.solve(left.transpose()).transpose());
      WindowCheck check;
      check.window_start = t;
      check.slack = min_eigenvalue(bound - pulled);
      check.residual = (bound - pulled).norm();
      check.passed = check.slack >= -tol;
      report.bounds_passed = report.bounds_passed && check.passed;
      report.bound_checks.push_back(check);
    }
  }
  return report;
}

BoundednessReport check_boundedness(const StateSpaceModel& model, const GaussianBelief& init,
                                    std::span<const Observation> observations, double init_scale,
                                    double tol) {
  if (observations.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "boundedness check needs a nonempty trace");
  }
  const auto base = run_filter(model, init, observations);
  const GaussianBelief scaled(init.mean(), init_scale * init.covariance());
  const auto alt = run_filter(model, scaled, observations);

  BoundednessReport report;
  const std::size_t n = base.size();
  const double p0_norm = spectral_norm(init.covariance());
  report.first_half_sup = p0_norm;
  for (std::size_t k = 0; k < n; ++k) {
    const double norm = max_eigenvalue(base[k].posterior.covariance());
    double& bucket = (k < n / 2) ? report.first_half_sup : report.second_half_sup;
    bucket = std::max(bucket, norm);
  }
  report.sup_norm = std::max(report.first_half_sup, report.second_half_sup);
  report.bounded = report.second_half_sup <= 1.05 * report.first_half_sup;
  report.initialization_gap =
      (base.back().posterior.covariance() - alt.back().posterior.covariance()).cwiseAbs().maxCoeff();
  report.initialization_independent = report.initialization_gap <= tol;
  return report;
}

MseReport mse_vs_trace(std::span<const std::vector<FilterStep>> traces,
                       std::span<const std::vector<Vector>> truths, double q_term,
                       double factor) {
  if (traces.size() != truths.size()) {
    throw Error(ErrorCode::kLengthMismatch, "one truth sequence per trace required");
  }
  MseReport report;
  if (traces.empty()) return report;
  const std::size_t n = traces.front().size();
  report.mean_sq_error.assign(n, 0.0);
  report.mean_trace.assign(n, 0.0);
  for (std::size_t r = 0; r < traces.size(); ++r) {
    if (traces[r].size() != n || truths[r].size() != n) {
      throw Error(ErrorCode::kLengthMismatch, "trace/truth lengths differ in replicate " +
                                                  std::to_string(r));
    }
    for (std::size_t t = 0; t < n; ++t) {
      const GaussianBelief& post = traces[r][t].posterior;
      require_same(truths[r][t].size(), post.dim(), "truth dimension");
      report.mean_sq_error[t] += (post.mean() - truths[r][t]).squaredNorm();
      report.mean_trace[t] += post.covariance().trace();
    }
  }
  const double reps = static_cast<double>(traces.size());
  report.envelope.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    report.mean_sq_error[t] /= reps;
    report.mean_trace[t] /= reps;
    report.envelope[t] = factor * (report.mean_trace[t] + q_term);
    if (report.within_envelope && report.mean_sq_error[t] > report.envelope[t]) {
      report.within_envelope = false;
      report.first_violation = t;
    }
  }
  return report;
}

}  // namespace kadapt
