#include "kadapt/linear_filter.hpp"

#include <string>

namespace kadapt {

StateSpaceModel::StateSpaceModel(Matrix transition, Matrix process_noise)
    : transition_(std::move(transition)), process_noise_(std::move(process_noise)) {
  if (transition_.rows() != transition_.cols() || transition_.rows() == 0) {
    throw Error(ErrorCode::kDimensionMismatch, "transition must be square and nonempty");
  }
  require_same(process_noise_.rows(), transition_.rows(), "process noise rows");
  require_same(process_noise_.cols(), transition_.cols(), "process noise cols");
  if (!transition_.allFinite() || !process_noise_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "model matrices must be finite");
  }
  if (max_asymmetry(process_noise_) > kSymmetryTolerance) {
    throw Error(ErrorCode::kInvalidArgument, "process noise is not symmetric");
  }
  if (min_eigenvalue(process_noise_) < -kSymmetryTolerance) {
    throw Error(ErrorCode::kNonPositiveDefinite, "process noise is not positive semidefinite");
  }
  process_noise_ = symmetrize(process_noise_);
}

StateSpaceModel StateSpaceModel::random_walk(Index dim, double q) {
  return StateSpaceModel(Matrix::Identity(dim, dim), q * Matrix::Identity(dim, dim));
}

double StateSpaceModel::transition_bound() const { return spectral_norm(transition_); }

Observation::Observation(Matrix op, Matrix noise_cov, Vector value)
    : op_(std::move(op)), noise_cov_(std::move(noise_cov)), value_(std::move(value)) {
  if (op_.rows() < 1) throw Error(ErrorCode::kDimensionMismatch, "observation needs m >= 1");
  require_same(noise_cov_.rows(), op_.rows(), "noise covariance rows");
  require_same(noise_cov_.cols(), op_.rows(), "noise covariance cols");
  require_same(value_.size(), op_.rows(), "observation value size");
  if (!op_.allFinite() || !noise_cov_.allFinite() || !value_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "observation has non-finite entries");
  }
  if (max_asymmetry(noise_cov_) > kSymmetryTolerance) {
    throw Error(ErrorCode::kInvalidArgument, "noise covariance is not symmetric");
  }
  // Positive definiteness of R is checked where it is factorized, so a bad R
  // surfaces as SingularInnovation from the update.
}

Observation Observation::scalar(const RowVector& op, double noise_var, double value) {
  return Observation(Matrix(op), Matrix::Constant(1, 1, noise_var), Vector::Constant(1, value));
}

double Observation::operator_bound() const { return spectral_norm(op_); }
double Observation::noise_bound() const { return max_eigenvalue(noise_cov_); }

GaussianBelief predict(const StateSpaceModel& model, const GaussianBelief& belief) {
  require_same(belief.dim(), model.state_dim(), "belief/model dimension");
  const Matrix& a = model.transition();
  return GaussianBelief(a * belief.mean(),
                        symmetrize(a * belief.covariance() * a.transpose() + model.process_noise()));
}

FilterStep update(const GaussianBelief& prior, const Observation& obs) {
  require_same(obs.state_dim(), prior.dim(), "observation/belief dimension");
  const Index d = prior.dim();
  const Matrix& h = obs.op();
  const Matrix& p = prior.covariance();
  const Matrix& r = obs.noise_cov();

  // R must be PD on its own; a PSD S with a singular R is a degenerate model.
  spd_factor(r, ErrorCode::kSingularInnovation, "observation noise covariance");
  const Matrix ph_t = p * h.transpose();
  Matrix s = symmetrize(h * ph_t + r);
  const auto llt = spd_factor(s, ErrorCode::kSingularInnovation, "innovation covariance");

  // K = P Hᵀ S⁻¹ = (S⁻¹ H P)ᵀ.
  Matrix gain = llt.solve(ph_t.transpose()).transpose();
  Vector innovation = obs.value() - h * prior.mean();
  Vector mean = prior.mean() + gain * innovation;

  const Matrix i_kh = Matrix::Identity(d, d) - gain * h;
  Matrix cov = symmetrize(i_kh * p * i_kh.transpose() + gain * r * gain.transpose());

  return FilterStep{prior, GaussianBelief(std::move(mean), std::move(cov)), std::move(gain),
                    std::move(innovation), std::move(s)};
}

PrecisionBelief update_information(const PrecisionBelief& belief, const Observation& obs) {
  require_same(obs.state_dim(), belief.dim(), "observation/belief dimension");
  const auto r_llt =
      spd_factor(obs.noise_cov(), ErrorCode::kSingularInnovation, "observation noise covariance");
  const Matrix& h = obs.op();
  const Matrix rinv_h = r_llt.solve(h);
  Matrix lambda = symmetrize(belief.information_matrix() + h.transpose() * rinv_h);
  Vector eta = belief.information_vector() + rinv_h.transpose() * obs.value();
  return PrecisionBelief(std::move(lambda), std::move(eta));
}

PrecisionBelief predict_information(const StateSpaceModel& model, const PrecisionBelief& belief) {
  return to_information(predict(model, from_information(belief)));
}

std::vector<FilterStep> run_filter(const StateSpaceModel& model, const GaussianBelief& init,
                                   std::span<const Observation> observations) {
  std::vector<FilterStep> trace;
  trace.reserve(observations.size());
  GaussianBelief current = init;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    try {
      trace.push_back(update(predict(model, current), observations[t]));
    } catch (const Error& e) {
      throw StepError(t, e);
    }
    current = trace.back().posterior;
  }
  return trace;
}

std::vector<PrecisionBelief> run_information_filter(const StateSpaceModel& model,
                                                    const PrecisionBelief& init,
                                                    std::span<const Observation> observations) {
  std::vector<PrecisionBelief> out;
  out.reserve(observations.size());
  PrecisionBelief current = init;
  for (std::size_t t = 0; t < observations.size(); ++t) {
    try {
      current = update_information(predict_information(model, current), observations[t]);
    } catch (const Error& e) {
      throw StepError(t, e);
    }
    out.push_back(current);
  }
  return out;
}

GaussianBelief diagonal_update(const GaussianBelief& prior, const Observation& obs) {
  if (obs.obs_dim() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "diagonal_update takes scalar observations");
  }
  const Matrix& p = prior.covariance();
  const Matrix off = p - Matrix(p.diagonal().asDiagonal());
  if (off.size() > 0 && off.cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "diagonal_update needs a diagonal covariance");
  }
  FilterStep step = update(prior, obs);
  Matrix diag = step.posterior.covariance().diagonal().asDiagonal();
  return GaussianBelief(step.posterior.mean(), std::move(diag));
}

}  // namespace kadapt
