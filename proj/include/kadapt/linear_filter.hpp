#pragma once

#include <span>
#include <vector>

#include "kadapt/belief.hpp"

namespace kadapt {

/// x_t = A x_{t-1} + w_t, w_t ~ N(0, Q).
class StateSpaceModel {
 public:
  StateSpaceModel(Matrix transition, Matrix process_noise);

  /// A = I, Q = q·I.
  static StateSpaceModel random_walk(Index dim, double q = 0.0);

  const Matrix& transition() const noexcept { return transition_; }
  const Matrix& process_noise() const noexcept { return process_noise_; }
  Index state_dim() const noexcept { return transition_.rows(); }

  /// ‖A‖₂, the M_A bound of the boundedness assumption.
  double transition_bound() const;

 private:
  Matrix transition_;
  Matrix process_noise_;
};

/// y = H x + v, v ~ N(0, R). H is m×d.
class Observation {
 public:
  Observation(Matrix op, Matrix noise_cov, Vector value);

  static Observation scalar(const RowVector& op, double noise_var, double value);

  const Matrix& op() const noexcept { return op_; }
  const Matrix& noise_cov() const noexcept { return noise_cov_; }
  const Vector& value() const noexcept { return value_; }
  Index obs_dim() const noexcept { return op_.rows(); }
  Index state_dim() const noexcept { return op_.cols(); }

  double operator_bound() const;  // M_H
  double noise_bound() const;     // M_R

 private:
  Matrix op_;
  Matrix noise_cov_;
  Vector value_;
};

struct FilterStep {
  GaussianBelief prior;
  GaussianBelief posterior;
  Matrix gain;            // d×m
  Vector innovation;      // y − H μ_{t|t-1}
  Matrix innovation_cov;  // H P Hᵀ + R
};

GaussianBelief predict(const StateSpaceModel& model, const GaussianBelief& belief);

/// Measurement update of a predicted prior. Covariance in Joseph form.
FilterStep update(const GaussianBelief& prior, const Observation& obs);

/// Λ⁺ = Λ + HᵀR⁻¹H, η⁺ = η + HᵀR⁻¹y.
PrecisionBelief update_information(const PrecisionBelief& belief, const Observation& obs);

/// Time update in information form (through the covariance).
PrecisionBelief predict_information(const StateSpaceModel& model, const PrecisionBelief& belief);

/// Alternates predict/update once per observation. Failures are rethrown
/// as StepError carrying the index of the failing observation.
std::vector<FilterStep> run_filter(const StateSpaceModel& model, const GaussianBelief& init,
                                   std::span<const Observation> observations);

/// Information-form counterpart of run_filter; returns the posterior after each step.
std::vector<PrecisionBelief> run_information_filter(const StateSpaceModel& model,
                                                    const PrecisionBelief& init,
                                                    std::span<const Observation> observations);

/**
 * Diagonal-covariance approximation for scalar observations: the exact
 * update followed by dropping the off-diagonal entries of P⁺. Exact for
 * d = 1 and for coordinate-aligned H; otherwise it discards the
 * cross-covariance the observation creates.
 */
GaussianBelief diagonal_update(const GaussianBelief& prior, const Observation& obs);

}  // namespace kadapt
