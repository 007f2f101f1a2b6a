#pragma once

#include <optional>
#include <span>
#include <vector>

#include "kadapt/linear_filter.hpp"

namespace kadapt {

/// y_t = φ_tᵀ α + v_t, v_t ~ N(0, noise_var). `truth` is the generating α
/// (the regression parameter, unrelated to a Gramian's α bound).
struct RegressionDataset {
  std::vector<Vector> regressors;
  std::vector<double> targets;
  double noise_var = 1.0;
  std::optional<Vector> truth;

  std::size_t size() const noexcept { return targets.size(); }
  void validate() const;
};

/// Scalar observations (φ_tᵀ, R, y_t) ready for run_filter.
std::vector<Observation> to_observations(const RegressionDataset& dataset);

/// One-shot conjugate posterior: Λ = P0⁻¹ + Σφφᵀ/R, μ = Λ⁻¹(P0⁻¹μ0 + Σφy/R).
GaussianBelief batch_posterior(const RegressionDataset& dataset, const GaussianBelief& prior);

/**
 * Kalman mean update with R = ε and the covariance frozen at the belief's P0.
 * At ε = 0 this is μ − P0Hᵀ(HP0Hᵀ)⁻¹(Hμ − y), the preconditioned gradient
 * step. The observation's own noise is ignored.
 */
Vector gd_limit_step(const GaussianBelief& belief, const Observation& obs, double epsilon);

/// One pass of α ← α + step·φ_t(y_t − φ_tᵀα); returns every iterate.
/// No clipping, so divergence is observable.
std::vector<Vector> sgd_baseline(const RegressionDataset& dataset, const Vector& init,
                                 double step_size);

/// (λI + Σφφᵀ)⁻¹ Σφy. Equals the batch posterior mean for μ0 = 0, P0 = (R/λ)I.
Vector ridge_baseline(const RegressionDataset& dataset, double lambda);

struct RegretPoint {
  std::size_t step = 0;
  double instantaneous = 0.0;  // (φ_tᵀμ_{t-1} − φ_tᵀα*)²
  double cumulative = 0.0;
  double log_det_bound = 0.0;  // log det(I + Σ_{≤t} φφᵀ / R)
};

std::vector<RegretPoint> regret_curve(std::span<const FilterStep> trace,
                                      const RegressionDataset& dataset);

}  // namespace kadapt
