#pragma once

#include <cstdint>
#include <vector>

#include "kadapt/linear_filter.hpp"

namespace kadapt {

/// K orthonormal basis vectors ψ_k on an n-point domain, stored as columns.
class SpectralBasis {
 public:
  explicit SpectralBasis(Matrix basis_vectors);

  /// Orthonormal DCT-II basis, first K frequencies.
  static SpectralBasis cosine(Index domain_size, Index num_components);
  /// Lowest-K eigenvectors of the path-graph Laplacian.
  static SpectralBasis path_laplacian(Index domain_size, Index num_components);

  const Matrix& basis_vectors() const noexcept { return basis_; }
  Index domain_size() const noexcept { return basis_.rows(); }
  Index num_components() const noexcept { return basis_.cols(); }

 private:
  Matrix basis_;
};

/// c_k = ⟨ψ_k, x⟩.
Vector analyze(const SpectralBasis& basis, const Vector& signal);
/// x = Σ c_k ψ_k.
Vector synthesize(const SpectralBasis& basis, const Vector& coefficients);

/// Coefficients c of a signal and the response a it is observed through.
struct SpectralSignal {
  Vector coefficients;
  Vector response;
};

/// H = cᵀ, y = aᵀc (noise-free reading; add noise to `value` separately if needed).
Observation spectral_observation(const Vector& coefficients, double noise_var, double value);
Observation spectral_observation(const SpectralSignal& signal, double noise_var);

struct SpectralRunOptions {
  std::size_t num_obs = 200;
  double noise_var = 0.1;
  double process_noise = 0.0;  // Q = q I used by the filter
  double drift = 0.0;          // per-step random-walk std of the true response
  double prior_scale = 10.0;
};

struct SpectralRun {
  std::vector<Vector> coefficients;  // one per observation
  std::vector<double> targets;
  std::vector<Vector> true_response;  // per step (drifts when drift > 0)
  std::vector<FilterStep> steps;
  std::vector<double> response_sq_error;  // ‖â_t − a*_t‖²
};

/// Draws c ~ N(0, I) per step, observes y = a*ᵀc + noise, filters a with A = I.
SpectralRun run_spectral_experiment(const SpectralBasis& basis, const Vector& true_response,
                                    const SpectralRunOptions& config, std::uint64_t seed);

}  // namespace kadapt
