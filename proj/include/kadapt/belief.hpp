#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "kadapt/errors.hpp"

namespace kadapt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Max absolute asymmetry accepted for covariance/precision matrices.
inline constexpr double kSymmetryTolerance = 1e-10;
/// Eigenvalue floor used by the explicit repair path.
inline constexpr double kDefaultEigenFloor = 1e-12;
/// Slack for Loewner-order comparisons, λ_min(Y − X) ≥ −tol.
inline constexpr double kLoewnerTolerance = 1e-9;

/**
 * Gaussian belief N(mean, covariance) over the latent adaptation state.
 *
 * Construction validates shape, finiteness and symmetry. Positive
 * definiteness is enforced where the covariance gets factorized, so a
 * corrupted belief surfaces as NonPositiveDefinite at the point of use.
 */
class GaussianBelief {
 public:
  GaussianBelief(Vector mean, Matrix covariance);

  static GaussianBelief isotropic(Vector mean, double variance);

  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  Index dim() const noexcept { return mean_.size(); }

  /// Copy with the covariance passed through symmetrize_and_floor.
  GaussianBelief repaired(double floor = kDefaultEigenFloor) const;

 private:
  Vector mean_;
  Matrix covariance_;
};

/// Information form: Λ = P⁻¹, η = Λμ.
class PrecisionBelief {
 public:
  PrecisionBelief(Matrix information_matrix, Vector information_vector);

  const Matrix& information_matrix() const noexcept { return information_matrix_; }
  const Vector& information_vector() const noexcept { return information_vector_; }
  Index dim() const noexcept { return information_vector_.size(); }

 private:
  Matrix information_matrix_;
  Vector information_vector_;
};

PrecisionBelief to_information(const GaussianBelief& belief);
GaussianBelief from_information(const PrecisionBelief& belief);

/// (M + Mᵀ)/2 with eigenvalues clamped below at `floor`.
Matrix symmetrize_and_floor(const Matrix& matrix, double floor);

Matrix symmetrize(const Matrix& matrix);

/// Cholesky factor of a symmetric matrix; throws `failure` if not PD.
Eigen::LLT<Matrix> spd_factor(const Matrix& matrix, ErrorCode failure, const char* what);

/// Inverse of an SPD matrix via Cholesky, symmetrized.
Matrix spd_inverse(const Matrix& matrix, ErrorCode failure, const char* what);

double min_eigenvalue(const Matrix& symmetric);
double max_eigenvalue(const Matrix& symmetric);
double spectral_norm(const Matrix& matrix);
double max_asymmetry(const Matrix& matrix);

/// True when lower ⪯ upper, i.e. λ_min(upper − lower) ≥ −tol.
bool loewner_leq(const Matrix& lower, const Matrix& upper, double tol = kLoewnerTolerance);

void require_same(Index a, Index b, const char* what);

}  // namespace kadapt
