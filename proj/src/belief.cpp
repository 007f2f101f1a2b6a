#include "kadapt/belief.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <string>

namespace kadapt {

namespace {

void check_square_symmetric(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, std::string(what) + " must be square");
  }
  if (!m.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " has non-finite entries");
  }
  if (max_asymmetry(m) > kSymmetryTolerance) {
    throw Error(ErrorCode::kInvalidArgument, std::string(what) + " is not symmetric");
  }
}

}  // namespace

void require_same(Index a, Index b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + " (" + std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

GaussianBelief::GaussianBelief(Vector mean, Matrix covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
  check_square_symmetric(covariance_, "covariance");
  require_same(covariance_.rows(), mean_.size(), "covariance/mean dimension");
  if (!mean_.allFinite()) throw Error(ErrorCode::kInvalidArgument, "mean has non-finite entries");
}

GaussianBelief GaussianBelief::isotropic(Vector mean, double variance) {
  const Index d = mean.size();
  return GaussianBelief(std::move(mean), variance * Matrix::Identity(d, d));
}

GaussianBelief GaussianBelief::repaired(double floor) const {
  return GaussianBelief(mean_, symmetrize_and_floor(covariance_, floor));
}

PrecisionBelief::PrecisionBelief(Matrix information_matrix, Vector information_vector)
    : information_matrix_(std::move(information_matrix)),
      information_vector_(std::move(information_vector)) {
  check_square_symmetric(information_matrix_, "information matrix");
  require_same(information_matrix_.rows(), information_vector_.size(),
               "information matrix/vector dimension");
  if (!information_vector_.allFinite()) {
    throw Error(ErrorCode::kInvalidArgument, "information vector has non-finite entries");
  }
}

PrecisionBelief to_information(const GaussianBelief& belief) {
  const auto llt = spd_factor(belief.covariance(), ErrorCode::kNonPositiveDefinite, "covariance");
  const Index d = belief.dim();
  Matrix lambda = symmetrize(llt.solve(Matrix::Identity(d, d)));
  Vector eta = llt.solve(belief.mean());
  return PrecisionBelief(std::move(lambda), std::move(eta));
}

GaussianBelief from_information(const PrecisionBelief& belief) {
  const auto llt =
      spd_factor(belief.information_matrix(), ErrorCode::kNonPositiveDefinite, "information matrix");
  const Index d = belief.dim();
  Matrix p = symmetrize(llt.solve(Matrix::Identity(d, d)));
  Vector mu = llt.solve(belief.information_vector());
  return GaussianBelief(std::move(mu), std::move(p));
}

Matrix symmetrize(const Matrix& matrix) {
  return 0.5 * (matrix + matrix.transpose());
}

Matrix symmetrize_and_floor(const Matrix& matrix, double floor) {
  if (matrix.rows() != matrix.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "symmetrize_and_floor needs a square matrix");
  }
  if (floor < 0.0) throw Error(ErrorCode::kInvalidArgument, "eigenvalue floor must be nonnegative");
  Matrix sym = symmetrize(matrix);
  if (sym.size() == 0) return sym;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const Vector& values = eig.eigenvalues();
  if (values.minCoeff() >= floor) return sym;
  const Vector clamped = values.cwiseMax(floor);
  return symmetrize(eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose());
}

Eigen::LLT<Matrix> spd_factor(const Matrix& matrix, ErrorCode failure, const char* what) {
  Eigen::LLT<Matrix> llt(matrix);
  if (llt.info() != Eigen::Success) {
    throw Error(failure, std::string(what) + " is not positive definite");
  }
  // LLT only checks pivots > 0; reject tiny-negative pivots hidden by rounding.
  const auto diag = llt.matrixLLT().diagonal();
  if (!(diag.array() > 0.0).all() || !diag.allFinite()) {
    throw Error(failure, std::string(what) + " is not positive definite");
  }
  return llt;
}

Matrix spd_inverse(const Matrix& matrix, ErrorCode failure, const char* what) {
  const auto llt = spd_factor(matrix, failure, what);
  return symmetrize(llt.solve(Matrix::Identity(matrix.rows(), matrix.cols())));
}

double min_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(symmetric), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .minCoeff();
}

double max_eigenvalue(const Matrix& symmetric) {
  if (symmetric.size() == 0) return 0.0;
  return Eigen::SelfAdjointEigenSolver<Matrix>(symmetrize(symmetric), Eigen::EigenvaluesOnly)
      .eigenvalues()
      .maxCoeff();
}

double spectral_norm(const Matrix& matrix) {
  if (matrix.size() == 0) return 0.0;
  return Eigen::JacobiSVD<Matrix>(matrix).singularValues()(0);
}

double max_asymmetry(const Matrix& matrix) {
  if (matrix.size() == 0) return 0.0;
  return (matrix - matrix.transpose()).cwiseAbs().maxCoeff();
}

bool loewner_leq(const Matrix& lower, const Matrix& upper, double tol) {
  return min_eigenvalue(upper - lower) >= -tol;
}

}  // namespace kadapt
