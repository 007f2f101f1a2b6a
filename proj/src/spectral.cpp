#include "kadapt/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>

#include "kadapt/rng.hpp"

namespace kadapt {

SpectralBasis::SpectralBasis(Matrix basis_vectors) : basis_(std::move(basis_vectors)) {
  if (basis_.cols() < 1 || basis_.cols() > basis_.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "spectral basis needs 1 <= K <= n");
  }
  const Matrix gram = basis_.transpose() * basis_;
  const Index k = basis_.cols();
  if ((gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-10) {
    throw Error(ErrorCode::kInvalidArgument, "spectral basis is not orthonormal");
  }
}

SpectralBasis SpectralBasis::cosine(Index domain_size, Index num_components) {
  if (num_components < 1 || num_components > domain_size) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine basis needs 1 <= K <= n");
  }
  const double n = static_cast<double>(domain_size);
  Matrix basis(domain_size, num_components);
  for (Index k = 0; k < num_components; ++k) {
    const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    for (Index i = 0; i < domain_size; ++i) {
      basis(i, k) = scale * std::cos(std::numbers::pi * (static_cast<double>(i) + 0.5) *
                                     static_cast<double>(k) / n);
    }
  }
  return SpectralBasis(std::move(basis));
}

SpectralBasis SpectralBasis::path_laplacian(Index domain_size, Index num_components) {
  if (num_components < 1 || num_components > domain_size) {
    throw Error(ErrorCode::kDimensionMismatch, "Laplacian basis needs 1 <= K <= n");
  }
  Matrix lap = Matrix::Zero(domain_size, domain_size);
  for (Index i = 0; i + 1 < domain_size; ++i) {
    lap(i, i) += 1.0;
    lap(i + 1, i + 1) += 1.0;
    lap(i, i + 1) -= 1.0;
    lap(i + 1, i) -= 1.0;
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(lap);
  return SpectralBasis(eig.eigenvectors().leftCols(num_components));
}

Vector analyze(const SpectralBasis& basis, const Vector& signal) {
  require_same(signal.size(), basis.domain_size(), "signal/basis domain size");
  return basis.basis_vectors().transpose() * signal;
}

Vector synthesize(const SpectralBasis& basis, const Vector& coefficients) {
  require_same(coefficients.size(), basis.num_components(), "coefficient count");
  return basis.basis_vectors() * coefficients;
}

Observation spectral_observation(const Vector& coefficients, double noise_var, double value) {
  if (!(noise_var > 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_var must be positive");
  return Observation::scalar(coefficients.transpose(), noise_var, value);
}

Observation spectral_observation(const SpectralSignal& signal, double noise_var) {
  require_same(signal.coefficients.size(), signal.response.size(), "coefficients/response size");
  return spectral_observation(signal.coefficients, noise_var,
                              signal.response.dot(signal.coefficients));
}

SpectralRun run_spectral_experiment(const SpectralBasis& basis, const Vector& true_response,
                                    const SpectralRunOptions& config, std::uint64_t seed) {
  const Index k = basis.num_components();
  require_same(true_response.size(), k, "true response size");
  if (config.num_obs < 1) throw Error(ErrorCode::kInvalidArgument, "num_obs must be >= 1");
  if (!(config.noise_var > 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_var must be > 0");

  Rng signal_rng(seed, Stream::kRegressors);
  Rng noise_rng(seed, Stream::kNoise);
  Rng drift_rng(seed, Stream::kShift);
  const double noise_sd = std::sqrt(config.noise_var);

  SpectralRun run;
  std::vector<Observation> observations;
  Vector response = true_response;
  for (std::size_t t = 0; t < config.num_obs; ++t) {
    if (config.drift > 0.0 && t > 0) response += config.drift * drift_rng.normal_vector(k);
    // The coefficients come from a synthesized signal so analyze() is on the data path.
    const Vector signal = synthesize(basis, signal_rng.normal_vector(k));
    Vector c = analyze(basis, signal);
    const double y = response.dot(c) + noise_sd * noise_rng.normal();
    observations.push_back(spectral_observation(c, config.noise_var, y));
    run.coefficients.push_back(std::move(c));
    run.targets.push_back(y);
    run.true_response.push_back(response);
  }
  const auto model = StateSpaceModel::random_walk(k, config.process_noise);
  const auto prior = GaussianBelief::isotropic(Vector::Zero(k), config.prior_scale);
  run.steps = run_filter(model, prior, observations);
  for (std::size_t t = 0; t < run.steps.size(); ++t) {
    run.response_sq_error.push_back(
        (run.steps[t].posterior.mean() - run.true_response[t]).squaredNorm());
  }
  return run;
}

}  // namespace kadapt
