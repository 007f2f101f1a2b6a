#include "kadapt/optimization_limits.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

namespace kadapt {

void RegressionDataset::validate() const {
  if (regressors.size() != targets.size()) {
    throw Error(ErrorCode::kLengthMismatch, "regressors and targets differ in length");
  }
  if (!(noise_var > 0.0)) throw Error(ErrorCode::kInvalidArgument, "noise_var must be positive");
  if (!regressors.empty()) {
    const Index d = regressors.front().size();
    for (const Vector& phi : regressors) require_same(phi.size(), d, "regressor dimension");
    if (truth) require_same(truth->size(), d, "truth dimension");
  }
}

std::vector<Observation> to_observations(const RegressionDataset& dataset) {
  dataset.validate();
  std::vector<Observation> out;
  out.reserve(dataset.size());
  for (std::size_t t = 0; t < dataset.size(); ++t) {
    out.push_back(Observation::scalar(dataset.regressors[t].transpose(), dataset.noise_var,
                                      dataset.targets[t]));
  }
  return out;
}

GaussianBelief batch_posterior(const RegressionDataset& dataset, const GaussianBelief& prior) {
  dataset.validate();
  if (dataset.size() == 0) return prior;
  const Index d = prior.dim();
  const auto prior_llt =
      spd_factor(prior.covariance(), ErrorCode::kNonPositiveDefinite, "prior covariance");
  Matrix gram = Matrix::Zero(d, d);
  Vector moment = Vector::Zero(d);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Vector& phi = dataset.regressors[i];
    require_same(phi.size(), d, "regressor/prior dimension");
    gram.noalias() += phi * phi.transpose();
    moment += phi * dataset.targets[i];
  }
  const Matrix precision =
      symmetrize(prior_llt.solve(Matrix::Identity(d, d)) + gram / dataset.noise_var);
  const auto llt = spd_factor(precision, ErrorCode::kNonPositiveDefinite, "posterior precision");
  Vector mean = llt.solve(prior_llt.solve(prior.mean()) + moment / dataset.noise_var);
  return GaussianBelief(std::move(mean), symmetrize(llt.solve(Matrix::Identity(d, d))));
}

Vector gd_limit_step(const GaussianBelief& belief, const Observation& obs, double epsilon) {
  if (obs.obs_dim() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient limit is defined for scalar observations");
  }
  require_same(obs.state_dim(), belief.dim(), "observation/belief dimension");
  if (epsilon < 0.0) throw Error(ErrorCode::kInvalidArgument, "epsilon must be nonnegative");
  const Vector p_ht = belief.covariance() * obs.op().transpose();
  const double s = (obs.op() * p_ht)(0, 0) + epsilon;
  if (!(s > 0.0)) {
    throw Error(ErrorCode::kSingularInnovation, "H P0 Hᵀ + epsilon is not positive");
  }
  const double residual = obs.value()(0) - (obs.op() * belief.mean())(0);
  return belief.mean() + p_ht * (residual / s);
}

std::vector<Vector> sgd_baseline(const RegressionDataset& dataset, const Vector& init,
                                 double step_size) {
  dataset.validate();
  if (!(step_size > 0.0)) throw Error(ErrorCode::kInvalidArgument, "step size must be positive");
  std::vector<Vector> iterates;
  iterates.reserve(dataset.size());
  Vector alpha = init;
  for (std::size_t t = 0; t < dataset.size(); ++t) {
    const Vector& phi = dataset.regressors[t];
    require_same(phi.size(), alpha.size(), "regressor/iterate dimension");
    alpha += step_size * phi * (dataset.targets[t] - phi.dot(alpha));
    iterates.push_back(alpha);
  }
  return iterates;
}

Vector ridge_baseline(const RegressionDataset& dataset, double lambda) {
  dataset.validate();
  if (lambda < 0.0) throw Error(ErrorCode::kInvalidArgument, "ridge lambda must be nonnegative");
  if (dataset.size() == 0) {
    throw Error(ErrorCode::kSingularSystem, "ridge regression needs data");
  }
  const Index d = dataset.regressors.front().size();
  Matrix gram = lambda * Matrix::Identity(d, d);
  Vector moment = Vector::Zero(d);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    gram.noalias() += dataset.regressors[i] * dataset.regressors[i].transpose();
    moment += dataset.regressors[i] * dataset.targets[i];
  }
  if (lambda == 0.0) {
    const Vector eig =
        Eigen::SelfAdjointEigenSolver<Matrix>(gram, Eigen::EigenvaluesOnly).eigenvalues();
    if (eig.minCoeff() <= 1e-12 * std::max(1.0, eig.maxCoeff())) {
      throw Error(ErrorCode::kSingularSystem, "design is rank-deficient and lambda = 0");
    }
  }
  return spd_factor(gram, ErrorCode::kSingularSystem, "ridge normal equations").solve(moment);
}

std::vector<RegretPoint> regret_curve(std::span<const FilterStep> trace,
                                      const RegressionDataset& dataset) {
  dataset.validate();
  if (!dataset.truth) throw Error(ErrorCode::kMissingTruth, "regret needs the true parameter");
  if (trace.size() != dataset.size()) {
    throw Error(ErrorCode::kLengthMismatch, "trace and dataset lengths differ");
  }
  std::vector<RegretPoint> out;
  out.reserve(trace.size());
  if (trace.empty()) return out;
  const Index d = dataset.truth->size();
  Matrix design = Matrix::Identity(d, d);
  double cumulative = 0.0;
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const Vector& phi = dataset.regressors[t];
    const double gap = phi.dot(trace[t].prior.mean() - *dataset.truth);
    RegretPoint point;
    point.step = t;
    point.instantaneous = gap * gap;
    cumulative += point.instantaneous;
    point.cumulative = cumulative;
    design.noalias() += phi * phi.transpose() / dataset.noise_var;
    const auto llt = spd_factor(design, ErrorCode::kNonPositiveDefinite, "regret design");
    point.log_det_bound = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    out.push_back(point);
  }
  return out;
}

}  // namespace kadapt
