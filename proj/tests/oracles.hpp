// Independent reference computations used by the unit tests. These avoid
// the library's factorizations on purpose so agreement is meaningful.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "kadapt/belief.hpp"
#include "kadapt/rng.hpp"

namespace oracle {

using kadapt::Matrix;
using kadapt::Vector;

inline double rel(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

/// Conjugate posterior via explicit inverses of the normal equations.
struct Posterior {
  Vector mean;
  Matrix cov;
};

inline Posterior normal_equations(const Vector& mu0, const Matrix& p0, const std::vector<Matrix>& hs,
                                  const std::vector<Matrix>& rs, const std::vector<Vector>& ys) {
  Matrix lambda = p0.inverse();
  Vector eta = lambda * mu0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const Matrix rinv = rs[i].inverse();
    lambda += hs[i].transpose() * rinv * hs[i];
    eta += hs[i].transpose() * rinv * ys[i];
  }
  Posterior out;
  out.cov = lambda.inverse();
  out.mean = out.cov * eta;
  return out;
}

/// −log softmax(z)[y] computed with long double and an explicit max shift.
inline double cross_entropy(const Vector& logits, int target) {
  long double m = logits.maxCoeff();
  long double sum = 0.0L;
  for (kadapt::Index i = 0; i < logits.size(); ++i) sum += std::exp(static_cast<long double>(logits(i)) - m);
  return static_cast<double>(m + std::log(sum) - static_cast<long double>(logits(target)));
}

inline Matrix random_spd(kadapt::Rng& rng, kadapt::Index n, double jitter = 0.5) {
  const Matrix g = rng.normal_matrix(n, n);
  return g * g.transpose() + jitter * Matrix::Identity(n, n);
}

}  // namespace oracle
