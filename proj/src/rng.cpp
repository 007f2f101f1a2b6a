#include "kadapt/rng.hpp"

#include <Eigen/QR>

namespace kadapt {

Matrix Rng::spd_matrix(Index n, double lo, double hi) {
  const Eigen::HouseholderQR<Matrix> qr(normal_matrix(n, n));
  const Matrix q = qr.householderQ();
  Vector eig(n);
  for (Index i = 0; i < n; ++i) eig(i) = uniform(lo, hi);
  return symmetrize(q * eig.asDiagonal() * q.transpose());
}

}  // namespace kadapt
