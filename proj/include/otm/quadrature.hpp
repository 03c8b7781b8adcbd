#pragma once

#include <Eigen/Eigenvalues>

#include <cmath>

#include "otm/types.hpp"

namespace otm {

template <typename Scalar> struct QuadratureRule {
  VectorX<Scalar> nodes;   // on [-1, 1]
  VectorX<Scalar> weights; // sum to 2
};

/// Gauss-Legendre rule with `points` nodes (Golub-Welsch).
template <typename Scalar = double>
QuadratureRule<Scalar> gauss_legendre(int points) {
  if (points < 1)
    throw InvalidArgument("gauss_legendre: need at least one point");
  MatrixX<Scalar> jacobi = MatrixX<Scalar>::Zero(points, points);
  for (int k = 1; k < points; ++k) {
    using std::sqrt;
    const Scalar kk = Scalar(k);
    const Scalar beta = kk / sqrt(Scalar(4) * kk * kk - Scalar(1));
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> es(jacobi);
  QuadratureRule<Scalar> rule;
  rule.nodes = es.eigenvalues();
  rule.weights = Scalar(2) * es.eigenvectors().row(0).transpose().array().square();
  return rule;
}

} // namespace otm
