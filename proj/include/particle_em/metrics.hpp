#pragma once

#include "particle_em/types.hpp"

namespace pem::metrics {

/// Mean squared componentwise difference.
double mse(VectorRef a, VectorRef b);

struct Moments {
  Vector mean;
  Vector variance;  // unbiased, divides by N - 1
};

/// Throws std::invalid_argument for fewer than two particles.
Moments particle_moments(const ParticleCloud& particles);

/// Fraction of positions where the labels disagree.
double test_error(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth);

struct Alignment {
  Matrix aligned;
  Matrix rotation;  // d x d orthogonal T with aligned = target * T^T
};

/// Orthogonal Procrustes: T minimizing ||reference - target T^T||_F, from the
/// SVD of reference^T target. Rank-0 cross-covariance gives T = I.
Alignment procrustes_align(const Matrix& reference, const Matrix& target);

}  // namespace pem::metrics
