#pragma once

#include "particle_em/types.hpp"

namespace pem::kernels {

// RBF kernel k(a, b) = exp(-||a - b||^2 / h) and the Stein update direction
//
//   phi[i] = (1/N) sum_j [ k(z_j, z_i) grad[j] + d/dz_j k(z_j, z_i) ],
//   d/dz_j k(z_j, z_i) = (2/h) (z_i - z_j) k(z_j, z_i).
//
// The O(N^2) loops are OpenMP-parallel over the output row i. Each row sums
// over j in a fixed order, so results do not depend on the thread count.
// The `serial` namespace keeps straightforward single-threaded versions for
// testing and benchmarking.

Matrix pairwise_sq_dists(const ParticleCloud& particles);

/// h = med^2 / ln(N), med the median pairwise Euclidean distance. Falls back
/// to h = 1 when N = 1 or med = 0.
Bandwidth median_heuristic(const ParticleCloud& particles);

Matrix rbf_matrix(const ParticleCloud& particles, Bandwidth h);

/// `grads` row j holds grad_z log pi(z_j). Throws DimensionError on shape mismatch.
Matrix stein_direction(const ParticleCloud& particles, const Matrix& grads, Bandwidth h);

double rbf(VectorRef a, VectorRef b, Bandwidth h);

/// Gradient of k(a, b) with respect to its first argument a.
Vector rbf_grad_first(VectorRef a, VectorRef b, Bandwidth h);

namespace serial {

Matrix pairwise_sq_dists(const ParticleCloud& particles);
Matrix rbf_matrix(const ParticleCloud& particles, Bandwidth h);
Matrix stein_direction(const ParticleCloud& particles, const Matrix& grads, Bandwidth h);

}  // namespace serial

}  // namespace pem::kernels
