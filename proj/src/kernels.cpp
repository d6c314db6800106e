#include "particle_em/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace pem::kernels {

namespace {

void check_grads(const ParticleCloud& particles, const Matrix& grads) {
  if (static_cast<std::size_t>(grads.rows()) != particles.size() ||
      static_cast<std::size_t>(grads.cols()) != particles.dim()) {
    throw DimensionError("stein_direction: grads is " + std::to_string(grads.rows()) + "x" +
                         std::to_string(grads.cols()) + ", particles are " +
                         std::to_string(particles.size()) + "x" + std::to_string(particles.dim()));
  }
}

double sq_dist(const Matrix& z, Eigen::Index i, Eigen::Index j) {
  return (z.row(i) - z.row(j)).squaredNorm();
}

}  // namespace

Matrix pairwise_sq_dists(const ParticleCloud& particles) {
  const auto& z = particles.positions();
  const Eigen::Index n = z.rows();
  Matrix d2 = Matrix::Zero(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = sq_dist(z, i, j);
      d2(i, j) = v;
      d2(j, i) = v;
    }
  }
  return d2;
}

Bandwidth median_heuristic(const ParticleCloud& particles) {
  const std::size_t n = particles.size();
  if (n < 2) return Bandwidth(1.0);

  const auto& z = particles.positions();
  std::vector<double> dists;
  dists.reserve(n * (n - 1) / 2);
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) dists.push_back(std::sqrt(sq_dist(z, i, j)));
  }

  const std::size_t m = dists.size();
  const auto mid = dists.begin() + static_cast<std::ptrdiff_t>(m / 2);
  std::nth_element(dists.begin(), mid, dists.end());
  double med = *mid;
  if (m % 2 == 0) {
    const double lower = *std::max_element(dists.begin(), mid);
    med = 0.5 * (lower + med);
  }

  const double h = med * med / std::log(static_cast<double>(n));
  if (!(h > 0.0) || !std::isfinite(h)) return Bandwidth(1.0);
  return Bandwidth(h);
}

Matrix rbf_matrix(const ParticleCloud& particles, Bandwidth h) {
  const auto& z = particles.positions();
  const Eigen::Index n = z.rows();
  const double inv_h = 1.0 / h.value();
  Matrix k(n, n);
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double v = std::exp(-sq_dist(z, i, j) * inv_h);
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Matrix stein_direction(const ParticleCloud& particles, const Matrix& grads, Bandwidth h) {
  check_grads(particles, grads);
  const auto& z = particles.positions();
  const Eigen::Index n = z.rows();
  const Eigen::Index d = z.cols();
  const Matrix k = rbf_matrix(particles, h);
  const double repulsion = 2.0 / h.value();
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix phi(n, d);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(d);
    for (Eigen::Index j = 0; j < n; ++j) {
      acc += k(j, i) * (grads.row(j) + repulsion * (z.row(i) - z.row(j)));
    }
    phi.row(i) = acc * inv_n;
  }
  return phi;
}

double rbf(VectorRef a, VectorRef b, Bandwidth h) {
  return std::exp(-(a - b).squaredNorm() / h.value());
}

Vector rbf_grad_first(VectorRef a, VectorRef b, Bandwidth h) {
  return (2.0 / h.value()) * rbf(a, b, h) * (b - a);
}

namespace serial {

Matrix pairwise_sq_dists(const ParticleCloud& particles) {
  const auto& z = particles.positions();
  const Eigen::Index n = z.rows();
  Matrix d2 = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      d2(i, j) = d2(j, i) = sq_dist(z, i, j);
    }
  }
  return d2;
}

Matrix rbf_matrix(const ParticleCloud& particles, Bandwidth h) {
  Matrix k = pairwise_sq_dists(particles);
  const double inv_h = 1.0 / h.value();
  for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = std::exp(-k.data()[i] * inv_h);
  return k;
}

Matrix stein_direction(const ParticleCloud& particles, const Matrix& grads, Bandwidth h) {
  check_grads(particles, grads);
  const auto& z = particles.positions();
  const Eigen::Index n = z.rows();
  const Matrix k = rbf_matrix(particles, h);
  const double repulsion = 2.0 / h.value();

  Matrix phi = Matrix::Zero(n, z.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      phi.row(i) += k(j, i) * grads.row(j);
      phi.row(i) += repulsion * k(j, i) * (z.row(i) - z.row(j));
    }
  }
  return phi / static_cast<double>(n);
}

}  // namespace serial

}  // namespace pem::kernels
