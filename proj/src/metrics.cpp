#include "particle_em/metrics.hpp"

#include <Eigen/SVD>

#include <string>

namespace pem::metrics {

double mse(VectorRef a, VectorRef b) {
  if (a.size() != b.size()) {
    throw DimensionError("mse: lengths " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
  }
  if (a.size() == 0) return 0.0;
  return (a - b).squaredNorm() / static_cast<double>(a.size());
}

Moments particle_moments(const ParticleCloud& particles) {
  if (particles.size() < 2) throw std::invalid_argument("particle_moments: variance needs at least two particles");
  const Matrix& z = particles.positions();
  Vector mean = particles.mean();
  const Matrix centered = z.rowwise() - mean.transpose();
  Vector variance = centered.colwise().squaredNorm().transpose() / static_cast<double>(z.rows() - 1);
  return {std::move(mean), std::move(variance)};
}

double test_error(const Eigen::VectorXi& predicted, const Eigen::VectorXi& truth) {
  if (predicted.size() != truth.size()) {
    throw DimensionError("test_error: lengths " + std::to_string(predicted.size()) + " and " +
                         std::to_string(truth.size()));
  }
  if (predicted.size() == 0) return 0.0;
  return static_cast<double>((predicted.array() != truth.array()).count()) / static_cast<double>(predicted.size());
}

Alignment procrustes_align(const Matrix& reference, const Matrix& target) {
  if (reference.rows() != target.rows() || reference.cols() != target.cols()) {
    throw DimensionError("procrustes_align: shapes differ");
  }
  const Eigen::Index d = reference.cols();
  const Eigen::MatrixXd cross = reference.transpose() * target;

  Eigen::MatrixXd rotation = Eigen::MatrixXd::Identity(d, d);
  if (cross.cwiseAbs().maxCoeff() > 0.0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
    rotation = svd.matrixU() * svd.matrixV().transpose();
  }
  Matrix aligned = target * rotation.transpose();
  return {std::move(aligned), Matrix(rotation)};
}

}  // namespace pem::metrics
