#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace pem {

using Vector = Eigen::VectorXd;
/// Row-major so each particle (row) is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorRef = Eigen::Ref<const Eigen::VectorXd>;
using Rng = std::mt19937_64;

/// Shape or length disagreement between arguments.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// N particles in R^d, stored one per row. Never empty.
class ParticleCloud {
 public:
  explicit ParticleCloud(Matrix positions) : positions_(std::move(positions)) {
    if (positions_.rows() == 0 || positions_.cols() == 0) {
      throw DimensionError("particle cloud must hold at least one particle of positive dimension");
    }
  }

  std::size_t size() const { return static_cast<std::size_t>(positions_.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(positions_.cols()); }

  auto particle(std::size_t i) const { return positions_.row(static_cast<Eigen::Index>(i)).transpose(); }

  const Matrix& positions() const { return positions_; }
  Matrix& positions() { return positions_; }

  Vector mean() const { return positions_.colwise().mean().transpose(); }

  bool all_finite() const { return positions_.allFinite(); }

 private:
  Matrix positions_;
};

/// Squared length scale of the RBF kernel; strictly positive and finite.
class Bandwidth {
 public:
  explicit Bandwidth(double h) : h_(h) {
    if (!(h > 0.0) || !std::isfinite(h)) {
      throw std::invalid_argument("bandwidth must be positive and finite, got " + std::to_string(h));
    }
  }
  double value() const { return h_; }

 private:
  double h_;
};

inline Vector standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal(rng);
  return out;
}

inline Matrix standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out(rows, cols);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = normal(rng);
  return out;
}

}  // namespace pem
