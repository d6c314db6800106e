#include "particle_em/models.hpp"

#include <cmath>
#include <string>

namespace pem {

namespace {

constexpr double kCoincidentDistance = 1e-12;

double scalar(const Vector& theta) { return theta[0]; }

Vector as_theta(double v) { return Vector::Constant(1, v); }

}  // namespace

// ---------------------------------------------------------------------------
// Model

std::optional<Vector> Model::marginal_mstep(const ParticleCloud&) const { return std::nullopt; }

std::optional<Vector> Model::theta_star() const { return std::nullopt; }

Vector Model::mean_grad_theta(const Vector& theta, const ParticleCloud& particles) const {
  const std::size_t n = particles.size();
  Matrix per_particle(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(theta_dim()));
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < n; ++j) {
    per_particle.row(static_cast<Eigen::Index>(j)) = grad_theta(theta, particles.particle(j)).transpose();
  }
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(theta_dim()));
  for (Eigen::Index j = 0; j < per_particle.rows(); ++j) sum += per_particle.row(j).transpose();
  return sum / static_cast<double>(n);
}

Matrix Model::grad_z_all(const Vector& theta, const ParticleCloud& particles) const {
  const std::size_t n = particles.size();
  Matrix grads(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(particles.dim()));
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < n; ++j) {
    grads.row(static_cast<Eigen::Index>(j)) = grad_z(theta, particles.particle(j)).transpose();
  }
  return grads;
}

void Model::check_latent(VectorRef z) const {
  if (static_cast<std::size_t>(z.size()) != latent_dim()) {
    throw DimensionError(std::string(name()) + ": latent vector has length " + std::to_string(z.size()) +
                         ", expected " + std::to_string(latent_dim()));
  }
}

void Model::check_theta(const Vector& theta) const {
  if (static_cast<std::size_t>(theta.size()) != theta_dim()) {
    throw DimensionError(std::string(name()) + ": theta has length " + std::to_string(theta.size()) +
                         ", expected " + std::to_string(theta_dim()));
  }
}

double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }

double log_sigmoid(double u) { return -softplus(-u); }

double sigmoid(double u) { return std::exp(log_sigmoid(u)); }

// ---------------------------------------------------------------------------
// ToyHierarchical

ToyHierarchical::ToyHierarchical(Vector x) : x_(std::move(x)) {
  if (x_.size() == 0) throw DimensionError("toy model needs at least one observation");
  if (!x_.allFinite()) throw std::invalid_argument("toy model observations must be finite");
}

double ToyHierarchical::log_joint(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  check_latent(z);
  const double t = scalar(theta);
  return -0.5 * (z.array() - t).square().sum() - 0.5 * (x_ - z).squaredNorm();
}

Vector ToyHierarchical::grad_theta(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  check_latent(z);
  return as_theta((z.array() - scalar(theta)).sum());
}

Vector ToyHierarchical::grad_z(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  check_latent(z);
  return (scalar(theta) - z.array()).matrix() + (x_ - z);
}

std::optional<Vector> ToyHierarchical::marginal_mstep(const ParticleCloud& particles) const {
  return as_theta(particles.positions().mean());
}

std::optional<Vector> ToyHierarchical::theta_star() const { return as_theta(x_.mean()); }

Initialization ToyHierarchical::initialize(std::size_t n_particles, Rng& rng) const {
  Vector theta = 0.1 * standard_normal(1, rng);
  Matrix z = standard_normal(static_cast<Eigen::Index>(n_particles), x_.size(), rng);
  return {std::move(theta), ParticleCloud(std::move(z))};
}

ToyHierarchical::PosteriorMoments ToyHierarchical::posterior_moments(double theta) const {
  return {((x_.array() + theta) * 0.5).matrix(), 0.5};
}

// ---------------------------------------------------------------------------
// BayesLogReg

BayesLogReg::BayesLogReg(Matrix features, Vector labels, double prior_var)
    : features_(std::move(features)), labels_(std::move(labels)), prior_var_(prior_var) {
  if (features_.rows() != labels_.size()) {
    throw DimensionError("logreg: " + std::to_string(features_.rows()) + " feature rows but " +
                         std::to_string(labels_.size()) + " labels");
  }
  if (features_.cols() == 0) throw DimensionError("logreg: need at least one feature");
  for (Eigen::Index i = 0; i < labels_.size(); ++i) {
    if (labels_[i] != 0.0 && labels_[i] != 1.0) {
      throw std::invalid_argument("logreg: labels must be 0 or 1 (row " + std::to_string(i) + ")");
    }
  }
  if (!(prior_var_ > 0.0)) throw std::invalid_argument("logreg: prior variance must be positive");
}

double BayesLogReg::log_joint(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  check_latent(z);
  const Vector u = features_ * z;
  double loglik = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) loglik += labels_[i] * u[i] - softplus(u[i]);
  return loglik - (z.array() - scalar(theta)).square().sum() / (2.0 * prior_var_);
}

Vector BayesLogReg::grad_theta(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  check_latent(z);
  return as_theta((z.array() - scalar(theta)).sum() / prior_var_);
}

Vector BayesLogReg::grad_z(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  check_latent(z);
  const Vector u = features_ * z;
  Vector residual(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) residual[i] = labels_[i] - sigmoid(u[i]);
  Vector g = features_.transpose() * residual;
  g.array() += (scalar(theta) - z.array()) / prior_var_;
  return g;
}

std::optional<Vector> BayesLogReg::marginal_mstep(const ParticleCloud& particles) const {
  return as_theta(particles.positions().mean());
}

Initialization BayesLogReg::initialize(std::size_t n_particles, Rng& rng) const {
  Matrix z = standard_normal(static_cast<Eigen::Index>(n_particles), features_.cols(), rng);
  return {Vector::Zero(1), ParticleCloud(std::move(z))};
}

Vector BayesLogReg::predict_proba(const ParticleCloud& particles, const Matrix& features) const {
  if (static_cast<std::size_t>(features.cols()) != particles.dim()) {
    throw DimensionError("predict: features have " + std::to_string(features.cols()) +
                         " columns, particles have dimension " + std::to_string(particles.dim()));
  }
  const Matrix u = features * particles.positions().transpose();  // rows x N
  Vector p(u.rows());
  for (Eigen::Index r = 0; r < u.rows(); ++r) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.cols(); ++i) acc += sigmoid(u(r, i));
    p[r] = acc / static_cast<double>(u.cols());
  }
  return p;
}

Eigen::VectorXi BayesLogReg::predict(const ParticleCloud& particles, const Matrix& features) const {
  const Vector p = predict_proba(particles, features);
  return (p.array() >= 0.5).cast<int>();
}

// ---------------------------------------------------------------------------
// LatentSpaceNetwork

LatentSpaceNetwork::LatentSpaceNetwork(Matrix adjacency) : LatentSpaceNetwork(std::move(adjacency), Options{}) {}

LatentSpaceNetwork::LatentSpaceNetwork(Matrix adjacency, Options options)
    : adjacency_(std::move(adjacency)), options_(options), n_(static_cast<std::size_t>(adjacency_.rows())) {
  if (adjacency_.rows() != adjacency_.cols()) throw DimensionError("network: adjacency must be square");
  if (n_ < 2) throw DimensionError("network: need at least two nodes");
  if (options_.embed_dim == 0) throw DimensionError("network: embed_dim must be positive");
  if (!(options_.prior_var_z > 0.0)) throw std::invalid_argument("network: prior_var_z must be positive");
  if (options_.link_sign != 1.0 && options_.link_sign != -1.0) {
    throw std::invalid_argument("network: link_sign must be +1 or -1");
  }
  for (Eigen::Index i = 0; i < adjacency_.rows(); ++i) {
    if (adjacency_(i, i) != 0.0) throw std::invalid_argument("network: self-loop at node " + std::to_string(i));
    for (Eigen::Index j = 0; j < adjacency_.cols(); ++j) {
      const double y = adjacency_(i, j);
      if (y != 0.0 && y != 1.0) throw std::invalid_argument("network: adjacency must be binary");
      if (y != adjacency_(j, i)) {
        throw std::invalid_argument("network: adjacency is not symmetric at (" + std::to_string(i) + ", " +
                                    std::to_string(j) + ")");
      }
    }
  }
}

Matrix LatentSpaceNetwork::embedding(VectorRef z) const {
  check_latent(z);
  const auto k = static_cast<Eigen::Index>(options_.embed_dim);
  return Eigen::Map<const Matrix>(z.data(), static_cast<Eigen::Index>(n_), k);
}

double LatentSpaceNetwork::log_joint(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  const Matrix e = embedding(z);
  const double t = scalar(theta);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < e.rows(); ++j) {
      const double eta = t + options_.link_sign * (e.row(i) - e.row(j)).norm();
      acc += adjacency_(i, j) * eta - softplus(eta);
    }
  }
  if (std::isfinite(options_.prior_var_z)) acc -= e.squaredNorm() / (2.0 * options_.prior_var_z);
  return acc;
}

Vector LatentSpaceNetwork::grad_theta(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  const Matrix e = embedding(z);
  const double t = scalar(theta);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < e.rows(); ++j) {
      const double eta = t + options_.link_sign * (e.row(i) - e.row(j)).norm();
      acc += adjacency_(i, j) - sigmoid(eta);
    }
  }
  return as_theta(acc);
}

Vector LatentSpaceNetwork::grad_z(const Vector& theta, VectorRef z) const {
  check_theta(theta);
  const Matrix e = embedding(z);
  const double t = scalar(theta);
  Matrix g = Matrix::Zero(e.rows(), e.cols());
  for (Eigen::Index i = 0; i < e.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < e.rows(); ++j) {
      const Eigen::RowVectorXd diff = e.row(i) - e.row(j);
      const double dist = diff.norm();
      const double eta = t + options_.link_sign * dist;
      if (dist < kCoincidentDistance) continue;
      // d/dz_i of [y eta - softplus(eta)] = (y - p) * link_sign * (z_i - z_j) / dist
      const Eigen::RowVectorXd term = (adjacency_(i, j) - sigmoid(eta)) * options_.link_sign / dist * diff;
      g.row(i) += term;
      g.row(j) -= term;
    }
  }
  if (std::isfinite(options_.prior_var_z)) g -= e / options_.prior_var_z;
  return Eigen::Map<const Vector>(g.data(), g.size());
}

std::pair<Vector, Vector> LatentSpaceNetwork::maximize_log_joint(Vector z_start) const {
  check_latent(z_start);
  Vector theta = Vector::Zero(1);
  Vector z = std::move(z_start);
  for (std::size_t it = 0; it < options_.mle_iterations; ++it) {
    const Vector g_theta = grad_theta(theta, z);
    const Vector g_z = grad_z(theta, z);
    theta += options_.mle_step * g_theta;
    z += options_.mle_step * g_z;
  }
  return {std::move(theta), std::move(z)};
}

Initialization LatentSpaceNetwork::initialize(std::size_t n_particles, Rng& rng) const {
  const auto d = static_cast<Eigen::Index>(latent_dim());
  auto [theta_hat, z_hat] = maximize_log_joint(standard_normal(d, rng));
  Matrix z = options_.init_jitter_sd * standard_normal(static_cast<Eigen::Index>(n_particles), d, rng);
  z.rowwise() += z_hat.transpose();
  return {std::move(theta_hat), ParticleCloud(std::move(z))};
}

}  // namespace pem
