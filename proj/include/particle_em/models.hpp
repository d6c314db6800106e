#pragma once

#include "particle_em/types.hpp"

#include <limits>
#include <optional>
#include <string_view>

namespace pem {

/// Starting point (theta_0, z_0^{1:N}) of an optimization run.
struct Initialization {
  Vector theta;
  ParticleCloud particles;
};

/// A latent variable model through its unnormalized joint density
/// pi_theta(z) = p_theta(z, x), with the data x baked into the instance.
///
/// Implementations are immutable after construction and every method is
/// reentrant, so one model can be shared by concurrent runs.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t theta_dim() const = 0;
  virtual std::size_t latent_dim() const = 0;

  /// log pi_theta(z) up to an additive constant independent of (theta, z).
  virtual double log_joint(const Vector& theta, VectorRef z) const = 0;
  virtual Vector grad_theta(const Vector& theta, VectorRef z) const = 0;
  virtual Vector grad_z(const Vector& theta, VectorRef z) const = 0;

  /// Exact argmax over theta of (1/N) sum_i log pi_theta(z^i), when available in closed form.
  virtual std::optional<Vector> marginal_mstep(const ParticleCloud& particles) const;

  /// Marginal maximum likelihood estimate, when known in closed form.
  virtual std::optional<Vector> theta_star() const;

  /// Default initialization for an N-particle run.
  virtual Initialization initialize(std::size_t n_particles, Rng& rng) const = 0;

  /// (1/N) sum_j grad_theta(theta, z^j), summed in particle order.
  Vector mean_grad_theta(const Vector& theta, const ParticleCloud& particles) const;

  /// Row j holds grad_z(theta, z^j). Rows are evaluated in parallel.
  Matrix grad_z_all(const Vector& theta, const ParticleCloud& particles) const;

 protected:
  void check_latent(VectorRef z) const;
  void check_theta(const Vector& theta) const;
};

/// log sigma(u), computed without overflow for any finite u.
double log_sigmoid(double u);
/// sigma(u) = exp(log_sigmoid(u)).
double sigmoid(double u);
/// log(1 + e^u).
double softplus(double u);

/// z_i ~ N(theta, 1), x_i | z_i ~ N(z_i, 1), i = 1..d.
class ToyHierarchical final : public Model {
 public:
  explicit ToyHierarchical(Vector x);

  std::string_view name() const override { return "toy"; }
  std::size_t theta_dim() const override { return 1; }
  std::size_t latent_dim() const override { return static_cast<std::size_t>(x_.size()); }

  double log_joint(const Vector& theta, VectorRef z) const override;
  Vector grad_theta(const Vector& theta, VectorRef z) const override;
  Vector grad_z(const Vector& theta, VectorRef z) const override;
  std::optional<Vector> marginal_mstep(const ParticleCloud& particles) const override;
  std::optional<Vector> theta_star() const override;
  /// theta_0 ~ N(0, 0.1^2), z_0 ~ N(0, I).
  Initialization initialize(std::size_t n_particles, Rng& rng) const override;

  struct PosteriorMoments {
    Vector mean;
    double variance;
  };
  /// p_theta(z | x) factorizes as N((theta + x_i)/2, 1/2).
  PosteriorMoments posterior_moments(double theta) const;

  const Vector& data() const { return x_; }

 private:
  Vector x_;
};

/// Logistic regression with weights z ~ N(theta * 1, prior_var * I) and
/// y_i | z ~ Bernoulli(sigma(x_i^T z)).
class BayesLogReg final : public Model {
 public:
  static constexpr double kPriorVariance = 5.0;

  BayesLogReg(Matrix features, Vector labels, double prior_var = kPriorVariance);

  std::string_view name() const override { return "logreg"; }
  std::size_t theta_dim() const override { return 1; }
  std::size_t latent_dim() const override { return static_cast<std::size_t>(features_.cols()); }

  double log_joint(const Vector& theta, VectorRef z) const override;
  Vector grad_theta(const Vector& theta, VectorRef z) const override;
  Vector grad_z(const Vector& theta, VectorRef z) const override;
  /// The theta-dependent part is the Gaussian prior only, so the M-step is the grand mean.
  std::optional<Vector> marginal_mstep(const ParticleCloud& particles) const override;
  /// theta_0 = 0, z_0 ~ N(0, I).
  Initialization initialize(std::size_t n_particles, Rng& rng) const override;

  /// Posterior-predictive probability (1/N) sum_i sigma(x^T z^i) for each row of `features`.
  Vector predict_proba(const ParticleCloud& particles, const Matrix& features) const;
  /// 1 where predict_proba >= 0.5.
  Eigen::VectorXi predict(const ParticleCloud& particles, const Matrix& features) const;

  double prior_variance() const { return prior_var_; }

 private:
  Matrix features_;
  Vector labels_;
  double prior_var_;
};

/// Latent space model for an undirected binary network:
/// logit p_ij = theta + link_sign * ||z_i - z_j||, z_i ~ N(0, prior_var_z * I).
/// The latent vector stacks node embeddings, z = (z_1, ..., z_n), each of size embed_dim.
class LatentSpaceNetwork final : public Model {
 public:
  struct Options {
    std::size_t embed_dim = 2;
    /// Infinity drops the prior term.
    double prior_var_z = 1.0;
    /// -1: closer nodes link more. +1 flips the sign of the distance term.
    double link_sign = -1.0;
    /// Gradient ascent used by initialize() to find the MLE starting point.
    std::size_t mle_iterations = 2000;
    double mle_step = 1e-2;
    /// Standard deviation of the particle jitter around the MLE embedding.
    double init_jitter_sd = 0.316227766016838;  // sqrt(0.1)
  };

  explicit LatentSpaceNetwork(Matrix adjacency);
  LatentSpaceNetwork(Matrix adjacency, Options options);

  std::string_view name() const override { return "network"; }
  std::size_t theta_dim() const override { return 1; }
  std::size_t latent_dim() const override { return n_ * options_.embed_dim; }

  double log_joint(const Vector& theta, VectorRef z) const override;
  Vector grad_theta(const Vector& theta, VectorRef z) const override;
  Vector grad_z(const Vector& theta, VectorRef z) const override;
  /// theta_0 = theta_hat and z_0^i ~ N(z_hat, jitter^2), with (theta_hat, z_hat)
  /// from deterministic gradient ascent on log_joint.
  Initialization initialize(std::size_t n_particles, Rng& rng) const override;

  /// Joint gradient ascent on log_joint from theta = 0 and the given start.
  std::pair<Vector, Vector> maximize_log_joint(Vector z_start) const;

  std::size_t nodes() const { return n_; }
  const Options& options() const { return options_; }
  const Matrix& adjacency() const { return adjacency_; }

  /// n x embed_dim view of a stacked latent vector.
  Matrix embedding(VectorRef z) const;

 private:
  Matrix adjacency_;
  Options options_;
  std::size_t n_;
};

}  // namespace pem
