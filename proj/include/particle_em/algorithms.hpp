#pragma once

#include "particle_em/kernels.hpp"
#include "particle_em/models.hpp"
#include "particle_em/types.hpp"

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pem {

enum class Algorithm { svgd_em, coin_em, adaptive_coin_em, marginal_svgd_em, marginal_coin_em, pgd };

std::string_view to_string(Algorithm algorithm);
/// Throws std::invalid_argument for unknown names.
Algorithm parse_algorithm(std::string_view name);
/// True for the algorithms that take a learning rate (SVGD EM, its marginal variant, PGD).
bool uses_learning_rate(Algorithm algorithm);

/// Which theta the particle gradients see within one coin-betting round.
enum class CoinOrdering {
  updated_theta,   // grad_z log pi_{theta_{t+1}}(z_t)
  previous_theta,  // grad_z log pi_{theta_t}(z_t)
};

/// Denominator of the adaptive betting fraction: G + L, or max(G + L, 100 L).
enum class Denominator { standard, bnn };

struct BandwidthPolicy {
  std::optional<Bandwidth> fixed;

  Bandwidth select(const ParticleCloud& particles) const {
    return fixed ? *fixed : kernels::median_heuristic(particles);
  }
};

// ---------------------------------------------------------------------------
// Trace

struct TraceRecord {
  std::size_t iteration = 0;
  Vector theta;
  Vector particle_mean;
  std::map<std::string, double> metrics;
};

struct Trace {
  std::vector<TraceRecord> records;
};

/// A NaN or infinity appeared in the state.
class DivergedError : public std::runtime_error {
 public:
  DivergedError(std::size_t iteration, const std::string& what);

  std::size_t iteration() const { return iteration_; }
  /// Records collected before divergence, when raised from run().
  const Trace& partial_trace() const { return partial_; }
  void attach(Trace partial) { partial_ = std::move(partial); }

 private:
  std::size_t iteration_;
  Trace partial_;
};

class MissingMStepError : public std::logic_error {
 public:
  explicit MissingMStepError(std::string_view model);
};

class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// ---------------------------------------------------------------------------
// States

/// Shared by SVGD EM, marginal SVGD EM and PGD.
struct SvgdEmState {
  Vector theta;
  ParticleCloud particles;
  double gamma;
  std::size_t t = 0;
};

/// Krichevsky-Trofimov betting over theta and over every particle.
struct BettingState {
  Vector theta0;
  ParticleCloud z0;
  Vector theta;
  ParticleCloud particles;
  Vector sum_grad_theta;
  double reward_theta = 0.0;
  Matrix sum_grad_z;  // row i: sum of observed Stein directions of particle i
  Vector reward_z;    // entry i: sum of <phi_s^i, z_s^i - z_0^i>
  std::size_t t = 0;

  static BettingState start(Vector theta0, ParticleCloud z0);
};

/// Per-coordinate adaptive betting: max observed scale L, absolute sum G and
/// clipped reward R, kept separately for theta and every particle coordinate.
struct AdaptiveBettingState {
  Vector theta0;
  ParticleCloud z0;
  Vector theta;
  ParticleCloud particles;

  Vector sum_grad_theta;
  Vector max_scale_theta;
  Vector abs_sum_theta;
  Vector reward_theta;

  Matrix sum_grad_z;
  Matrix max_scale_z;
  Matrix abs_sum_z;
  Matrix reward_z;

  std::size_t t = 0;

  static AdaptiveBettingState start(Vector theta0, ParticleCloud z0);
};

// ---------------------------------------------------------------------------
// Steppers. Each is a pure transition: the same input state gives the same output.

SvgdEmState svgd_em_step(const SvgdEmState& state, const Model& model, const BandwidthPolicy& bandwidth);

/// The first call returns the initialization unchanged (empty betting history);
/// observations start from the second call.
BettingState coin_em_step(const BettingState& state, const Model& model, const BandwidthPolicy& bandwidth,
                          CoinOrdering ordering = CoinOrdering::updated_theta);

AdaptiveBettingState adaptive_coin_em_step(const AdaptiveBettingState& state, const Model& model,
                                           const BandwidthPolicy& bandwidth,
                                           Denominator denominator = Denominator::standard,
                                           CoinOrdering ordering = CoinOrdering::updated_theta);

/// theta = M-step(z_t), SVGD move at that theta, then theta = M-step(z_{t+1}).
SvgdEmState marginal_svgd_em_step(const SvgdEmState& state, const Model& model, const BandwidthPolicy& bandwidth);

/// Coin-betting particle recursion with theta = M-step(particles) throughout.
BettingState marginal_coin_em_step(const BettingState& state, const Model& model, const BandwidthPolicy& bandwidth);

/// Euler-Maruyama step of the joint theta-drift / latent Langevin dynamics.
/// `noise_scale` = 0 gives the deterministic Euler step.
SvgdEmState pgd_step(const SvgdEmState& state, const Model& model, Rng& rng, double noise_scale = 1.0);

// ---------------------------------------------------------------------------
// Run loop

struct MetricHook {
  std::string name;
  std::function<double(const Vector& theta, const ParticleCloud& particles)> evaluate;
};

struct RunConfig {
  Algorithm algorithm = Algorithm::adaptive_coin_em;
  std::size_t particles = 10;
  std::size_t iterations = 0;
  std::optional<double> gamma;
  std::uint64_t seed = 0;
  std::size_t record_every = 1;
  /// Overrides the model's default initialization (its particle count wins over `particles`).
  std::optional<Initialization> init;
  std::optional<Bandwidth> fixed_bandwidth;
  /// Compute the median-heuristic bandwidth once from z_0 and keep it.
  bool freeze_bandwidth = false;
  CoinOrdering ordering = CoinOrdering::updated_theta;
  Denominator denominator = Denominator::standard;
  std::vector<MetricHook> metrics;
  /// Called with every iterate, including iteration 0.
  std::function<void(std::size_t iteration, const Vector& theta, const ParticleCloud& particles)> observer;
};

/// Throws ConfigError when the learning rate is missing, forbidden or invalid.
void validate(const RunConfig& config, const Model& model);

/// Runs `config.iterations` steps. Records iteration 0, every `record_every`
/// iterations, and the last iteration. Throws DivergedError with the partial trace.
Trace run(const Model& model, const RunConfig& config);

}  // namespace pem
