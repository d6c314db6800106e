#include "particle_em/algorithms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <utility>

namespace pem {

namespace {

constexpr std::array<std::pair<Algorithm, std::string_view>, 6> kAlgorithmNames{{
    {Algorithm::svgd_em, "svgd_em"},
    {Algorithm::coin_em, "coin_em"},
    {Algorithm::adaptive_coin_em, "adaptive_coin_em"},
    {Algorithm::marginal_svgd_em, "marginal_svgd_em"},
    {Algorithm::marginal_coin_em, "marginal_coin_em"},
    {Algorithm::pgd, "pgd"},
}};

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) {
    if (!out.empty()) out += "; ";
    out += p;
  }
  return out;
}

void require_finite(const Vector& theta, const ParticleCloud& particles, std::size_t iteration) {
  if (!theta.allFinite()) throw DivergedError(iteration, "theta became non-finite");
  if (!particles.all_finite()) throw DivergedError(iteration, "particles became non-finite");
}

Vector require_mstep(const Model& model, const ParticleCloud& particles) {
  auto theta = model.marginal_mstep(particles);
  if (!theta) throw MissingMStepError(model.name());
  return *std::move(theta);
}

/// Stein direction for every particle at parameter `theta`.
Matrix stein_at(const Model& model, const Vector& theta, const ParticleCloud& particles,
                const BandwidthPolicy& bandwidth) {
  const Matrix grads = model.grad_z_all(theta, particles);
  return kernels::stein_direction(particles, grads, bandwidth.select(particles));
}

/// KT update of the particles given the round's Stein directions `phi`.
void kt_particle_round(BettingState& next, const ParticleCloud& current, const Matrix& phi) {
  const Matrix& z = current.positions();
  const Matrix& z0 = next.z0.positions();
  for (Eigen::Index i = 0; i < phi.rows(); ++i) {
    next.sum_grad_z.row(i) += phi.row(i);
    next.reward_z[i] += phi.row(i).dot(z.row(i) - z0.row(i));
  }
  const double rounds = static_cast<double>(next.t);
  Matrix moved = z0;
  for (Eigen::Index i = 0; i < moved.rows(); ++i) {
    moved.row(i) += next.sum_grad_z.row(i) / rounds * (1.0 + next.reward_z[i]);
  }
  next.particles.positions() = std::move(moved);
}

struct AdaptiveSlots {
  std::span<const double> outcome;
  std::span<const double> origin;
  std::span<double> value;
  std::span<double> sum;
  std::span<double> max_scale;
  std::span<double> abs_sum;
  std::span<double> reward;
};

/// One round of per-coordinate adaptive KT betting; `value` holds x_{t-1} on
/// entry and x_t on exit.
void adaptive_bet(const AdaptiveSlots& s, Denominator denominator) {
  for (std::size_t k = 0; k < s.value.size(); ++k) {
    const double c = s.outcome[k];
    s.max_scale[k] = std::max(s.max_scale[k], std::abs(c));
    s.abs_sum[k] += std::abs(c);
    s.reward[k] = std::max(s.reward[k] + c * (s.value[k] - s.origin[k]), 0.0);
    s.sum[k] += c;

    const double scale = s.max_scale[k];
    if (scale == 0.0) {
      s.value[k] = s.origin[k];
      continue;
    }
    double denom = s.abs_sum[k] + scale;
    if (denominator == Denominator::bnn) denom = std::max(denom, 100.0 * scale);
    s.value[k] = s.origin[k] + s.sum[k] / denom * (1.0 + s.reward[k] / scale);
  }
}

template <class Dense>
std::span<double> span_of(Dense& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <class Dense>
std::span<const double> cspan_of(const Dense& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  for (const auto& [a, name] : kAlgorithmNames) {
    if (a == algorithm) return name;
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  for (const auto& [a, n] : kAlgorithmNames) {
    if (n == name) return a;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(name) + "'");
}

bool uses_learning_rate(Algorithm algorithm) {
  return algorithm == Algorithm::svgd_em || algorithm == Algorithm::marginal_svgd_em || algorithm == Algorithm::pgd;
}

DivergedError::DivergedError(std::size_t iteration, const std::string& what)
    : std::runtime_error("diverged at iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}

MissingMStepError::MissingMStepError(std::string_view model)
    : std::logic_error("model '" + std::string(model) + "' has no closed-form M-step") {}

ConfigError::ConfigError(std::vector<std::string> violations)
    : std::invalid_argument("invalid configuration: " + join(violations)), violations_(std::move(violations)) {}

BettingState BettingState::start(Vector theta0, ParticleCloud z0) {
  const auto n = static_cast<Eigen::Index>(z0.size());
  const auto d = static_cast<Eigen::Index>(z0.dim());
  const auto p = theta0.size();
  return BettingState{theta0,
                      z0,
                      theta0,
                      z0,
                      Vector::Zero(p),
                      0.0,
                      Matrix::Zero(n, d),
                      Vector::Zero(n),
                      0};
}

AdaptiveBettingState AdaptiveBettingState::start(Vector theta0, ParticleCloud z0) {
  const auto n = static_cast<Eigen::Index>(z0.size());
  const auto d = static_cast<Eigen::Index>(z0.dim());
  const auto p = theta0.size();
  return AdaptiveBettingState{theta0,
                              z0,
                              theta0,
                              z0,
                              Vector::Zero(p),
                              Vector::Zero(p),
                              Vector::Zero(p),
                              Vector::Zero(p),
                              Matrix::Zero(n, d),
                              Matrix::Zero(n, d),
                              Matrix::Zero(n, d),
                              Matrix::Zero(n, d),
                              0};
}

SvgdEmState svgd_em_step(const SvgdEmState& state, const Model& model, const BandwidthPolicy& bandwidth) {
  SvgdEmState next = state;
  next.t = state.t + 1;
  next.theta = state.theta + state.gamma * model.mean_grad_theta(state.theta, state.particles);
  const Matrix phi = stein_at(model, next.theta, state.particles, bandwidth);
  next.particles.positions() = state.particles.positions() + state.gamma * phi;
  require_finite(next.theta, next.particles, next.t);
  return next;
}

BettingState coin_em_step(const BettingState& state, const Model& model, const BandwidthPolicy& bandwidth,
                          CoinOrdering ordering) {
  BettingState next = state;
  next.t = state.t + 1;
  if (state.t == 0) return next;

  const Vector g = model.mean_grad_theta(state.theta, state.particles);
  next.sum_grad_theta += g;
  next.reward_theta += g.dot(state.theta - state.theta0);
  next.theta = state.theta0 + next.sum_grad_theta / static_cast<double>(next.t) * (1.0 + next.reward_theta);

  const Vector& theta_for_z = ordering == CoinOrdering::updated_theta ? next.theta : state.theta;
  const Matrix phi = stein_at(model, theta_for_z, state.particles, bandwidth);
  kt_particle_round(next, state.particles, phi);
  require_finite(next.theta, next.particles, next.t);
  return next;
}

AdaptiveBettingState adaptive_coin_em_step(const AdaptiveBettingState& state, const Model& model,
                                           const BandwidthPolicy& bandwidth, Denominator denominator,
                                           CoinOrdering ordering) {
  AdaptiveBettingState next = state;
  next.t = state.t + 1;

  const Vector g = model.mean_grad_theta(state.theta, state.particles);
  adaptive_bet({cspan_of(g), cspan_of(state.theta0), span_of(next.theta), span_of(next.sum_grad_theta),
                span_of(next.max_scale_theta), span_of(next.abs_sum_theta), span_of(next.reward_theta)},
               denominator);

  const Vector& theta_for_z = ordering == CoinOrdering::updated_theta ? next.theta : state.theta;
  const Matrix phi = stein_at(model, theta_for_z, state.particles, bandwidth);
  adaptive_bet({cspan_of(phi), cspan_of(state.z0.positions()), span_of(next.particles.positions()),
                span_of(next.sum_grad_z), span_of(next.max_scale_z), span_of(next.abs_sum_z),
                span_of(next.reward_z)},
               denominator);

  require_finite(next.theta, next.particles, next.t);
  return next;
}

SvgdEmState marginal_svgd_em_step(const SvgdEmState& state, const Model& model, const BandwidthPolicy& bandwidth) {
  SvgdEmState next = state;
  next.t = state.t + 1;
  const Vector theta = require_mstep(model, state.particles);
  const Matrix phi = stein_at(model, theta, state.particles, bandwidth);
  next.particles.positions() = state.particles.positions() + state.gamma * phi;
  next.theta = require_mstep(model, next.particles);
  require_finite(next.theta, next.particles, next.t);
  return next;
}

BettingState marginal_coin_em_step(const BettingState& state, const Model& model, const BandwidthPolicy& bandwidth) {
  BettingState next = state;
  next.t = state.t + 1;
  const Vector theta = require_mstep(model, state.particles);
  if (state.t > 0) {
    const Matrix phi = stein_at(model, theta, state.particles, bandwidth);
    kt_particle_round(next, state.particles, phi);
  }
  next.theta = require_mstep(model, next.particles);
  require_finite(next.theta, next.particles, next.t);
  return next;
}

SvgdEmState pgd_step(const SvgdEmState& state, const Model& model, Rng& rng, double noise_scale) {
  SvgdEmState next = state;
  next.t = state.t + 1;
  next.theta = state.theta + state.gamma * model.mean_grad_theta(state.theta, state.particles);

  const Matrix grads = model.grad_z_all(state.theta, state.particles);
  const auto& z = state.particles.positions();
  const Matrix noise = standard_normal(z.rows(), z.cols(), rng);
  next.particles.positions() = z + state.gamma * grads + (noise_scale * std::sqrt(2.0 * state.gamma)) * noise;
  require_finite(next.theta, next.particles, next.t);
  return next;
}

// ---------------------------------------------------------------------------
// run

void validate(const RunConfig& config, const Model& model) {
  std::vector<std::string> violations;
  const bool needs_gamma = uses_learning_rate(config.algorithm);
  const std::string alg(to_string(config.algorithm));
  if (needs_gamma && !config.gamma) violations.push_back("gamma is required for " + alg);
  if (!needs_gamma && config.gamma) violations.push_back("gamma forbidden for coin algorithms (" + alg + ")");
  if (config.gamma && (!(*config.gamma > 0.0) || !std::isfinite(*config.gamma))) {
    violations.push_back("gamma must be positive and finite");
  }
  if (config.particles == 0 && !config.init) violations.push_back("particle count must be at least 1");
  if (config.record_every == 0) violations.push_back("record_every must be at least 1");
  if (config.init) {
    if (static_cast<std::size_t>(config.init->theta.size()) != model.theta_dim()) {
      violations.push_back("initial theta has the wrong dimension");
    }
    if (config.init->particles.dim() != model.latent_dim()) {
      violations.push_back("initial particles have the wrong dimension");
    }
  }
  if (!violations.empty()) throw ConfigError(std::move(violations));
  if ((config.algorithm == Algorithm::marginal_svgd_em || config.algorithm == Algorithm::marginal_coin_em) &&
      !model.marginal_mstep(ParticleCloud(Matrix::Zero(1, static_cast<Eigen::Index>(model.latent_dim()))))) {
    throw MissingMStepError(model.name());
  }
}

namespace {

class Recorder {
 public:
  Recorder(const RunConfig& config) : config_(config) {}

  void visit(std::size_t t, const Vector& theta, const ParticleCloud& particles) {
    if (config_.observer) config_.observer(t, theta, particles);
    if (t % config_.record_every != 0 && t != config_.iterations) return;
    TraceRecord record{t, theta, particles.mean(), {}};
    for (const auto& hook : config_.metrics) record.metrics[hook.name] = hook.evaluate(theta, particles);
    trace_.records.push_back(std::move(record));
  }

  Trace take() { return std::move(trace_); }

 private:
  const RunConfig& config_;
  Trace trace_;
};

template <class State, class Step>
Trace drive(State state, Step&& step, const RunConfig& config) {
  Recorder recorder(config);
  recorder.visit(0, state.theta, state.particles);
  for (std::size_t t = 1; t <= config.iterations; ++t) {
    try {
      state = step(state);
    } catch (DivergedError& e) {
      e.attach(recorder.take());
      throw;
    }
    recorder.visit(t, state.theta, state.particles);
  }
  return recorder.take();
}

}  // namespace

Trace run(const Model& model, const RunConfig& config) {
  validate(config, model);

  Rng rng(config.seed);
  Initialization init = config.init ? *config.init : model.initialize(config.particles, rng);

  BandwidthPolicy bandwidth;
  if (config.fixed_bandwidth) {
    bandwidth.fixed = config.fixed_bandwidth;
  } else if (config.freeze_bandwidth) {
    bandwidth.fixed = kernels::median_heuristic(init.particles);
  }

  const double gamma = config.gamma.value_or(0.0);
  switch (config.algorithm) {
    case Algorithm::svgd_em:
      return drive(SvgdEmState{init.theta, init.particles, gamma, 0},
                   [&](const SvgdEmState& s) { return svgd_em_step(s, model, bandwidth); }, config);
    case Algorithm::marginal_svgd_em: {
      Vector theta = require_mstep(model, init.particles);
      return drive(SvgdEmState{std::move(theta), init.particles, gamma, 0},
                   [&](const SvgdEmState& s) { return marginal_svgd_em_step(s, model, bandwidth); }, config);
    }
    case Algorithm::pgd:
      return drive(SvgdEmState{init.theta, init.particles, gamma, 0},
                   [&](const SvgdEmState& s) { return pgd_step(s, model, rng); }, config);
    case Algorithm::coin_em:
      return drive(BettingState::start(init.theta, init.particles),
                   [&](const BettingState& s) { return coin_em_step(s, model, bandwidth, config.ordering); }, config);
    case Algorithm::marginal_coin_em: {
      Vector theta = require_mstep(model, init.particles);
      return drive(BettingState::start(std::move(theta), init.particles),
                   [&](const BettingState& s) { return marginal_coin_em_step(s, model, bandwidth); }, config);
    }
    case Algorithm::adaptive_coin_em:
      return drive(AdaptiveBettingState::start(init.theta, init.particles),
                   [&](const AdaptiveBettingState& s) {
                     return adaptive_coin_em_step(s, model, bandwidth, config.denominator, config.ordering);
                   },
                   config);
  }
  throw std::logic_error("unhandled algorithm");
}

}  // namespace pem
