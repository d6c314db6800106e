#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fd_oracle.hpp"
#include "particle_em/models.hpp"

#include <cmath>

using namespace pem;
using pem::testing::check_gradients;

namespace {

Vector theta_of(double v) { return Vector::Constant(1, v); }

BayesLogReg random_logreg(Rng& rng, int n = 30, int d = 4) {
  const Matrix x = standard_normal(n, d, rng);
  Vector y(n);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < n; ++i) y[i] = coin(rng) ? 1.0 : 0.0;
  return BayesLogReg(x, y);
}

LatentSpaceNetwork random_network(Rng& rng, int n, LatentSpaceNetwork::Options opts = {}) {
  Matrix y = Matrix::Zero(n, n);
  std::bernoulli_distribution coin(0.4);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) y(i, j) = y(j, i) = coin(rng) ? 1.0 : 0.0;
  return LatentSpaceNetwork(y, opts);
}

// Bisection for the root of a decreasing function on [lo, hi].
template <class F>
double bisect_root(F f, double lo, double hi) {
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("numerically stable sigmoid") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(1000.0) == 1.0);
  CHECK(sigmoid(-1000.0) >= 0.0);
  CHECK(std::isfinite(log_sigmoid(-1000.0)));
  CHECK(log_sigmoid(-1000.0) == doctest::Approx(-1000.0));
  CHECK(softplus(1000.0) == 1000.0);
  CHECK(sigmoid(2.0) == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-15));
}

TEST_CASE("toy model gradients and ground truth") {
  const ToyHierarchical toy(Vector::Constant(2, 2.0));
  const Vector z = Vector::Ones(2);
  CHECK(toy.grad_theta(theta_of(0.0), z)[0] == 2.0);
  CHECK(toy.grad_theta(theta_of(1.0), z)[0] == 0.0);
  // theta = 0, z_i = 1, x_i = 2: (0 - 1) + (2 - 1) = 0
  CHECK(toy.grad_z(theta_of(0.0), z)[0] == 0.0);

  const ToyHierarchical toy3((Vector(3) << 1.0, 2.0, 3.0).finished());
  CHECK((*toy3.theta_star())[0] == 2.0);
  const auto mom = toy3.posterior_moments(2.0);
  CHECK(mom.variance == 0.5);
  CHECK(mom.mean[1] == 2.0);
  // grad_z vanishes at the posterior mean
  CHECK(toy3.grad_z(theta_of(2.0), mom.mean).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(1);
  const ToyHierarchical toy5(standard_normal(5, rng));
  for (int rep = 0; rep < 20; ++rep) {
    const auto r = check_gradients(toy5, standard_normal(1, rng), standard_normal(5, rng));
    CHECK(r.worst_theta <= 1e-5);
    CHECK(r.worst_z <= 1e-5);
  }
  CHECK_THROWS_AS(toy5.grad_z(theta_of(0.0), Vector::Zero(4)), DimensionError);
}

TEST_CASE("toy marginal M-step is the exact argmax") {
  const ToyHierarchical toy1(Vector::Zero(1));
  Matrix two(2, 1);
  two << 0.0, 4.0;
  CHECK((*toy1.marginal_mstep(ParticleCloud(two)))[0] == 2.0);

  const ToyHierarchical toy(Vector::Zero(3));
  CHECK((*toy.marginal_mstep(ParticleCloud(Matrix::Constant(4, 3, 1.75))))[0] == 1.75);

  Rng rng(8);
  for (int rep = 0; rep < 10; ++rep) {
    const ParticleCloud p(standard_normal(7, 3, rng).array() + 0.5);
    auto q = [&](double t) {
      double acc = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) acc += toy.log_joint(theta_of(t), p.particle(i));
      return acc / static_cast<double>(p.size());
    };
    const double exact = (*toy.marginal_mstep(p))[0];
    const double root = bisect_root([&](double t) { return toy.mean_grad_theta(theta_of(t), p)[0]; }, -10.0, 10.0);
    CHECK(std::abs(root - exact) <= 1e-8);
    CHECK(q(exact + 1e-3) < q(exact));
    CHECK(q(exact - 1e-3) < q(exact));
  }
}

TEST_CASE("logistic regression gradients") {
  Matrix x(1, 2);
  x << 1.0, 0.0;
  const BayesLogReg one(x, Vector::Ones(1));
  const Vector g = one.grad_z(theta_of(0.0), Vector::Zero(2));
  CHECK(g[0] == 0.5);
  CHECK(g[1] == 0.0);

  const BayesLogReg empty(Matrix(0, 3), Vector(0));
  CHECK(empty.grad_z(theta_of(1.5), Vector::Constant(3, 1.5)).cwiseAbs().maxCoeff() == 0.0);

  CHECK(one.grad_theta(theta_of(0.0), Vector::Ones(2))[0] == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(one.grad_theta(theta_of(1.0), Vector::Ones(2))[0] == 0.0);

  Rng rng(2);
  const BayesLogReg model = random_logreg(rng);
  for (int rep = 0; rep < 20; ++rep) {
    const auto r = check_gradients(model, standard_normal(1, rng), standard_normal(4, rng));
    CHECK(r.worst_theta <= 1e-5);
    CHECK(r.worst_z <= 1e-5);
  }

  SUBCASE("finite for huge weights") {
    const Vector big = Vector::Constant(4, 1e3);
    CHECK(model.grad_z(theta_of(0.0), big).allFinite());
    CHECK(model.grad_z(theta_of(0.0), -big).allFinite());
    CHECK(std::isfinite(model.log_joint(theta_of(0.0), big)));
  }

  SUBCASE("construction errors") {
    CHECK_THROWS_AS(BayesLogReg(Matrix::Zero(2, 2), Vector::Zero(3)), DimensionError);
    CHECK_THROWS(BayesLogReg(Matrix::Zero(1, 2), Vector::Constant(1, 2.0)));
  }
}

TEST_CASE("logistic regression prediction") {
  Rng rng(4);
  const BayesLogReg model = random_logreg(rng);
  const Matrix xt = standard_normal(6, 4, rng);

  const Vector p0 = model.predict_proba(ParticleCloud(Matrix::Zero(3, 4)), xt);
  CHECK((p0.array() == 0.5).all());
  CHECK((model.predict(ParticleCloud(Matrix::Zero(3, 4)), xt).array() == 1).all());

  const Matrix w = standard_normal(1, 4, rng);
  const Vector p1 = model.predict_proba(ParticleCloud(w), xt);
  for (Eigen::Index r = 0; r < xt.rows(); ++r) CHECK(p1[r] == doctest::Approx(sigmoid(xt.row(r).dot(w.row(0)))));

  // Two particles with sigma values 0.2 and 0.8 average to 0.5.
  Matrix xs(1, 1);
  xs << 1.0;
  const BayesLogReg m1(xs, Vector::Ones(1));
  Matrix pair(2, 1);
  pair << std::log(0.2 / 0.8), std::log(0.8 / 0.2);
  CHECK(m1.predict_proba(ParticleCloud(pair), xs)[0] == doctest::Approx(0.5).epsilon(1e-15));

  CHECK_THROWS_AS(model.predict_proba(ParticleCloud(Matrix::Zero(2, 3)), xt), DimensionError);
}

TEST_CASE("latent space network") {
  SUBCASE("two nodes at the same point") {
    Matrix y(2, 2);
    y << 0, 1, 1, 0;
    const LatentSpaceNetwork net(y);
    const Vector z = Vector::Constant(4, 0.3);
    CHECK(net.grad_theta(theta_of(0.7), z)[0] == doctest::Approx(1.0 - sigmoid(0.7)).epsilon(1e-15));
    CHECK(net.grad_z(theta_of(0.7), z).allFinite());
    // saturation: p -> 1 so the gradient approaches sum(Y - 1) <= 0
    CHECK(net.grad_theta(theta_of(50.0), z)[0] == doctest::Approx(0.0).epsilon(1e-12));
    Matrix y0 = Matrix::Zero(2, 2);
    CHECK(LatentSpaceNetwork(y0).grad_theta(theta_of(50.0), z)[0] == doctest::Approx(-1.0));
  }

  SUBCASE("finite differences on random 5-node networks") {
    Rng rng(12);
    for (double sign : {-1.0, 1.0}) {
      LatentSpaceNetwork::Options opts;
      opts.link_sign = sign;
      const LatentSpaceNetwork net = random_network(rng, 5, opts);
      for (int rep = 0; rep < 20; ++rep) {
        const auto r = check_gradients(net, standard_normal(1, rng), standard_normal(10, rng));
        CHECK(r.worst_theta <= 1e-5);
        CHECK(r.worst_z <= 1e-5);
      }
    }
    LatentSpaceNetwork::Options flat;
    flat.prior_var_z = std::numeric_limits<double>::infinity();
    const LatentSpaceNetwork mle = random_network(rng, 5, flat);
    const auto r = check_gradients(mle, standard_normal(1, rng), standard_normal(10, rng));
    CHECK(r.worst_z <= 1e-5);
  }

  SUBCASE("rotation equivariance") {
    Rng rng(13);
    const LatentSpaceNetwork net = random_network(rng, 6);
    const Vector theta = theta_of(0.4);
    const Vector z = standard_normal(12, rng);
    const double a = 0.83;
    Eigen::Matrix2d rot;
    rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    const Matrix e = net.embedding(z);
    const Matrix er = e * rot.transpose();
    const Vector zr = Eigen::Map<const Vector>(er.data(), er.size());

    const Matrix g = net.embedding(net.grad_z(theta, z));
    const Matrix gr = net.embedding(net.grad_z(theta, zr));
    CHECK((gr - g * rot.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(net.grad_theta(theta, zr)[0] == doctest::Approx(net.grad_theta(theta, z)[0]).epsilon(1e-12));
  }

  SUBCASE("construction errors") {
    Matrix asym = Matrix::Zero(3, 3);
    asym(0, 1) = 1.0;
    CHECK_THROWS(LatentSpaceNetwork(asym));
    Matrix loop = Matrix::Zero(3, 3);
    loop(1, 1) = 1.0;
    CHECK_THROWS(LatentSpaceNetwork(loop));
  }

  SUBCASE("initialization is jittered around the MLE") {
    Rng rng(21);
    const LatentSpaceNetwork net = random_network(rng, 6);
    Rng init_rng(5);
    const Initialization init = net.initialize(40, init_rng);
    CHECK(init.particles.size() == 40);
    CHECK(init.particles.dim() == 12);
    CHECK(init.theta.allFinite());
    const Vector sd = ((init.particles.positions().rowwise() - init.particles.mean().transpose())
                           .array()
                           .square()
                           .colwise()
                           .sum() /
                       39.0)
                          .sqrt()
                          .transpose();
    CHECK(sd.mean() == doctest::Approx(std::sqrt(0.1)).epsilon(0.15));
  }
}
