#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "particle_em/metrics.hpp"

#include <cmath>

using namespace pem;
using namespace pem::metrics;

TEST_CASE("mse") {
  const Vector a = (Vector(2) << 1.0, 2.0).finished();
  CHECK(mse(a, a) == 0.0);
  const Vector b = (Vector(2) << 0.0, 0.0).finished();
  CHECK(mse(a, b) == 2.5);
  CHECK(mse(b, a) == mse(a, b));
  CHECK_THROWS_AS(mse(a, Vector::Zero(3)), DimensionError);
}

TEST_CASE("particle moments") {
  Matrix z(2, 1);
  z << 0.0, 2.0;
  const Moments m = particle_moments(ParticleCloud(z));
  CHECK(m.mean[0] == 1.0);
  CHECK(m.variance[0] == 2.0);

  Rng rng(1);
  const Matrix r = standard_normal(50, 3, rng);
  const Moments mr = particle_moments(ParticleCloud(r));
  for (Eigen::Index c = 0; c < 3; ++c) {
    double s = 0.0, s2 = 0.0;
    for (Eigen::Index i = 0; i < 50; ++i) s += r(i, c);
    const double mean = s / 50.0;
    for (Eigen::Index i = 0; i < 50; ++i) s2 += (r(i, c) - mean) * (r(i, c) - mean);
    CHECK(mr.mean[c] == doctest::Approx(mean).epsilon(1e-14));
    CHECK(mr.variance[c] == doctest::Approx(s2 / 49.0).epsilon(1e-14));
  }

  CHECK_THROWS_AS(particle_moments(ParticleCloud(Matrix::Zero(1, 2))), std::invalid_argument);
}

TEST_CASE("test error") {
  Eigen::VectorXi p(4), t(4);
  p << 1, 0, 1, 1;
  t << 1, 0, 0, 1;
  CHECK(test_error(p, t) == 0.25);
  CHECK(test_error(t, t) == 0.0);
  CHECK_THROWS_AS(test_error(p, Eigen::VectorXi::Zero(3)), DimensionError);
}

TEST_CASE("procrustes alignment") {
  Rng rng(2);
  const Matrix ref = standard_normal(8, 2, rng);

  SUBCASE("identity on identical inputs") {
    const Alignment a = procrustes_align(ref, ref);
    CHECK((a.aligned - ref).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((a.rotation - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("recovers a known rotation") {
    const double ang = 1.1;
    Matrix rot(2, 2);
    rot << std::cos(ang), -std::sin(ang), std::sin(ang), std::cos(ang);
    const Matrix target = ref * rot.transpose();
    const Alignment a = procrustes_align(ref, target);
    CHECK((a.aligned - ref).cwiseAbs().maxCoeff() <= 1e-12);
  }

  SUBCASE("rotation is orthogonal and never increases the residual") {
    for (int rep = 0; rep < 10; ++rep) {
      const Matrix target = standard_normal(8, 3, rng);
      const Matrix r3 = standard_normal(8, 3, rng);
      const Alignment a = procrustes_align(r3, target);
      CHECK((a.rotation * a.rotation.transpose() - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((a.aligned - target * a.rotation.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((r3 - a.aligned).norm() <= (r3 - target).norm() + 1e-12);
    }
  }

  SUBCASE("zero cross-covariance keeps the target") {
    const Alignment a = procrustes_align(Matrix::Zero(4, 2), ref.topRows(4));
    CHECK(a.rotation == Matrix::Identity(2, 2));
    CHECK(a.aligned == ref.topRows(4));
  }

  CHECK_THROWS_AS(procrustes_align(ref, Matrix::Zero(7, 2)), DimensionError);
}
