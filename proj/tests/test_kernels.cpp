#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "particle_em/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

using namespace pem;
using pem::kernels::median_heuristic;
using pem::kernels::pairwise_sq_dists;
using pem::kernels::rbf_matrix;
using pem::kernels::stein_direction;

namespace {

ParticleCloud cloud_1d(std::initializer_list<double> xs) {
  Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
  Eigen::Index i = 0;
  for (double x : xs) m(i++, 0) = x;
  return ParticleCloud(m);
}

// Independent oracle: plain nested loops over std::vector, no Eigen row arithmetic.
std::vector<std::vector<double>> naive_stein(const Matrix& z, const Matrix& g, double h) {
  const auto n = static_cast<std::size_t>(z.rows());
  const auto d = static_cast<std::size_t>(z.cols());
  std::vector<std::vector<double>> phi(n, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double r2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = z(j, c) - z(i, c);
        r2 += diff * diff;
      }
      const double k = std::exp(-r2 / h);
      for (std::size_t c = 0; c < d; ++c) {
        // grad wrt z_j of exp(-|z_j - z_i|^2 / h) = -2/h (z_j - z_i) k
        const double dk = -2.0 / h * (z(j, c) - z(i, c)) * k;
        phi[i][c] += (k * g(j, c) + dk) / static_cast<double>(n);
      }
    }
  }
  return phi;
}

double brute_median_bandwidth(const Matrix& z) {
  std::vector<double> d;
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = i + 1; j < z.rows(); ++j) d.push_back((z.row(i) - z.row(j)).norm());
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  const double med = m % 2 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
  return med * med / std::log(static_cast<double>(z.rows()));
}

}  // namespace

TEST_CASE("pairwise_sq_dists small cases") {
  CHECK(pairwise_sq_dists(cloud_1d({0.0}))(0, 0) == 0.0);

  const Matrix d = pairwise_sq_dists(cloud_1d({0.0, 2.0}));
  CHECK(d(0, 0) == 0.0);
  CHECK(d(0, 1) == 4.0);
  CHECK(d(1, 0) == 4.0);

  Matrix z(2, 2);
  z << 0, 0, 3, 4;
  CHECK(pairwise_sq_dists(ParticleCloud(z))(0, 1) == 25.0);
}

TEST_CASE("empty clouds are rejected") {
  CHECK_THROWS_AS(ParticleCloud(Matrix(0, 3)), DimensionError);
  CHECK_THROWS_AS(ParticleCloud(Matrix(3, 0)), DimensionError);
}

TEST_CASE("median heuristic") {
  CHECK(median_heuristic(cloud_1d({5.0})).value() == 1.0);
  CHECK(median_heuristic(cloud_1d({2.0, 2.0, 2.0})).value() == 1.0);
  CHECK(median_heuristic(cloud_1d({0.0, 1.0, 3.0})).value() == doctest::Approx(3.6409569065073493).epsilon(1e-15));

  SUBCASE("even number of distances averages the middle pair") {
    // N = 4 gives 6 distances: {1, 2, 3, 1, 2, 1} -> sorted 1 1 1 2 2 3, med = 1.5
    const auto h = median_heuristic(cloud_1d({0.0, 1.0, 2.0, 3.0}));
    CHECK(h.value() == doctest::Approx(2.25 / std::log(4.0)).epsilon(1e-15));
  }

  SUBCASE("matches brute-force sort on random clouds") {
    Rng rng(7);
    for (int rep = 0; rep < 20; ++rep) {
      const Matrix z = standard_normal(2 + rep, 3, rng);
      CHECK(median_heuristic(ParticleCloud(z)).value() == doctest::Approx(brute_median_bandwidth(z)).epsilon(1e-14));
    }
  }

  SUBCASE("translation and permutation invariance") {
    // Dyadic coordinates keep the translated differences exact.
    Matrix z(5, 2);
    z << 0, 0, 0.5, 1, 2, -1, -1.25, 0.75, 3, 3;
    const double h = median_heuristic(ParticleCloud(z)).value();
    Matrix shifted = z;
    shifted.rowwise() += Eigen::RowVector2d(8.0, -4.0);
    CHECK(median_heuristic(ParticleCloud(shifted)).value() == h);

    Matrix permuted = z;
    permuted.row(0) = z.row(3);
    permuted.row(3) = z.row(0);
    CHECK(median_heuristic(ParticleCloud(permuted)).value() == h);

    Rng rng(11);
    const Matrix r = standard_normal(17, 4, rng);
    Matrix rs = r;
    rs.rowwise() += Eigen::RowVectorXd::Constant(4, 3.7);
    CHECK(median_heuristic(ParticleCloud(rs)).value() ==
          doctest::Approx(median_heuristic(ParticleCloud(r)).value()).epsilon(1e-12));
  }
}

TEST_CASE("rbf_matrix") {
  const Matrix ones = rbf_matrix(cloud_1d({1.5, 1.5, 1.5}), Bandwidth(0.3));
  CHECK((ones.array() == 1.0).all());

  CHECK(rbf_matrix(cloud_1d({0.0, 1.0}), Bandwidth(1.0))(0, 1) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  CHECK(rbf_matrix(cloud_1d({0.0, 2.0}), Bandwidth(4.0))(1, 0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));

  Rng rng(3);
  const ParticleCloud p(standard_normal(30, 5, rng));
  const Matrix k = rbf_matrix(p, Bandwidth(2.0));
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    CHECK(k(i, i) == 1.0);
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      CHECK(k(i, j) == k(j, i));
      CHECK(k(i, j) > 0.0);
      CHECK(k(i, j) <= 1.0);
    }
  }
  CHECK(k == kernels::serial::rbf_matrix(p, Bandwidth(2.0)));
}

TEST_CASE("bandwidth rejects non-positive values") {
  CHECK_THROWS(Bandwidth(0.0));
  CHECK_THROWS(Bandwidth(-1.0));
  CHECK_THROWS(Bandwidth(std::nan("")));
  CHECK_THROWS(Bandwidth(std::numeric_limits<double>::infinity()));
}

TEST_CASE("stein_direction examples") {
  SUBCASE("single particle reduces to its gradient") {
    Matrix z(1, 3);
    z << 0.3, -1.0, 2.0;
    Matrix g(1, 3);
    g << 1.0, 2.0, -3.0;
    CHECK(stein_direction(ParticleCloud(z), g, Bandwidth(0.7)) == g);
  }

  SUBCASE("pure repulsion of two 1-D particles") {
    const Matrix phi = stein_direction(cloud_1d({0.0, 1.0}), Matrix::Zero(2, 1), Bandwidth(1.0));
    CHECK(phi(0, 0) == doctest::Approx(-0.36787944117144233).epsilon(1e-15));
    CHECK(phi(1, 0) == doctest::Approx(0.36787944117144233).epsilon(1e-15));
  }

  SUBCASE("dimension mismatch throws") {
    CHECK_THROWS_AS(stein_direction(cloud_1d({0.0, 1.0}), Matrix::Zero(3, 1), Bandwidth(1.0)), DimensionError);
    CHECK_THROWS_AS(stein_direction(cloud_1d({0.0, 1.0}), Matrix::Zero(2, 2), Bandwidth(1.0)), DimensionError);
  }
}

TEST_CASE("stein_direction matches the naive double loop and the serial reference") {
  Rng rng(2024);
  std::uniform_int_distribution<int> n_dist(1, 50), d_dist(1, 20);
  for (int rep = 0; rep < 25; ++rep) {
    const int n = n_dist(rng), d = d_dist(rng);
    const ParticleCloud p(standard_normal(n, d, rng));
    const Matrix g = 3.0 * standard_normal(n, d, rng);
    const Bandwidth h = median_heuristic(p);
    const Matrix phi = stein_direction(p, g, h);
    const auto oracle = naive_stein(p.positions(), g, h.value());
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < d; ++c) worst = std::max(worst, std::abs(phi(i, c) - oracle[i][c]));
    CHECK(worst <= 1e-12);
    CHECK((phi - kernels::serial::stein_direction(p, g, h)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("stein_direction invariants") {
  Rng rng(99);
  const int n = 12, d = 3;
  const ParticleCloud p(standard_normal(n, d, rng));
  const Matrix g = standard_normal(n, d, rng);
  const Bandwidth h(1.3);
  const Matrix phi = stein_direction(p, g, h);

  SUBCASE("permutation equivariance") {
    std::vector<int> sigma(n);
    std::iota(sigma.begin(), sigma.end(), 0);
    std::shuffle(sigma.begin(), sigma.end(), rng);
    Matrix zp(n, d), gp(n, d);
    for (int i = 0; i < n; ++i) {
      zp.row(i) = p.positions().row(sigma[i]);
      gp.row(i) = g.row(sigma[i]);
    }
    const Matrix phip = stein_direction(ParticleCloud(zp), gp, h);
    for (int i = 0; i < n; ++i) CHECK((phip.row(i) - phi.row(sigma[i])).cwiseAbs().maxCoeff() <= 1e-13);
  }

  SUBCASE("zero-gradient antisymmetry for two particles") {
    const ParticleCloud two(standard_normal(2, 4, rng));
    const Matrix rep = stein_direction(two, Matrix::Zero(2, 4), h);
    CHECK((rep.row(0) + rep.row(1)).cwiseAbs().maxCoeff() <= 1e-15);
  }

  SUBCASE("result is independent of the thread count") {
    CHECK(phi == stein_direction(p, g, h));
  }
}

TEST_CASE("kernel gradient matches central finite differences") {
  Rng rng(5);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 50; ++rep) {
    const Vector a = standard_normal(4, rng), b = standard_normal(4, rng);
    const Bandwidth h(0.5 + std::abs(normal(rng)));
    const Vector grad = kernels::rbf_grad_first(a, b, h);
    for (Eigen::Index c = 0; c < a.size(); ++c) {
      const double step = 1e-6 * (1.0 + std::abs(a[c]));
      Vector ap = a, am = a;
      ap[c] += step;
      am[c] -= step;
      const double fd = (kernels::rbf(ap, b, h) - kernels::rbf(am, b, h)) / (2.0 * step);
      const double scale = std::max(std::abs(fd), 1e-3);
      CHECK(std::abs(grad[c] - fd) / scale <= 1e-6);
    }
  }
}
