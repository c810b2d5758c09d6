#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fdl/divergence.hpp"
#include "fdl/errors.hpp"
#include "fdl/gaussian.hpp"
#include "fdl/quadrature.hpp"

using namespace fdl;

namespace {

Gaussian g1(double mu, double var) { return Gaussian::scalar(mu, var); }

Gaussian gd(std::initializer_list<double> mu, std::initializer_list<double> var) {
  Eigen::VectorXd m(static_cast<Eigen::Index>(mu.size())), v(static_cast<Eigen::Index>(var.size()));
  Eigen::Index i = 0;
  for (double x : mu) m(i++) = x;
  i = 0;
  for (double x : var) v(i++) = x;
  return Gaussian(m, v);
}

}  // namespace

TEST_CASE("DiagonalGaussian validates its fields") {
  CHECK_THROWS_AS(Gaussian(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(3)), DimensionMismatch);
  CHECK_THROWS_AS(g1(0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(g1(0.0, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(kl(g1(0, 1), gd({0, 0}, {1, 1})), DimensionMismatch);
}

TEST_CASE("closed forms: specific values") {
  CHECK(kl(g1(0, 1), g1(0, 1)) == 0.0);
  CHECK(kl(g1(1, 1), g1(0, 1)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kl(g1(0, 2), g1(0, 1)) == doctest::Approx(0.5 * (std::log(0.5) + 1.0)).epsilon(1e-12));
  CHECK(jeffreys(g1(1, 1), g1(0, 1)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hellinger2(g1(2, 1), g1(0, 1)) == doctest::Approx(1.0 - std::exp(-0.5)).epsilon(1e-12));
  CHECK(chi2(g1(1, 1), g1(0, 1)) == doctest::Approx(std::numbers::e - 1.0).epsilon(1e-12));
  CHECK(chi2(g1(0, 1), g1(0, 1)) == 0.0);
  CHECK(hellinger2(g1(0.3, 1.4), g1(0.3, 1.4)) == 0.0);
  CHECK_THROWS_AS(chi2(g1(0, 4), g1(0, 1)), DivergenceUndefined);
  CHECK_THROWS_AS(chi2(g1(0, 2), g1(0, 1)), DivergenceUndefined);
  CHECK_THROWS_AS(chi2(gd({0, 0}, {1, 3}), gd({0, 0}, {1, 1})), DivergenceUndefined);
}

TEST_CASE("quadrature oracle: specific values") {
  const auto kls = make_spec(DivergenceName::KL);
  CHECK(std::abs(quadrature_divergence(kls, g1(0, 1), g1(0, 1))) <= 1e-9);
  CHECK(quadrature_divergence(kls, g1(1, 1), g1(0, 1)) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(quadrature_divergence(make_spec(DivergenceName::SquaredHellinger), g1(2, 1), g1(0, 1)) ==
        doctest::Approx(0.393469340287).epsilon(1e-6));
  CHECK_THROWS_AS(quadrature_divergence(kls, gd({0, 0}, {1, 1}), gd({0, 0}, {1, 1})),
                  DimensionMismatch);
}

TEST_CASE("random admissible pairs agree with the quadrature oracle") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> mean(-2.0, 2.0), sd(0.7, 1.5);
  const auto s_kl = make_spec(DivergenceName::KL);
  const auto s_j = make_spec(DivergenceName::Jeffreys);
  const auto s_h = make_spec(DivergenceName::SquaredHellinger);
  const auto s_c = make_spec(DivergenceName::PearsonChi2);
  for (int trial = 0; trial < 30; ++trial) {
    const double sp = sd(rng), sq = sd(rng);
    const Gaussian p = g1(mean(rng), sp * sp), q = g1(mean(rng), sq * sq);
    CHECK(std::abs(kl(p, q) - quadrature_divergence(s_kl, p, q)) <= 1e-6);
    CHECK(std::abs(jeffreys(p, q) - quadrature_divergence(s_j, p, q)) <= 1e-6);
    const double h = hellinger2(p, q);
    CHECK(h >= 0.0);
    CHECK(h < 1.0);
    CHECK(std::abs(h - quadrature_divergence(s_h, p, q)) <= 1e-6);
    if (sp * sp <= 1.2 * sq * sq) {
      CHECK(std::abs(chi2(p, q) - quadrature_divergence(s_c, p, q)) <= 1e-6);
    }
  }
}

TEST_CASE("jeffreys is the symmetrised KL") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> mean(-3.0, 3.0), var(0.2, 4.0);
  for (int i = 0; i < 50; ++i) {
    const Gaussian p = gd({mean(rng), mean(rng), mean(rng)}, {var(rng), var(rng), var(rng)});
    const Gaussian q = gd({mean(rng), mean(rng), mean(rng)}, {var(rng), var(rng), var(rng)});
    CHECK(std::abs(jeffreys(p, q) - (kl(p, q) + kl(q, p))) <= 1e-12 * (1.0 + jeffreys(p, q)));
    CHECK(jeffreys(p, q) == doctest::Approx(jeffreys(q, p)).epsilon(1e-12));
    CHECK(hellinger2(p, q) == doctest::Approx(hellinger2(q, p)).epsilon(1e-12));
    CHECK(kl(p, q) >= 0.0);
  }
}

TEST_CASE("diagonal Gaussians factorise over coordinates") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mean(-2.0, 2.0), var(0.5, 2.0);
  for (int i = 0; i < 20; ++i) {
    const double m[4] = {mean(rng), mean(rng), mean(rng), mean(rng)};
    const double v[4] = {var(rng), var(rng), var(rng), var(rng)};
    const Gaussian p = gd({m[0], m[1]}, {v[0], v[1]});
    const Gaussian q = gd({m[2], m[3]}, {v[2], v[3]});
    const double kl_sum = kl(g1(m[0], v[0]), g1(m[2], v[2])) + kl(g1(m[1], v[1]), g1(m[3], v[3]));
    const double j_sum =
        jeffreys(g1(m[0], v[0]), g1(m[2], v[2])) + jeffreys(g1(m[1], v[1]), g1(m[3], v[3]));
    CHECK(std::abs(kl(p, q) - kl_sum) <= 1e-12);
    CHECK(std::abs(jeffreys(p, q) - j_sum) <= 1e-12);
    // Bhattacharyya coefficients and chi^2 factors multiply.
    const double bc = (1 - hellinger2(g1(m[0], v[0]), g1(m[2], v[2]))) *
                      (1 - hellinger2(g1(m[1], v[1]), g1(m[3], v[3])));
    CHECK(hellinger2(p, q) == doctest::Approx(1 - bc).epsilon(1e-12));
    if (2 * v[2] > v[0] && 2 * v[3] > v[1]) {
      const double prod = (1 + chi2(g1(m[0], v[0]), g1(m[2], v[2]))) *
                          (1 + chi2(g1(m[1], v[1]), g1(m[3], v[3])));
      CHECK(chi2(p, q) == doctest::Approx(prod - 1).epsilon(1e-10));
    }
  }
}

TEST_CASE("closed forms are nondecreasing in Mahalanobis distance") {
  const Eigen::VectorXd shared = Eigen::VectorXd::Constant(2, 1.3);
  const Eigen::Vector2d dir(0.6, -0.8);
  double last[4] = {-1, -1, -1, -1};
  double last_dist = -1;
  for (int i = 0; i <= 60; ++i) {
    const double r = 0.1 * i;
    const Gaussian p(Eigen::VectorXd::Zero(2), shared);
    const Gaussian q(Eigen::VectorXd(r * dir), shared);
    const double vals[4] = {kl(p, q), jeffreys(p, q), hellinger2(p, q), chi2(p, q)};
    const double d = mahalanobis(p, q, shared);
    CHECK(d >= last_dist);
    for (int k = 0; k < 4; ++k) {
      CHECK(vals[k] >= last[k]);
      last[k] = vals[k];
    }
    last_dist = d;
  }
  CHECK(last[2] < 1.0);
  CHECK(hellinger2(g1(0, 1), g1(40, 1)) <= 1.0);
}

TEST_CASE("mahalanobis") {
  CHECK(mahalanobis(gd({0, 0}, {1, 1}), gd({3, 4}, {1, 1}), Eigen::Vector2d(1, 1)) == 5.0);
  CHECK(mahalanobis(g1(0, 1), g1(2, 1), Eigen::VectorXd::Constant(1, 4.0)) == 1.0);
  CHECK(mahalanobis(g1(1, 1), g1(1, 3), Eigen::VectorXd::Constant(1, 4.0)) == 0.0);
  CHECK_THROWS_AS(mahalanobis(g1(0, 1), g1(0, 1), Eigen::Vector2d(1, 1)), DimensionMismatch);
  CHECK_THROWS_AS(mahalanobis(g1(0, 1), g1(0, 1), Eigen::VectorXd::Constant(1, 0.0)),
                  std::invalid_argument);
}

TEST_CASE("adaptive simpson") {
  CHECK(adaptive_simpson([](double x) { return x * x; }, 0.0, 3.0, 1e-12) ==
        doctest::Approx(9.0).epsilon(1e-12));
  CHECK(adaptive_simpson([](double x) { return std::exp(-x * x); }, -10, 10, 1e-12) ==
        doctest::Approx(std::sqrt(std::numbers::pi)).epsilon(1e-11));
  CHECK_THROWS_AS(adaptive_simpson([](double) { return NAN; }, 0, 1, 1e-9), OracleFailure);
  CHECK_THROWS_AS(adaptive_simpson([](double x) { return 1.0 / std::sqrt(std::abs(x - 0.3)); },
                                   0, 1, 1e-14, 8),
                  OracleFailure);
}

TEST_CASE("gauss hermite integrates standard normal moments") {
  const GaussHermite gh = gauss_hermite(20);
  CHECK(gh.weights.sum() == doctest::Approx(1.0).epsilon(1e-13));
  auto moment = [&](int k) {
    double s = 0;
    for (Eigen::Index i = 0; i < gh.nodes.size(); ++i) s += gh.weights(i) * std::pow(gh.nodes(i), k);
    return s;
  };
  CHECK(std::abs(moment(1)) <= 1e-13);
  CHECK(moment(2) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(moment(4) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(moment(6) == doctest::Approx(15.0).epsilon(1e-12));
}
