#include <doctest.h>

#include <cmath>
#include <random>

#include "fdl/divergence.hpp"
#include "fdl/errors.hpp"
#include "fdl/gaussian.hpp"
#include "fdl/variational.hpp"

using namespace fdl;

namespace {

Eigen::MatrixXd normal_samples(double mu, double sd, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(1, n);
  for (int i = 0; i < n; ++i) x(0, i) = mu + sd * z(rng);
  return x;
}

// Critic whose raw output is the constant v0: zero weights, last bias v0.
Discriminator constant_critic(double v0) {
  Discriminator d = Discriminator::make(1, 1, 8);
  d.omega.setZero();
  d.omega(d.omega.size() - 1) = v0;
  return d;
}

}  // namespace

TEST_CASE("constant optimal critic gives zero objective at p = q") {
  const Eigen::MatrixXd x = normal_samples(0, 1, 300, 3);
  for (DivergenceName n : kAllDivergences) {
    const DivergenceSpec s = make_spec(n);
    if (n == DivergenceName::TotalVariation || n == DivergenceName::GAN) continue;
    const Discriminator d = constant_critic(s.activation_inverse(s.f_prime(1.0)));
    INFO(cli_name(n));
    CHECK(std::abs(variational_objective(s, d, x, x)) <= 1e-12);
    CHECK(optimal_critic_residual(s, d, Gaussian::scalar(0, 1), Gaussian::scalar(0, 1),
                                  Eigen::VectorXd::LinSpaced(61, -3, 3)) <= 1e-12);
  }
}

TEST_CASE("objective gradient matches central differences") {
  const Eigen::MatrixXd p = normal_samples(1, 1, 64, 5);
  const Eigen::MatrixXd q = normal_samples(0, 1, 64, 6);
  for (DivergenceName n : kAllDivergences) {
    const DivergenceSpec s = make_spec(n);
    Discriminator d = Discriminator::make(1, 42, 16);
    d.omega *= 0.5;
    const ObjectiveGradient g = variational_objective_gradient(s, d, p, q);
    CHECK(g.value == doctest::Approx(variational_objective(s, d, p, q)).epsilon(1e-14));
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<Eigen::Index> pick(0, d.omega.size() - 1);
    for (int k = 0; k < 20; ++k) {
      const Eigen::Index i = pick(rng);
      const double h = 1e-5;
      Discriminator a = d, b = d;
      a.omega(i) += h;
      b.omega(i) -= h;
      const double fd = (variational_objective(s, a, p, q) - variational_objective(s, b, p, q)) / (2 * h);
      INFO(cli_name(n) << " i=" << i);
      CHECK(std::abs(g.d_omega(i) - fd) <= 1e-6 * (1.0 + std::abs(fd)));
    }
  }
}

TEST_CASE("objective errors") {
  const DivergenceSpec kl = make_spec(DivergenceName::KL);
  const Discriminator d = Discriminator::make(1, 1);
  CHECK_THROWS_AS(variational_objective(kl, d, Eigen::MatrixXd(1, 0), normal_samples(0, 1, 4, 1)),
                  std::invalid_argument);
  // Identity activation with a huge critic value overflows exp(t - 1).
  const Discriminator big = constant_critic(1e4);
  CHECK_THROWS_AS(variational_objective(kl, big, normal_samples(0, 1, 4, 1), normal_samples(0, 1, 4, 2)),
                  DomainError);
}

TEST_CASE("lower bound holds for a fixed critic in expectation") {
  const Eigen::MatrixXd p = normal_samples(1, 1, 4096, 21);
  const Eigen::MatrixXd q = normal_samples(0, 1, 4096, 22);
  for (DivergenceName n : {DivergenceName::KL, DivergenceName::SquaredHellinger,
                           DivergenceName::JensenShannon, DivergenceName::TotalVariation}) {
    const DivergenceSpec s = make_spec(n);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Discriminator d = Discriminator::make(1, seed);
      const double value = s.scale() * variational_objective(s, d, p, q);
      double truth = 0.0;
      if (n == DivergenceName::KL) truth = 0.5;
      if (n == DivergenceName::SquaredHellinger) truth = 1 - std::exp(-0.125);
      if (n == DivergenceName::JensenShannon || n == DivergenceName::TotalVariation) truth = 1.0;
      CHECK(value <= truth + 0.05);
    }
  }
}

TEST_CASE("fit_estimate validates inputs") {
  const DivergenceSpec kl = make_spec(DivergenceName::KL);
  const Eigen::MatrixXd x = normal_samples(0, 1, 512, 1);
  EstimatorOptions o;
  o.steps = 0;
  CHECK_THROWS_AS(fit_estimate(kl, x, x, o), std::invalid_argument);
  o.steps = 10;
  o.batch_size = 100;
  CHECK_THROWS_AS(fit_estimate(kl, x, x, o), std::invalid_argument);
  o.batch_size = 256;
  CHECK_THROWS_AS(fit_estimate(kl, x.leftCols(100), x, o), std::invalid_argument);
  CHECK_THROWS_AS(fit_estimate(kl, x, Eigen::MatrixXd::Zero(2, 512), o), DimensionMismatch);
}

TEST_CASE("fit_estimate is deterministic, its value is the last trace entry, TV runs") {
  const Eigen::MatrixXd p = normal_samples(1, 1, 4000, 31);
  const Eigen::MatrixXd q = normal_samples(0, 1, 4000, 32);
  EstimatorOptions o;
  o.steps = 300;
  o.batch_size = 256;
  o.seed = 5;
  const DivergenceSpec tv = make_spec(DivergenceName::TotalVariation);
  const VariationalEstimate a = fit_estimate(tv, p, q, o);
  const VariationalEstimate b = fit_estimate(tv, p, q, o);
  CHECK(a.value == b.value);
  CHECK(a.objective_trace == b.objective_trace);
  CHECK(a.value == a.lower_bound_trace.back());
  CHECK(a.discriminator_steps == 300);
  CHECK(a.lower_bound_trace.size() == 300);
  // TV(N(1,1), N(0,1)) = 2 Phi(1/2) - 1.
  const double tv_true = std::erf(0.5 / std::sqrt(2.0));
  CHECK(a.value <= tv_true + 0.05);
  CHECK(a.value >= 0.5 * tv_true);
}

TEST_CASE("trained KL estimate and critic") {
  const Eigen::MatrixXd p = normal_samples(1, 1, 20000, 41);
  const Eigen::MatrixXd q = normal_samples(0, 1, 20000, 42);
  EstimatorOptions o;
  o.seed = 1;
  Discriminator critic = Discriminator::make(1, 0);
  const DivergenceSpec kl = make_spec(DivergenceName::KL);
  const VariationalEstimate est = fit_estimate(kl, p, q, o, &critic);
  CHECK(est.value >= 0.45);
  CHECK(est.value <= 0.55);
  const double residual = optimal_critic_residual(kl, critic, Gaussian::scalar(1, 1), Gaussian::scalar(0, 1),
                                                  Eigen::VectorXd::LinSpaced(121, -2, 4));
  CHECK(residual <= 0.1);
  // Smoothed trace does not fall over the second half beyond noise.
  const auto& tr = est.lower_bound_trace;
  for (std::size_t i = tr.size() / 2; i < tr.size(); ++i) CHECK(tr[i] >= tr[tr.size() / 2] - 0.02);
}

TEST_CASE("H2 estimate on a wider separation") {
  const Eigen::MatrixXd p = normal_samples(2, 1, 20000, 51);
  const Eigen::MatrixXd q = normal_samples(0, 1, 20000, 52);
  EstimatorOptions o;
  o.seed = 4;
  const VariationalEstimate est = fit_estimate(make_spec(DivergenceName::SquaredHellinger), p, q, o);
  const double truth = 1 - std::exp(-0.5);
  CHECK(std::abs(est.value - truth) <= 0.1 * truth);
}
