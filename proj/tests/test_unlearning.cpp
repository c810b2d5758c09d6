#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "fdl/diffusion.hpp"
#include "fdl/errors.hpp"
#include "fdl/unlearning.hpp"

using namespace fdl;

namespace {

Eigen::Matrix2Xd cols(std::initializer_list<std::pair<double, double>> v) {
  Eigen::Matrix2Xd m(2, static_cast<Eigen::Index>(v.size()));
  Eigen::Index j = 0;
  for (auto [a, b] : v) m.col(j++) << a, b;
  return m;
}

DenoiserNet tiny_net(std::uint64_t seed) {
  DenoiserArch a;
  a.hidden_width = 12;
  a.hidden_layers = 2;
  return DenoiserNet(a, 50, seed);
}

UnlearnConfig quick_config() {
  UnlearnConfig c;
  c.steps = 6;
  c.batch_size = 32;
  c.trajectory_pool = 64;
  c.seed = 3;
  return c;
}

ProbeBatch random_probes(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> t(1, 50);
  ProbeBatch b{Eigen::Matrix2Xd(2, n), {}};
  for (int j = 0; j < n; ++j) {
    b.xt.col(j) << 2 * z(rng), 2 * z(rng);
    b.steps.push_back(t(rng));
  }
  return b;
}

// Shifts the output-layer bias so that trainable - frozen == shift at every input.
DenoiserNet shifted(const DenoiserNet& net, double dx, double dy) {
  DenoiserNet out = net;
  const Eigen::Index n = out.parameters().size();
  out.parameters()(n - 2) += dx;
  out.parameters()(n - 1) += dy;
  return out;
}

}  // namespace

TEST_CASE("closed-form loss examples") {
  const Eigen::Matrix2Xd f = cols({{0, 0}});
  CHECK(loss_mse(f, f, 1.0) == 0.0);
  CHECK(loss_mse(f, cols({{1, 0}}), 1.0) == 1.0);
  CHECK(closed_form_loss(DivergenceName::Jeffreys, f, cols({{1, 2}}), 1.0, 1.0).value ==
        loss_mse(f, cols({{1, 2}}), 1.0));
  CHECK(closed_form_loss(DivergenceName::Jeffreys, f, cols({{1, 2}}), 1.0, 2.0).value ==
        doctest::Approx(5.0 / 4.0));
  CHECK(loss_hellinger(f, f, 1.0, 1.0) == -1.0);
  CHECK(loss_hellinger(f, cols({{2, 2}}), 1.0, 1.0) == doctest::Approx(-std::exp(-1.0)).epsilon(1e-15));
  CHECK(loss_hellinger(f, cols({{200, 0}}), 1.0, 1.0) == 0.0);
  CHECK(loss_chi2(f, f, 1.0, 1.0) == 1.0);
  CHECK(loss_chi2(f, cols({{1, 0}}), 1.0, 1.0) == doctest::Approx(std::numbers::e).epsilon(1e-15));
  CHECK_THROWS_AS(loss_chi2(f, cols({{10, 0}}), 1.0, 1.0), LossExplosion);
  CHECK_THROWS_AS(loss_mse(f, cols({{1, 0}, {0, 0}}), 1.0), DimensionMismatch);
  CHECK_THROWS_AS(closed_form_loss(DivergenceName::JensenShannon, f, f, 1, 1), UnsupportedError);
}

TEST_CASE("loss ranges on random batches") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix2Xd f(2, 16), g(2, 16);
    for (int j = 0; j < 16; ++j) {
      f.col(j) << z(rng), z(rng);
      g.col(j) << z(rng), z(rng);
    }
    const double omega = 0.5 + trial * 0.05;
    const double h = loss_hellinger(f, g, omega, 1.0);
    CHECK(h >= -omega);
    CHECK(h < 0.0);
    CHECK(loss_chi2(f, g, omega, 1.0) >= omega);
  }
}

TEST_CASE("closed_form_loss gradient against central differences in G") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> z;
  Eigen::Matrix2Xd f(2, 5), g(2, 5);
  for (int j = 0; j < 5; ++j) {
    f.col(j) << z(rng), z(rng);
    g.col(j) << f(0, j) + 0.5 * z(rng), f(1, j) + 0.5 * z(rng);
  }
  for (DivergenceName n : {DivergenceName::KL, DivergenceName::Jeffreys, DivergenceName::SquaredHellinger,
                           DivergenceName::PearsonChi2}) {
    const LossValue lv = closed_form_loss(n, f, g, 1.3, 0.9);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      Eigen::Matrix2Xd a = g, b = g;
      const double h = 1e-6;
      a.data()[i] += h;
      b.data()[i] -= h;
      const double fd = (closed_form_loss(n, f, a, 1.3, 0.9).value - closed_form_loss(n, f, b, 1.3, 0.9).value) / (2 * h);
      CHECK(lv.d_trainable.data()[i] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("loss gradients through the denoiser match central differences") {
  const DenoiserNet frozen = tiny_net(1);
  const DenoiserNet trainable = tiny_net(2);
  const ProbeBatch b = random_probes(8, 4);
  const std::vector<int> ca(8, 1), ct(8, 0);
  const Eigen::Matrix2Xd f = frozen.predict(b.xt, ca, b.steps);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<Eigen::Index> pick(0, trainable.parameters().size() - 1);
  for (DivergenceName n : {DivergenceName::KL, DivergenceName::Jeffreys, DivergenceName::SquaredHellinger,
                           DivergenceName::PearsonChi2}) {
    auto loss = [&](const Eigen::VectorXd& p) {
      DenoiserNet c = trainable;
      c.parameters() = p;
      return closed_form_loss(n, f, c.predict(b.xt, ct, b.steps), 1.0, 1.0).value;
    };
    DenoiserNet::Tape tape;
    const Eigen::Matrix2Xd g = trainable.predict(b.xt, ct, b.steps, tape);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(trainable.parameters().size());
    trainable.backward(tape, closed_form_loss(n, f, g, 1.0, 1.0).d_trainable, grad);
    for (int probe = 0; probe < 20; ++probe) {
      const Eigen::Index i = pick(rng);
      const double h = 1e-5;
      Eigen::VectorXd a = trainable.parameters(), c = trainable.parameters();
      a(i) += h;
      c(i) -= h;
      const double fd = (loss(a) - loss(c)) / (2 * h);
      INFO(cli_name(n) << " param " << i);
      CHECK(std::abs(grad(i) - fd) <= 1e-4 * std::max(std::abs(fd), 1e-4));
    }
  }
}

TEST_CASE("gradient surgery") {
  const Eigen::Vector2d gp(0, 1);
  CHECK(gradient_surgery(Eigen::Vector2d(1, -1), gp) == Eigen::Vector2d(1, 0));
  CHECK(gradient_surgery(Eigen::Vector2d(3, 0), gp) == Eigen::Vector2d(3, 0));
  CHECK(gradient_surgery(-gp, gp).norm() == 0.0);
  CHECK(gradient_surgery(Eigen::Vector2d(1, 2), Eigen::Vector2d::Zero()) == Eigen::Vector2d(1, 2));
  CHECK_THROWS_AS(gradient_surgery(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3)), DimensionMismatch);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z;
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd u(7), p(7);
    for (int k = 0; k < 7; ++k) {
      u(k) = z(rng);
      p(k) = z(rng);
    }
    CHECK(gradient_surgery(u, p).dot(p) >= -1e-9);
  }
}

TEST_CASE("timestep sampling") {
  std::mt19937_64 rng(1);
  std::vector<int> counts(51, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_timestep(false, 0.2, 50, rng))];
  CHECK(counts[0] == 0);
  double stat = 0.0;
  for (int t = 1; t <= 50; ++t) stat += std::pow(counts[static_cast<std::size_t>(t)] - n / 50.0, 2) / (n / 50.0);
  CHECK(stat < 74.92);  // 99th percentile of chi^2 with 49 degrees of freedom

  std::vector<int> seen(51, 0);
  for (int i = 0; i < 20000; ++i) ++seen[static_cast<std::size_t>(sample_timestep(true, 0.2, 50, rng))];
  for (int t = 1; t <= 50; ++t) CHECK((seen[static_cast<std::size_t>(t)] > 0) == (t <= 10));

  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 1000; ++i) CHECK(sample_timestep(true, 1.0, 50, a) == sample_timestep(false, 0.3, 50, b));
  CHECK_THROWS_AS(sample_timestep(true, 0.0, 50, a), std::invalid_argument);
  CHECK_THROWS_AS(sample_timestep(true, 1.5, 50, a), std::invalid_argument);
}

TEST_CASE("gradient relations: e^{-2} ratio against a finite-difference oracle") {
  const DenoiserNet frozen = tiny_net(1);
  // u = m / 8 = 2 at sigma = 1 needs m = 16.
  const DenoiserNet trainable = shifted(frozen, 4.0, 0.0);
  ProbeBatch b{cols({{0.3, -0.7}}), {17}};
  const GradLogRecord rec = gradient_relation_check(frozen, trainable, b, 0, 0, 1.0);
  CHECK(rec.mse_value == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(rec.chi2_skipped == 0);
  CHECK(rec.grad_norm_h2 / (rec.grad_norm_kl / 8.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-9));

  // Directional derivatives of J_H2 = -exp(-u) and of u along a random direction.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::VectorXd dir(trainable.parameters().size());
  for (Eigen::Index i = 0; i < dir.size(); ++i) dir(i) = z(rng);
  auto u_of = [&](double s) {
    DenoiserNet c = trainable;
    c.parameters() += s * dir;
    const std::vector<int> cid{0};
    return (c.predict(b.xt, cid, b.steps) - frozen.predict(b.xt, cid, b.steps)).squaredNorm() / 8.0;
  };
  const double h = 1e-5;
  const double du = (u_of(h) - u_of(-h)) / (2 * h);
  const double dj = (-std::exp(-u_of(h)) + std::exp(-u_of(-h))) / (2 * h);
  CHECK(dj / du == doctest::Approx(std::exp(-2.0)).epsilon(1e-6));
}

TEST_CASE("gradient relations: equality at zero MSE and ordering on random probes") {
  const DenoiserNet frozen = tiny_net(1);
  const ProbeBatch b = random_probes(20, 8);
  const GradLogRecord same = gradient_relation_check(frozen, frozen, b, 2, 2, 1.0);
  CHECK(same.mse_value == 0.0);
  CHECK(std::abs(same.grad_norm_h2 - same.grad_norm_kl) <= 1e-9);
  CHECK(std::abs(same.grad_norm_chi2 - same.grad_norm_kl) <= 1e-9);

  const DenoiserNet other = tiny_net(5);
  for (int j = 0; j < 20; ++j) {
    ProbeBatch one{b.xt.col(j), {b.steps[static_cast<std::size_t>(j)]}};
    const GradLogRecord r = gradient_relation_check(frozen, other, one, 1, 0, 1.0);
    CHECK(r.max_relation_error <= 1e-6);
    CHECK(r.grad_norm_h2 <= r.grad_norm_kl);
    if (r.chi2_skipped == 0) CHECK(r.grad_norm_kl <= r.grad_norm_chi2 + 1e-9);
  }
  CHECK_THROWS_AS(gradient_relation_check(frozen, other, ProbeBatch{}, 0, 0, 1.0), std::invalid_argument);
}

TEST_CASE("config validation and name parsing") {
  const ConceptSet cs = ConceptSet::standard();
  UnlearnConfig c;
  CHECK_NOTHROW(c.validate(cs));
  c.anchor = "A";
  CHECK_THROWS_AS(c.validate(cs), std::invalid_argument);
  c.anchor = "empty";
  CHECK_NOTHROW(c.validate(cs));
  c.divergence = DivergenceName::JensenShannon;
  CHECK_THROWS_AS(c.validate(cs), std::invalid_argument);
  c.mode = UnlearnMode::Variational;
  CHECK_NOTHROW(c.validate(cs));
  c.target = "Q";
  CHECK_THROWS_AS(c.validate(cs), std::invalid_argument);
  c = UnlearnConfig{};
  c.regularizers.cutoff = 0.0;
  CHECK_THROWS_AS(c.validate(cs), std::invalid_argument);
  c = UnlearnConfig{};
  c.sigma = 0.0;
  CHECK_THROWS_AS(c.validate(cs), std::invalid_argument);
  for (UnlearnMode m : {UnlearnMode::ClosedForm, UnlearnMode::Variational}) CHECK(parse_mode(mode_name(m)) == m);
  for (TrajectorySource s : {TrajectorySource::Anchor, TrajectorySource::Target})
    CHECK(parse_source(source_name(s)) == s);
  CHECK(has_closed_form(DivergenceName::PearsonChi2));
  CHECK(!has_closed_form(DivergenceName::GAN));
}

TEST_CASE("zero steps returns the base network in both modes") {
  const DenoiserNet base = tiny_net(4);
  const ConceptSet cs = ConceptSet::standard();
  UnlearnConfig c = quick_config();
  c.steps = 0;
  CHECK(unlearn(base, cs, default_schedule(), c).net.parameters() == base.parameters());
  c.mode = UnlearnMode::Variational;
  c.divergence = DivergenceName::JensenShannon;
  const UnlearnResult r = unlearn(base, cs, default_schedule(), c);
  CHECK(r.net.parameters() == base.parameters());
  CHECK(r.critic.has_value());
}

TEST_CASE("closed-form runs: metrics, logs, frozen base, regularizers") {
  const DenoiserNet base = tiny_net(4);
  const std::uint64_t sum = base.checksum();
  const ConceptSet cs = ConceptSet::standard();
  UnlearnConfig c = quick_config();
  c.grad_log_every = 2;
  c.eval_every = 3;
  c.eval_samples = 20;
  const UnlearnResult r = unlearn(base, cs, default_schedule(), c);
  CHECK(base.checksum() == sum);
  CHECK(r.metrics.size() == 6);
  CHECK(r.grad_log.size() == 3);
  CHECK(r.evals.size() == 2);
  CHECK(r.net.parameters() != base.parameters());
  for (const auto& m : r.metrics) {
    CHECK(m.loss >= -1.0);
    CHECK(m.loss < 0.0);
  }
  for (const auto& g : r.grad_log) CHECK(g.grad_norm_h2 <= g.grad_norm_kl);

  const UnlearnResult again = unlearn(base, cs, default_schedule(), c);
  CHECK(again.net.parameters() == r.net.parameters());

  // Preservation loss: zero against itself, positive after unlearning.
  const ProbeBatch b = random_probes(16, 2);
  const std::vector<int> keep(16, 2);
  CHECK(prior_preservation_loss(base, base, b, keep, 1.0) == 0.0);
  CHECK(prior_preservation_loss(base, r.net, b, keep, 1.0) > 0.0);

  UnlearnConfig reg = c;
  reg.regularizers.prior_preservation = true;
  reg.regularizers.gradient_surgery = true;
  reg.regularizers.importance_sampling = true;
  const UnlearnResult rr = unlearn(base, cs, default_schedule(), reg);
  CHECK(rr.metrics.back().preservation_loss >= 0.0);
  CHECK(rr.net.parameters() != r.net.parameters());

  UnlearnConfig kl = c;
  kl.divergence = DivergenceName::KL;
  kl.trajectory_source = TrajectorySource::Target;
  CHECK(unlearn(base, cs, default_schedule(), kl).metrics.size() == 6);
}

TEST_CASE("variational runs are seed-deterministic and admit every divergence") {
  const DenoiserNet base = tiny_net(4);
  const ConceptSet cs = ConceptSet::standard();
  UnlearnConfig c = quick_config();
  c.mode = UnlearnMode::Variational;
  c.divergence = DivergenceName::JensenShannon;
  c.discriminator_ratio = 2;
  c.critic_width = 16;
  const UnlearnResult a = unlearn(base, cs, default_schedule(), c);
  const UnlearnResult b = unlearn(base, cs, default_schedule(), c);
  REQUIRE(a.metrics.size() == b.metrics.size());
  for (std::size_t i = 0; i < a.metrics.size(); ++i) {
    CHECK(a.metrics[i].loss == b.metrics[i].loss);
    CHECK(a.metrics[i].critic_objective == b.metrics[i].critic_objective);
  }
  CHECK(a.net.parameters() == b.net.parameters());
  c.seed = 4;
  CHECK(unlearn(base, cs, default_schedule(), c).net.parameters() != a.net.parameters());

  c.steps = 2;
  for (DivergenceName n : kAllDivergences) {
    c.divergence = n;
    INFO(cli_name(n));
    CHECK_NOTHROW(unlearn(base, cs, default_schedule(), c));
  }
}
