#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "fdl/checkpoint.hpp"
#include "fdl/diffusion.hpp"
#include "fdl/errors.hpp"
#include "fdl/eval.hpp"

using namespace fdl;

namespace {

DenoiserArch small_arch() {
  DenoiserArch a;
  a.hidden_width = 16;
  a.hidden_layers = 2;
  return a;
}

}  // namespace

TEST_CASE("schedule invariants") {
  const NoiseSchedule s = default_schedule();
  REQUIRE(s.steps() == 50);
  double prod = 1.0;
  for (int t = 1; t <= s.steps(); ++t) {
    prod *= s.alpha(t);
    CHECK(std::abs(s.alpha_bar(t) - prod) <= 1e-15);
    CHECK(s.alpha(t) > 0.0);
    CHECK(s.alpha(t) < 1.0);
    if (t > 1) CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
  CHECK(s.alpha_bar(s.steps()) < 0.01);
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.posterior_std(1) == 0.0);
  CHECK(s.posterior_std(10) > 0.0);
  CHECK_THROWS_AS(s.alpha(0), std::out_of_range);
  CHECK_THROWS_AS(s.alpha_bar(51), std::out_of_range);
  CHECK_THROWS_AS(NoiseSchedule::linear(0, 1e-4, 0.2), std::invalid_argument);
  CHECK_THROWS_AS(NoiseSchedule::linear(10, 0.3, 0.2), std::invalid_argument);
}

TEST_CASE("forward_noise examples") {
  const NoiseSchedule s = default_schedule();
  Eigen::Matrix2Xd x0(2, 1), eps(2, 1);
  x0 << 3.0, -2.0;
  eps << 0.4, 1.1;
  const Eigen::Matrix2Xd at_t = forward_noise(x0, s.steps(), eps, s);
  CHECK((at_t - eps).norm() <= 0.1 * x0.norm());
  const Eigen::Matrix2Xd clean = forward_noise(x0, 1, Eigen::Matrix2Xd::Zero(2, 1), s);
  CHECK((clean - std::sqrt(s.alpha_bar(1)) * x0).norm() <= 1e-15);
  CHECK_THROWS_AS(forward_noise(x0, 0, eps, s), std::out_of_range);
  CHECK_THROWS_AS(forward_noise(x0, 51, eps, s), std::out_of_range);
  CHECK_THROWS_AS(forward_noise(x0, 3, Eigen::Matrix2Xd::Zero(2, 2), s), DimensionMismatch);
}

TEST_CASE("forward process covariance over 1e5 draws") {
  const NoiseSchedule s = default_schedule();
  const ConceptSet cs = ConceptSet::standard();
  const int n = 100000, t = 20;
  // x0 from concept A: covariance 0.25 I.
  const Eigen::Matrix2Xd x0 = cs.draw_component(0, n, 123);
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z;
  Eigen::Matrix2Xd eps(2, n);
  for (int j = 0; j < n; ++j) eps.col(j) << z(rng), z(rng);
  const Eigen::Matrix2Xd xt = forward_noise(x0, t, eps, s);
  const Eigen::Vector2d mean = xt.rowwise().mean();
  const Eigen::Matrix2Xd c = xt.colwise() - mean;
  const Eigen::Matrix2d cov = c * c.transpose() / (n - 1);
  const double expected = s.alpha_bar(t) * 0.25 + (1 - s.alpha_bar(t));
  CHECK(std::abs(cov(0, 0) - expected) <= 0.05 * expected);
  CHECK(std::abs(cov(1, 1) - expected) <= 0.05 * expected);
  CHECK(std::abs(cov(0, 1)) <= 0.05 * expected);
}

TEST_CASE("concept set") {
  const ConceptSet cs = ConceptSet::standard();
  CHECK(cs.size() == 4);
  CHECK(cs.index_of("C") == 2);
  CHECK(cs.index_of("empty") == ConceptSet::empty_id());
  CHECK(cs.label_of(ConceptSet::empty_id()) == "empty");
  CHECK(cs.embedding(ConceptSet::empty_id()).isZero());
  CHECK(cs.embedding(1)(1) == 1.0);
  CHECK(cs.embedding(1).sum() == 1.0);
  CHECK_THROWS_AS(cs.index_of("Z"), std::invalid_argument);
  CHECK_THROWS_AS(ConceptSet({{"A", {0, 0}, 1.0}, {"A", {1, 1}, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(ConceptSet({{"A", {0, 0}, 0.0}}), std::invalid_argument);
  const LabeledSamples d = cs.draw(10, 1);
  CHECK(d.x.cols() == 40);
  CHECK(d.labels.size() == 40);
}

TEST_CASE("denoiser reverse-mode gradient matches central differences") {
  const NoiseSchedule s = default_schedule();
  DenoiserArch arch;
  arch.hidden_width = 24;
  const DenoiserNet net(arch, s.steps(), 5);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  const int n = 6;
  Eigen::Matrix2Xd xt(2, n), target(2, n);
  for (int j = 0; j < n; ++j) {
    xt.col(j) << 3 * z(rng), 3 * z(rng);
    target.col(j) << z(rng), z(rng);
  }
  const std::vector<int> cids = {0, 1, 2, 3, ConceptSet::empty_id(), 1};
  const std::vector<int> steps = {1, 7, 20, 33, 50, 12};
  auto loss = [&](const Eigen::VectorXd& params) {
    DenoiserNet copy = net;
    copy.parameters() = params;
    return (copy.predict(xt, cids, steps) - target).squaredNorm() / n;
  };
  DenoiserNet::Tape tape;
  const Eigen::Matrix2Xd pred = net.predict(xt, cids, steps, tape);
  CHECK((pred - net.predict(xt, cids, steps)).norm() == 0.0);
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.parameters().size());
  net.backward(tape, 2.0 * (pred - target) / n, grad);

  std::uniform_int_distribution<Eigen::Index> pick(0, grad.size() - 1);
  for (int probe = 0; probe < 20; ++probe) {
    const Eigen::Index i = pick(rng);
    const double h = 1e-4;
    Eigen::VectorXd a = net.parameters(), b = net.parameters();
    a(i) += h;
    b(i) -= h;
    const double fd = (loss(a) - loss(b)) / (2 * h);
    INFO("param " << i << " ad=" << grad(i) << " fd=" << fd);
    CHECK(std::abs(grad(i) - fd) <= 1e-4 * std::max(std::abs(fd), 1e-3));
  }
}

TEST_CASE("denoiser input validation and determinism") {
  const DenoiserNet a(small_arch(), 50, 3), b(small_arch(), 50, 3), c(small_arch(), 50, 4);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.parameters() != c.parameters());
  CHECK(a.arch().input_dim() == 26);
  const Eigen::Matrix2Xd x = Eigen::Matrix2Xd::Zero(2, 2);
  CHECK_THROWS_AS(a.predict(x, std::vector<int>{0}, std::vector<int>{1, 1}), DimensionMismatch);
  CHECK_THROWS_AS(a.predict(x, std::vector<int>{0, 9}, std::vector<int>{1, 1}), std::out_of_range);
  CHECK_THROWS_AS(a.predict(x, std::vector<int>{0, 0}, std::vector<int>{0, 1}), std::out_of_range);
}

TEST_CASE("sampling: empty batch, determinism, frozen parameters") {
  const NoiseSchedule s = default_schedule();
  const DenoiserNet net(small_arch(), s.steps(), 1);
  const std::uint64_t before = net.checksum();
  CHECK(sample(net, 0, s, 0, 1).x0.cols() == 0);
  const SampleResult r1 = sample(net, 2, s, 50, 9, true);
  const SampleResult r2 = sample(net, 2, s, 50, 9, true);
  CHECK(r1.x0 == r2.x0);
  REQUIRE(r1.trajectory.size() == static_cast<std::size_t>(s.steps() + 1));
  CHECK(r1.trajectory[0] == r1.x0);
  CHECK(sample(net, 2, s, 50, 10).x0 != r1.x0);
  CHECK(sample(net, 2, s, 50, 9).trajectory.empty());
  CHECK(net.checksum() == before);
  CHECK_THROWS_AS(sample(net, 0, s, -1, 1), std::invalid_argument);
}

TEST_CASE("pretrain: preconditions, epochs = 0, determinism") {
  const NoiseSchedule s = default_schedule();
  const ConceptSet cs = ConceptSet::standard();
  PretrainOptions o;
  o.arch = small_arch();
  o.epochs = 0;
  o.seed = 2;
  CHECK_THROWS_AS(pretrain(cs.draw(999, 1), cs, s, o), std::invalid_argument);

  const LabeledSamples data = cs.draw(1000, 1);
  const DenoiserNet untrained = pretrain(data, cs, s, o);
  CHECK(untrained.parameters() == pretrain(data, cs, s, o).parameters());
  // An untrained net puts every concept roughly at chance.
  double mean_acc = 0.0;
  for (int c = 0; c < cs.size(); ++c) mean_acc += concept_accuracy(sample(untrained, c, s, 400, 3).x0, c, cs);
  CHECK(mean_acc / cs.size() == doctest::Approx(0.25).epsilon(0.6));

  o.epochs = 2;
  const DenoiserNet a = pretrain(data, cs, s, o);
  const DenoiserNet b = pretrain(data, cs, s, o);
  CHECK(a.parameters() == b.parameters());
  CHECK(a.parameters() != untrained.parameters());

  o.learning_rate = 1e300;
  CHECK_THROWS_AS(pretrain(data, cs, s, o), TrainingFailure);
}

TEST_CASE("checkpoint round-trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "fdl_test_ckpt";
  std::filesystem::create_directories(dir);
  const Checkpoint ck{default_schedule(), ConceptSet::standard(), DenoiserNet(small_arch(), 50, 11)};
  save_checkpoint(ck, dir / "a.json");
  const Checkpoint back = load_checkpoint(dir / "a.json");
  CHECK(back.net.parameters() == ck.net.parameters());
  CHECK(back.net.arch().hidden_width == 16);
  CHECK(back.schedule.alpha_bar(50) == ck.schedule.alpha_bar(50));
  CHECK(back.concepts.size() == 4);
  CHECK(back.concepts[3].mean == ck.concepts[3].mean);

  std::ifstream in(dir / "a.json");
  std::string text((std::istreambuf_iterator<char>(in)), {});
  const auto pos = text.find("\"checksum\"");
  REQUIRE(pos != std::string::npos);
  const auto digit = text.find_first_of("0123456789", pos);
  text[digit] = text[digit] == '1' ? '2' : '1';
  std::ofstream(dir / "b.json") << text;
  CHECK_THROWS_AS(load_checkpoint(dir / "b.json"), std::runtime_error);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.json"), std::runtime_error);
  std::filesystem::remove_all(dir);
}
