#include "fdl/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

#include "fdl/errors.hpp"

namespace fdl {

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1) throw std::invalid_argument("NoiseSchedule: steps >= 1");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    throw std::invalid_argument("NoiseSchedule: need 0 < beta_start <= beta_end < 1");
  }
  NoiseSchedule s;
  s.beta_start_ = beta_start;
  s.beta_end_ = beta_end;
  s.betas_.resize(steps);
  s.alpha_bars_.resize(steps);
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
    s.betas_(i) = beta_start + frac * (beta_end - beta_start);
    prod *= 1.0 - s.betas_(i);
    s.alpha_bars_(i) = prod;
  }
  return s;
}

Eigen::Index NoiseSchedule::index(int t) const {
  if (t < 1 || t > steps()) {
    throw std::out_of_range("NoiseSchedule: step " + std::to_string(t) + " outside [1, " +
                            std::to_string(steps()) + "]");
  }
  return t - 1;
}

double NoiseSchedule::posterior_std(int t) const {
  const double abar_prev = t == 1 ? 1.0 : alpha_bar(t - 1);
  return std::sqrt((1.0 - abar_prev) / (1.0 - alpha_bar(t)) * beta(t));
}

NoiseSchedule default_schedule() { return NoiseSchedule::linear(50, 1e-4, 0.2); }

ConceptSet::ConceptSet(std::vector<Concept> concepts) : concepts_(std::move(concepts)) {
  if (concepts_.empty() || concepts_.size() > static_cast<std::size_t>(kEmbeddingDim)) {
    throw std::invalid_argument("ConceptSet: between 1 and 8 concepts");
  }
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    if (!(concepts_[i].variance > 0.0)) {
      throw std::invalid_argument("ConceptSet: component variance must be > 0");
    }
    if (concepts_[i].label == "empty") {
      throw std::invalid_argument("ConceptSet: 'empty' is reserved");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (concepts_[j].label == concepts_[i].label) {
        throw std::invalid_argument("ConceptSet: duplicate label " + concepts_[i].label);
      }
    }
  }
}

ConceptSet ConceptSet::standard() {
  return ConceptSet({{"A", {4.0, 4.0}, 0.25},
                     {"B", {-4.0, 4.0}, 0.25},
                     {"C", {-4.0, -4.0}, 0.25},
                     {"D", {4.0, -4.0}, 0.25}});
}

int ConceptSet::index_of(const std::string& label) const {
  if (label == "empty") return empty_id();
  for (int i = 0; i < size(); ++i) {
    if (concepts_[static_cast<std::size_t>(i)].label == label) return i;
  }
  throw std::invalid_argument("unknown concept '" + label + "'");
}

std::string ConceptSet::label_of(int id) const {
  if (id == empty_id()) return "empty";
  return (*this)[id].label;
}

Eigen::VectorXd ConceptSet::embedding(int id) const {
  if (id != empty_id() && (id < 0 || id >= size())) {
    throw std::out_of_range("ConceptSet: bad concept id");
  }
  Eigen::VectorXd e = Eigen::VectorXd::Zero(kEmbeddingDim);
  if (id != empty_id()) e(id) = 1.0;
  return e;
}

Eigen::Matrix2Xd ConceptSet::draw_component(int id, int n, std::uint64_t seed) const {
  const Concept& c = (*this)[id];
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const double sd = std::sqrt(c.variance);
  Eigen::Matrix2Xd out(2, n);
  for (int j = 0; j < n; ++j) {
    out(0, j) = c.mean(0) + sd * normal(rng);
    out(1, j) = c.mean(1) + sd * normal(rng);
  }
  return out;
}

LabeledSamples ConceptSet::draw(int n_per_concept, std::uint64_t seed) const {
  LabeledSamples s;
  s.x.resize(2, static_cast<Eigen::Index>(n_per_concept) * size());
  s.labels.reserve(static_cast<std::size_t>(n_per_concept) * size());
  std::mt19937_64 seeder(seed);
  for (int c = 0; c < size(); ++c) {
    s.x.middleCols(static_cast<Eigen::Index>(c) * n_per_concept, n_per_concept) =
        draw_component(c, n_per_concept, seeder());
    s.labels.insert(s.labels.end(), static_cast<std::size_t>(n_per_concept), c);
  }
  return s;
}

DenoiserNet::DenoiserNet(DenoiserArch arch, int steps, std::uint64_t seed)
    : arch_(arch), steps_(steps) {
  std::vector<int> widths{arch.input_dim()};
  for (int l = 0; l < arch.hidden_layers; ++l) widths.push_back(arch.hidden_width);
  widths.push_back(2);
  mlp_ = Mlp<double>(widths, Activation::SiLU);
  std::mt19937_64 rng(seed);
  params_ = mlp_.initial_parameters(rng);
}

Eigen::MatrixXd DenoiserNet::inputs(const Eigen::Matrix2Xd& xt, std::span<const int> concepts,
                                    std::span<const int> steps) const {
  const Eigen::Index n = xt.cols();
  if (static_cast<Eigen::Index>(concepts.size()) != n ||
      static_cast<Eigen::Index>(steps.size()) != n) {
    throw DimensionMismatch("DenoiserNet: batch, concept and step lengths differ");
  }
  Eigen::MatrixXd in = Eigen::MatrixXd::Zero(arch_.input_dim(), n);
  in.topRows<2>() = xt;
  const int half = arch_.time_features / 2;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int c = concepts[static_cast<std::size_t>(j)];
    if (c < 0 || c > ConceptSet::kEmbeddingDim) throw std::out_of_range("DenoiserNet: concept id");
    if (c != ConceptSet::empty_id()) in(2 + c, j) = 1.0;
    const int t = steps[static_cast<std::size_t>(j)];
    if (t < 1 || t > steps_) throw std::out_of_range("DenoiserNet: step out of range");
    const double tau = static_cast<double>(t) / steps_;
    for (int k = 0; k < half; ++k) {
      const double angle = std::numbers::pi * std::ldexp(tau, k);
      in(2 + ConceptSet::kEmbeddingDim + 2 * k, j) = std::sin(angle);
      in(2 + ConceptSet::kEmbeddingDim + 2 * k + 1, j) = std::cos(angle);
    }
  }
  return in;
}

Eigen::Matrix2Xd DenoiserNet::predict(const Eigen::Matrix2Xd& xt, std::span<const int> concepts,
                                      std::span<const int> steps) const {
  return mlp_.forward(params_, inputs(xt, concepts, steps));
}

Eigen::Matrix2Xd DenoiserNet::predict(const Eigen::Matrix2Xd& xt, std::span<const int> concepts,
                                      std::span<const int> steps, Tape& tape) const {
  return mlp_.forward(params_, inputs(xt, concepts, steps), tape);
}

void DenoiserNet::backward(const Tape& tape, const Eigen::MatrixXd& d_out,
                           Eigen::VectorXd& grad) const {
  mlp_.backward(params_, tape, d_out, grad);
}

Eigen::Matrix2Xd forward_noise(const Eigen::Matrix2Xd& x0, int t, const Eigen::Matrix2Xd& eps,
                               const NoiseSchedule& schedule) {
  if (x0.cols() != eps.cols()) throw DimensionMismatch("forward_noise: x0/eps widths differ");
  const double ab = schedule.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

DenoiserNet pretrain(const LabeledSamples& data, const ConceptSet& concepts,
                     const NoiseSchedule& schedule, const PretrainOptions& options) {
  std::vector<int> counts(static_cast<std::size_t>(concepts.size()), 0);
  for (int c : data.labels) {
    if (c < 0 || c >= concepts.size()) throw std::invalid_argument("pretrain: bad concept id");
    ++counts[static_cast<std::size_t>(c)];
  }
  for (int c = 0; c < concepts.size(); ++c) {
    if (counts[static_cast<std::size_t>(c)] < 1000) {
      throw std::invalid_argument("pretrain: concept " + concepts[c].label +
                                  " has fewer than 1000 samples");
    }
  }

  std::mt19937_64 rng(options.seed);
  DenoiserNet net(options.arch, schedule.steps(), rng());
  Adam adam(net.parameters().size(), options.learning_rate);

  const Eigen::Index n = data.x.cols();
  const int batch = std::min<int>(options.batch_size, static_cast<int>(n));
  const Eigen::Index batches_per_epoch = n / batch;
  const long total_steps = static_cast<long>(options.epochs) * batches_per_epoch;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> step_dist(1, schedule.steps());
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Eigen::Matrix2Xd x0(2, batch), eps(2, batch), xt(2, batch);
  std::vector<int> cs(static_cast<std::size_t>(batch)), ts(static_cast<std::size_t>(batch));
  Eigen::VectorXd grad(net.parameters().size());
  DenoiserNet::Tape tape;
  long step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index b = 0; b < batches_per_epoch; ++b, ++step) {
      for (int j = 0; j < batch; ++j) {
        const Eigen::Index idx = order[static_cast<std::size_t>(b * batch + j)];
        const int t = step_dist(rng);
        x0.col(j) = data.x.col(idx);
        eps(0, j) = normal(rng);
        eps(1, j) = normal(rng);
        const double ab = schedule.alpha_bar(t);
        xt.col(j) = std::sqrt(ab) * x0.col(j) + std::sqrt(1.0 - ab) * eps.col(j);
        cs[static_cast<std::size_t>(j)] =
            unit(rng) < options.uncond_prob ? concepts.empty_id()
                                            : data.labels[static_cast<std::size_t>(idx)];
        ts[static_cast<std::size_t>(j)] = t;
      }
      const Eigen::Matrix2Xd pred = net.predict(xt, cs, ts, tape);
      const Eigen::Matrix2Xd diff = pred - eps;
      const double loss = diff.squaredNorm() / batch;
      if (!std::isfinite(loss)) {
        throw TrainingFailure("pretrain: non-finite loss at step " + std::to_string(step));
      }
      grad.setZero();
      net.backward(tape, (2.0 / batch) * diff, grad);
      // Cosine decay to 5% of the base rate.
      const double progress = total_steps > 1 ? static_cast<double>(step) / (total_steps - 1) : 1.0;
      adam.set_learning_rate(options.learning_rate *
                             (0.05 + 0.95 * 0.5 * (1.0 + std::cos(std::numbers::pi * progress))));
      adam.step(net.parameters(), grad);
    }
  }
  return net;
}

SampleResult sample(const DenoiserNet& net, int concept_id, const NoiseSchedule& schedule, int n,
                    std::uint64_t seed, bool record_trajectory) {
  if (n < 0) throw std::invalid_argument("sample: n >= 0");
  SampleResult out;
  const int T = schedule.steps();
  if (n == 0) {
    out.x0.resize(2, 0);
    if (record_trajectory) out.trajectory.assign(static_cast<std::size_t>(T) + 1, out.x0);
    return out;
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  auto noise = [&] {
    Eigen::Matrix2Xd z(2, n);
    for (int j = 0; j < n; ++j) {
      z(0, j) = normal(rng);
      z(1, j) = normal(rng);
    }
    return z;
  };

  Eigen::Matrix2Xd x = noise();
  if (record_trajectory) out.trajectory.resize(static_cast<std::size_t>(T) + 1);
  const std::vector<int> cs(static_cast<std::size_t>(n), concept_id);
  std::vector<int> ts(static_cast<std::size_t>(n));
  for (int t = T; t >= 1; --t) {
    if (record_trajectory) out.trajectory[static_cast<std::size_t>(t)] = x;
    std::fill(ts.begin(), ts.end(), t);
    const Eigen::Matrix2Xd eps_hat = net.predict(x, cs, ts);
    const double coef = schedule.beta(t) / std::sqrt(1.0 - schedule.alpha_bar(t));
    Eigen::Matrix2Xd mean = (x - coef * eps_hat) / std::sqrt(schedule.alpha(t));
    if (t > 1) {
      x = mean + schedule.posterior_std(t) * noise();
    } else {
      x = std::move(mean);
    }
  }
  if (record_trajectory) out.trajectory[0] = x;
  out.x0 = std::move(x);
  return out;
}

}  // namespace fdl
