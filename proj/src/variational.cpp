#include "fdl/variational.hpp"

#include <cmath>
#include <random>
#include <string>

#include "fdl/errors.hpp"

namespace fdl {

Discriminator Discriminator::make(int input_dim, std::uint64_t seed, int width) {
  Discriminator d{Mlp<double>({input_dim, width, width, 1}, Activation::Tanh), {}};
  std::mt19937_64 rng(seed);
  d.omega = d.net.initial_parameters(rng);
  return d;
}

Eigen::RowVectorXd Discriminator::raw(const Eigen::MatrixXd& x) const {
  return net.forward(omega, x).row(0);
}

CriticTerms critic_terms(const DivergenceSpec& spec, const Eigen::RowVectorXd& raw_p,
                         const Eigen::RowVectorXd& raw_q) {
  if (raw_p.size() == 0 || raw_q.size() == 0) {
    throw std::invalid_argument("variational objective: empty batch");
  }
  CriticTerms terms;
  terms.d_raw_p.resize(raw_p.size());
  terms.d_raw_q.resize(raw_q.size());
  const double np = static_cast<double>(raw_p.size());
  const double nq = static_cast<double>(raw_q.size());

  double sum_p = 0.0;
  for (Eigen::Index i = 0; i < raw_p.size(); ++i) {
    const double t = spec.activation(raw_p(i));
    if (!spec.f_star_domain().contains(t)) {
      throw DomainError("critic output left the conjugate domain (p batch)");
    }
    sum_p += t;
    terms.d_raw_p(i) = spec.activation_prime(raw_p(i)) / np;
  }
  double sum_q = 0.0;
  for (Eigen::Index i = 0; i < raw_q.size(); ++i) {
    const double t = spec.activation(raw_q(i));
    const double fs = spec.f_star(t);
    if (!std::isfinite(fs)) {
      throw DomainError("conjugate overflow at critic value " + std::to_string(t));
    }
    sum_q += fs;
    terms.d_raw_q(i) = -spec.f_star_prime(t) * spec.activation_prime(raw_q(i)) / nq;
  }
  terms.value = sum_p / np - sum_q / nq;
  if (!std::isfinite(terms.value)) throw DomainError("non-finite variational objective");
  return terms;
}

double variational_objective(const DivergenceSpec& spec, const Discriminator& critic,
                             const Eigen::MatrixXd& samples_p,
                             const Eigen::MatrixXd& samples_q) {
  return critic_terms(spec, critic.raw(samples_p), critic.raw(samples_q)).value;
}

ObjectiveGradient variational_objective_gradient(const DivergenceSpec& spec,
                                                 const Discriminator& critic,
                                                 const Eigen::MatrixXd& samples_p,
                                                 const Eigen::MatrixXd& samples_q) {
  Mlp<double>::Tape tape_p, tape_q;
  const Eigen::RowVectorXd raw_p = critic.net.forward(critic.omega, samples_p, tape_p).row(0);
  const Eigen::RowVectorXd raw_q = critic.net.forward(critic.omega, samples_q, tape_q).row(0);
  const CriticTerms terms = critic_terms(spec, raw_p, raw_q);

  ObjectiveGradient out;
  out.value = terms.value;
  out.d_omega = Eigen::VectorXd::Zero(critic.omega.size());
  critic.net.backward(critic.omega, tape_p, terms.d_raw_p, out.d_omega);
  critic.net.backward(critic.omega, tape_q, terms.d_raw_q, out.d_omega);
  return out;
}

namespace {

Eigen::MatrixXd draw_columns(const Eigen::MatrixXd& pool, int n, std::mt19937_64& rng) {
  std::uniform_int_distribution<Eigen::Index> pick(0, pool.cols() - 1);
  Eigen::MatrixXd out(pool.rows(), n);
  for (int j = 0; j < n; ++j) out.col(j) = pool.col(pick(rng));
  return out;
}

}  // namespace

VariationalEstimate fit_estimate(const DivergenceSpec& spec,
                                 const Eigen::MatrixXd& samples_p,
                                 const Eigen::MatrixXd& samples_q,
                                 const EstimatorOptions& options,
                                 Discriminator* trained) {
  if (options.steps < 1) throw std::invalid_argument("fit_estimate: steps >= 1");
  if (options.batch_size < 256) throw std::invalid_argument("fit_estimate: batch >= 256");
  if (samples_p.cols() < 256 || samples_q.cols() < 256) {
    throw std::invalid_argument("fit_estimate: sample sets need >= 256 columns");
  }
  if (samples_p.rows() != samples_q.rows()) {
    throw DimensionMismatch("fit_estimate: sample dimensions differ");
  }

  std::mt19937_64 rng(options.seed);
  Discriminator critic = Discriminator::make(static_cast<int>(samples_p.rows()),
                                             rng(), options.width);
  Adam adam(critic.omega.size(), options.learning_rate);

  VariationalEstimate est;
  est.objective_trace.reserve(options.steps);
  est.lower_bound_trace.reserve(options.steps);
  double window_sum = 0.0;
  for (int step = 0; step < options.steps; ++step) {
    const Eigen::MatrixXd bp = draw_columns(samples_p, options.batch_size, rng);
    const Eigen::MatrixXd bq = draw_columns(samples_q, options.batch_size, rng);
    ObjectiveGradient og;
    try {
      og = variational_objective_gradient(spec, critic, bp, bq);
    } catch (const DomainError& e) {
      throw TrainingFailure("fit_estimate: step " + std::to_string(step) + ": " + e.what());
    }
    if (!std::isfinite(og.value) || !og.d_omega.allFinite()) {
      throw TrainingFailure("fit_estimate: NaN objective at step " + std::to_string(step));
    }
    est.objective_trace.push_back(og.value);
    window_sum += og.value;
    const int window = std::min(step + 1, options.smoothing);
    if (step >= options.smoothing) {
      window_sum -= est.objective_trace[step - options.smoothing];
    }
    est.lower_bound_trace.push_back(spec.scale() * window_sum / window);
    adam.step(critic.omega, -og.d_omega);
  }
  est.discriminator_steps = options.steps;
  est.value = est.lower_bound_trace.back();
  if (trained != nullptr) *trained = std::move(critic);
  return est;
}

double optimal_critic_residual(const DivergenceSpec& spec, const Discriminator& critic,
                               const Gaussian& p, const Gaussian& q,
                               const Eigen::VectorXd& grid) {
  if (p.dim() != 1 || q.dim() != 1) {
    throw DimensionMismatch("optimal_critic_residual: 1-D Gaussians only");
  }
  const double mu = p.mean(0);
  const double sd = std::sqrt(p.variance(0));
  std::vector<double> xs;
  for (double x : grid) {
    if (std::abs(x - mu) <= 3.0 * sd) xs.push_back(x);
  }
  if (xs.empty()) return 0.0;
  Eigen::MatrixXd pts(1, static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) pts(0, static_cast<Eigen::Index>(i)) = xs[i];
  const Eigen::RowVectorXd raw = critic.raw(pts);

  double total = 0.0;
  Eigen::VectorXd x1(1);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x1(0) = xs[i];
    const double ratio = std::exp(p.log_density(x1) - q.log_density(x1));
    total += std::abs(spec.activation(raw(static_cast<Eigen::Index>(i))) - spec.f_prime(ratio));
  }
  return total / static_cast<double>(xs.size());
}

}  // namespace fdl
