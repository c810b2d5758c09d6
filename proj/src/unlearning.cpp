#include "fdl/unlearning.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fdl/errors.hpp"
#include "fdl/eval.hpp"

namespace fdl {

std::string_view mode_name(UnlearnMode mode) {
  return mode == UnlearnMode::ClosedForm ? "closed_form" : "variational";
}

UnlearnMode parse_mode(std::string_view token) {
  if (token == "closed_form" || token == "closed-form") return UnlearnMode::ClosedForm;
  if (token == "variational") return UnlearnMode::Variational;
  throw std::invalid_argument("unknown mode '" + std::string(token) + "'");
}

std::string_view source_name(TrajectorySource source) {
  return source == TrajectorySource::Anchor ? "anchor" : "target";
}

TrajectorySource parse_source(std::string_view token) {
  if (token == "anchor") return TrajectorySource::Anchor;
  if (token == "target") return TrajectorySource::Target;
  throw std::invalid_argument("unknown trajectory source '" + std::string(token) + "'");
}

bool has_closed_form(DivergenceName name) {
  return name == DivergenceName::KL || name == DivergenceName::SquaredHellinger ||
         name == DivergenceName::PearsonChi2 || name == DivergenceName::Jeffreys;
}

void UnlearnConfig::validate(const ConceptSet& concepts) const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("UnlearnConfig: " + msg); };
  const int t = concepts.index_of(target);
  const int a = concepts.index_of(anchor);
  if (t == ConceptSet::empty_id()) fail("target cannot be the empty concept");
  if (t == a) fail("target and anchor must differ");
  if (mode == UnlearnMode::ClosedForm && !has_closed_form(divergence)) {
    fail("closed_form mode supports kl, hellinger2, chi2, jeffreys; got " +
         std::string(cli_name(divergence)));
  }
  if (!(sigma > 0.0)) fail("sigma must be > 0");
  if (!(omega_t > 0.0)) fail("omega_t must be > 0");
  if (steps < 0) fail("steps must be >= 0");
  if (!(learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (discriminator_ratio < 1) fail("discriminator_ratio must be >= 1");
  if (!(critic_learning_rate > 0.0)) fail("critic_learning_rate must be > 0");
  if (critic_width < 1) fail("critic_width must be >= 1");
  if (critic_warmup < 0) fail("critic_warmup must be >= 0");
  if (!(variational_beta1 >= 0.0 && variational_beta1 < 1.0)) fail("variational_beta1 in [0, 1)");
  if (trajectory_pool < 1) fail("trajectory_pool must be >= 1");
  if (!(regularizers.cutoff > 0.0 && regularizers.cutoff <= 1.0)) fail("cutoff must be in (0, 1]");
  if (!(regularizers.preservation_weight >= 0.0)) fail("preservation_weight must be >= 0");
  if (eval_every < 0 || grad_log_every < 0) fail("eval_every and grad_log_every must be >= 0");
  if (eval_every > 0 && eval_samples < 1) fail("eval_samples must be >= 1");
}

namespace {

Eigen::RowVectorXd squared_distances(const Eigen::Matrix2Xd& frozen,
                                     const Eigen::Matrix2Xd& trainable) {
  if (frozen.cols() != trainable.cols()) {
    throw DimensionMismatch("loss: frozen and trainable batches differ in size");
  }
  if (frozen.cols() == 0) throw std::invalid_argument("loss: empty batch");
  return (frozen - trainable).colwise().squaredNorm();
}

std::string batch_stats(const Eigen::RowVectorXd& w) {
  std::ostringstream os;
  os << "exponent max " << w.maxCoeff() << ", mean " << w.mean() << ", batch " << w.size();
  return os.str();
}

}  // namespace

double loss_mse(const Eigen::Matrix2Xd& frozen, const Eigen::Matrix2Xd& trainable, double omega) {
  return omega * squared_distances(frozen, trainable).mean();
}

double loss_hellinger(const Eigen::Matrix2Xd& frozen, const Eigen::Matrix2Xd& trainable,
                      double omega, double sigma) {
  const Eigen::RowVectorXd m = squared_distances(frozen, trainable);
  return -omega * (-m.array() / (8.0 * sigma * sigma)).exp().mean();
}

double loss_chi2(const Eigen::Matrix2Xd& frozen, const Eigen::Matrix2Xd& trainable,
                 double omega, double sigma) {
  const Eigen::RowVectorXd w = squared_distances(frozen, trainable) / (sigma * sigma);
  if (w.maxCoeff() > kChi2ExponentGuard) throw LossExplosion("chi2 loss: " + batch_stats(w));
  return omega * w.array().exp().mean();
}

LossValue closed_form_loss(DivergenceName name, const Eigen::Matrix2Xd& frozen,
                           const Eigen::Matrix2Xd& trainable, double omega, double sigma) {
  const Eigen::RowVectorXd m = squared_distances(frozen, trainable);
  const double n = static_cast<double>(m.size());
  const Eigen::Matrix2Xd diff = trainable - frozen;  // dm/dG = 2 diff
  LossValue out;
  out.mse = m.mean();
  switch (name) {
    case DivergenceName::KL:
    case DivergenceName::Jeffreys: {
      const double c = name == DivergenceName::KL ? omega : omega / (sigma * sigma);
      out.value = c * out.mse;
      out.d_trainable = (2.0 * c / n) * diff;
      return out;
    }
    case DivergenceName::SquaredHellinger: {
      const double k = 1.0 / (8.0 * sigma * sigma);
      const Eigen::RowVectorXd e = (-k * m.array()).exp().matrix();
      out.value = -omega * e.mean();
      out.d_trainable = diff * (e.transpose() * (2.0 * omega * k / n)).asDiagonal();
      return out;
    }
    case DivergenceName::PearsonChi2: {
      const Eigen::RowVectorXd w = m / (sigma * sigma);
      if (w.maxCoeff() > kChi2ExponentGuard) throw LossExplosion("chi2 loss: " + batch_stats(w));
      const Eigen::RowVectorXd e = w.array().exp().matrix();
      out.value = omega * e.mean();
      out.d_trainable = diff * (e.transpose() * (2.0 * omega / (sigma * sigma * n))).asDiagonal();
      return out;
    }
    default:
      throw UnsupportedError("no closed-form loss for " + std::string(cli_name(name)));
  }
}

GradLogRecord gradient_relation_check(const DenoiserNet& frozen, const DenoiserNet& trainable,
                                      const ProbeBatch& batch, int frozen_concept,
                                      int trainable_concept, double sigma, double tolerance) {
  const Eigen::Index n = batch.xt.cols();
  if (n == 0 || static_cast<Eigen::Index>(batch.steps.size()) != n) {
    throw std::invalid_argument("gradient_relation_check: empty or inconsistent batch");
  }
  const Eigen::Index dim = trainable.parameters().size();
  const double k_h = 1.0 / (8.0 * sigma * sigma);
  const double k_c = 1.0 / (sigma * sigma);

  GradLogRecord rec;
  int chi2_count = 0;
  Eigen::VectorXd g_m(dim), g_h(dim), g_c(dim);
  DenoiserNet::Tape tape;
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::Matrix2Xd x = batch.xt.col(j);
    const std::vector<int> step{batch.steps[static_cast<std::size_t>(j)]};
    const std::vector<int> cf{frozen_concept}, ct{trainable_concept};
    const Eigen::Matrix2Xd f = frozen.predict(x, cf, step);
    const Eigen::Matrix2Xd g = trainable.predict(x, ct, step, tape);
    const Eigen::Matrix2Xd diff = g - f;
    const double m = diff.squaredNorm();

    // Independent reverse passes for each loss at the same parameters.
    g_m.setZero();
    trainable.backward(tape, 2.0 * diff, g_m);
    const double e_h = std::exp(-k_h * m);
    g_h.setZero();
    trainable.backward(tape, (2.0 * k_h * e_h) * diff, g_h);

    const double scale_m = g_m.norm();
    const Eigen::VectorXd pred_h = e_h * k_h * g_m;
    const double err_h = (g_h - pred_h).norm() / std::max(pred_h.norm(), 1e-300);
    double err = scale_m == 0.0 ? g_h.norm() : err_h;

    rec.mse_value += m;
    rec.grad_norm_kl += scale_m;
    rec.grad_norm_h2 += g_h.norm();
    if (k_c * m <= kChi2ExponentGuard) {
      const double e_c = std::exp(k_c * m);
      g_c.setZero();
      trainable.backward(tape, (2.0 * k_c * e_c) * diff, g_c);
      const Eigen::VectorXd pred_c = e_c * k_c * g_m;
      const double err_c = scale_m == 0.0 ? g_c.norm()
                                          : (g_c - pred_c).norm() / std::max(pred_c.norm(), 1e-300);
      err = std::max(err, err_c);
      rec.grad_norm_chi2 += g_c.norm();
      ++chi2_count;
    } else {
      ++rec.chi2_skipped;
    }
    rec.max_relation_error = std::max(rec.max_relation_error, err);
  }
  rec.mse_value /= static_cast<double>(n);
  rec.grad_norm_kl /= static_cast<double>(n);
  rec.grad_norm_h2 /= static_cast<double>(n);
  rec.grad_norm_chi2 = chi2_count > 0 ? rec.grad_norm_chi2 / chi2_count : 0.0;
  if (rec.max_relation_error > tolerance) {
    throw std::logic_error("gradient identity violated: relative residual " +
                           std::to_string(rec.max_relation_error));
  }
  return rec;
}

double prior_preservation_loss(const DenoiserNet& frozen, const DenoiserNet& trainable,
                               const ProbeBatch& batch, const std::vector<int>& concepts,
                               double weight, Eigen::VectorXd* grad) {
  const Eigen::Index n = batch.xt.cols();
  if (n == 0) return 0.0;
  const Eigen::Matrix2Xd f = frozen.predict(batch.xt, concepts, batch.steps);
  DenoiserNet::Tape tape;
  const Eigen::Matrix2Xd g = trainable.predict(batch.xt, concepts, batch.steps, tape);
  const Eigen::Matrix2Xd diff = g - f;
  if (grad != nullptr) {
    trainable.backward(tape, (2.0 * weight / static_cast<double>(n)) * diff, *grad);
  }
  return weight * diff.squaredNorm() / static_cast<double>(n);
}

Eigen::VectorXd gradient_surgery(const Eigen::VectorXd& g_unlearn,
                                 const Eigen::VectorXd& g_preserve) {
  if (g_unlearn.size() != g_preserve.size()) {
    throw DimensionMismatch("gradient_surgery: length mismatch");
  }
  const double pp = g_preserve.squaredNorm();
  const double up = g_unlearn.dot(g_preserve);
  if (pp == 0.0 || up >= 0.0) return g_unlearn;
  return g_unlearn - (up / pp) * g_preserve;
}

int sample_timestep(bool importance_sampling, double cutoff, int steps, std::mt19937_64& rng) {
  if (!(cutoff > 0.0 && cutoff <= 1.0)) throw std::invalid_argument("sample_timestep: cutoff");
  const int hi = importance_sampling
                     ? std::max(1, static_cast<int>(std::ceil(cutoff * steps - 1e-12)))
                     : steps;
  return std::uniform_int_distribution<int>(1, hi)(rng);
}

namespace {

/// State shared by both training loops: frozen trajectory pool, preservation
/// pools and the random stream.
class Session {
 public:
  Session(const DenoiserNet& base, const ConceptSet& concepts, const NoiseSchedule& schedule,
          const UnlearnConfig& config)
      : base_(base), concepts_(concepts), schedule_(schedule), config_(config),
        rng_(config.seed) {
    target_ = concepts.index_of(config.target);
    anchor_ = concepts.index_of(config.anchor);
    const int source =
        config.trajectory_source == TrajectorySource::Anchor ? anchor_ : target_;
    const std::uint64_t pool_seed = rng_();
    const std::uint64_t preserve_seed = rng_();
    if (config.steps == 0) return;
    pool_ = sample(base, source, schedule, config.trajectory_pool, pool_seed, true).trajectory;
    if (config.regularizers.prior_preservation) {
      std::mt19937_64 seeder(preserve_seed);
      for (int c = 0; c < concepts.size(); ++c) {
        if (c == target_) continue;
        preserve_ids_.push_back(c);
        preserve_pool_.push_back(sample(base, c, schedule, config.trajectory_pool, seeder()).x0);
      }
    }
  }

  int target() const { return target_; }
  int anchor() const { return anchor_; }
  std::mt19937_64& rng() { return rng_; }

  ProbeBatch draw() {
    ProbeBatch b;
    const int n = config_.batch_size;
    b.xt.resize(2, n);
    b.steps.resize(static_cast<std::size_t>(n));
    std::uniform_int_distribution<Eigen::Index> pick(0, config_.trajectory_pool - 1);
    for (int j = 0; j < n; ++j) {
      const int t = sample_timestep(config_.regularizers.importance_sampling,
                                    config_.regularizers.cutoff, schedule_.steps(), rng_);
      b.steps[static_cast<std::size_t>(j)] = t;
      b.xt.col(j) = pool_[static_cast<std::size_t>(t)].col(pick(rng_));
    }
    return b;
  }

  /// Accumulates the preservation gradient into g_p and returns the loss.
  double preservation(const DenoiserNet& net, Eigen::VectorXd& g_p) {
    const int n = config_.batch_size;
    ProbeBatch b;
    b.xt.resize(2, n);
    b.steps.resize(static_cast<std::size_t>(n));
    std::vector<int> cs(static_cast<std::size_t>(n));
    std::uniform_int_distribution<std::size_t> which(0, preserve_ids_.size() - 1);
    std::uniform_int_distribution<Eigen::Index> pick(0, config_.trajectory_pool - 1);
    std::normal_distribution<double> normal;
    for (int j = 0; j < n; ++j) {
      const std::size_t k = which(rng_);
      cs[static_cast<std::size_t>(j)] = preserve_ids_[k];
      const int t = sample_timestep(config_.regularizers.importance_sampling,
                                    config_.regularizers.cutoff, schedule_.steps(), rng_);
      b.steps[static_cast<std::size_t>(j)] = t;
      const double ab = schedule_.alpha_bar(t);
      const Eigen::Vector2d eps(normal(rng_), normal(rng_));
      b.xt.col(j) = std::sqrt(ab) * preserve_pool_[k].col(pick(rng_)) + std::sqrt(1.0 - ab) * eps;
    }
    return prior_preservation_loss(base_, net, b, cs, config_.regularizers.preservation_weight,
                                   &g_p);
  }

  /// Combines unlearning and preservation gradients, records the step and
  /// applies the update.
  void finish_step(DenoiserNet& net, Adam& adam, Eigen::VectorXd& g_u, StepMetrics m,
                   UnlearnResult& result) {
    m.grad_norm = g_u.norm();
    Eigen::VectorXd total;
    if (config_.regularizers.prior_preservation) {
      Eigen::VectorXd g_p = Eigen::VectorXd::Zero(g_u.size());
      m.preservation_loss = preservation(net, g_p);
      total = (config_.regularizers.gradient_surgery ? gradient_surgery(g_u, g_p) : g_u) + g_p;
    } else {
      total = std::move(g_u);
    }
    if (!total.allFinite()) {
      throw TrainingFailure("unlearn: non-finite gradient at step " + std::to_string(m.step));
    }
    adam.step(net.parameters(), total);
    if (!net.parameters().allFinite()) {
      throw TrainingFailure("unlearn: NaN parameters at step " + std::to_string(m.step));
    }
    result.metrics.push_back(m);

    if (config_.eval_every > 0 &&
        (m.step % config_.eval_every == 0 || m.step == config_.steps)) {
      EvalSnapshot snap;
      snap.step = m.step;
      const std::uint64_t eval_seed = config_.seed ^ (0x9e3779b97f4a7c15ULL * m.step);
      for (const ConceptReport& r :
           evaluate(net, concepts_, schedule_, config_.eval_samples, eval_seed)) {
        snap.accuracy.push_back(r.accuracy);
      }
      result.evals.push_back(std::move(snap));
    }
  }

  ProbeBatch head(const ProbeBatch& b, int n) const {
    n = std::min<int>(n, static_cast<int>(b.xt.cols()));
    return {b.xt.leftCols(n), std::vector<int>(b.steps.begin(), b.steps.begin() + n)};
  }

 private:
  const DenoiserNet& base_;
  const ConceptSet& concepts_;
  const NoiseSchedule& schedule_;
  const UnlearnConfig& config_;
  std::mt19937_64 rng_;
  int target_ = 0;
  int anchor_ = 0;
  std::vector<Eigen::Matrix2Xd> pool_;
  std::vector<int> preserve_ids_;
  std::vector<Eigen::Matrix2Xd> preserve_pool_;
};

void check_frozen(const DenoiserNet& base, std::uint64_t before) {
  if (base.checksum() != before) throw std::logic_error("unlearn: frozen model was modified");
}

/// Critic inputs (prediction + sigma z, x_t, t / T), one column per sample.
Eigen::MatrixXd critic_inputs(const Eigen::Matrix2Xd& pred, const Eigen::Matrix2Xd& z,
                              const ProbeBatch& b, double sigma, int steps) {
  Eigen::MatrixXd in(5, pred.cols());
  in.topRows(2) = pred + sigma * z;
  in.middleRows(2, 2) = b.xt;
  for (Eigen::Index j = 0; j < pred.cols(); ++j) {
    in(4, j) = static_cast<double>(b.steps[static_cast<std::size_t>(j)]) / steps;
  }
  return in;
}

Eigen::Matrix2Xd gaussian_noise(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::Matrix2Xd z(2, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    z(0, j) = normal(rng);
    z(1, j) = normal(rng);
  }
  return z;
}

/// Noise for the p and q critic inputs; one shared draw when coupled.
std::pair<Eigen::Matrix2Xd, Eigen::Matrix2Xd> critic_noise(Eigen::Index n, bool coupled,
                                                           std::mt19937_64& rng) {
  Eigen::Matrix2Xd zp = gaussian_noise(n, rng);
  Eigen::Matrix2Xd zq = coupled ? zp : gaussian_noise(n, rng);
  return {std::move(zp), std::move(zq)};
}

}  // namespace

UnlearnResult unlearn_closed_form(const DenoiserNet& base, const ConceptSet& concepts,
                                  const NoiseSchedule& schedule, const UnlearnConfig& config) {
  config.validate(concepts);
  if (config.mode != UnlearnMode::ClosedForm) {
    throw std::invalid_argument("unlearn_closed_form: config.mode is not closed_form");
  }
  const std::uint64_t frozen_sum = base.checksum();
  Session session(base, concepts, schedule, config);
  UnlearnResult result{base, {}, {}, {}, std::nullopt};
  DenoiserNet& net = result.net;
  Adam adam(net.parameters().size(), config.learning_rate);
  const std::vector<int> anchor_ids(static_cast<std::size_t>(config.batch_size), session.anchor());
  const std::vector<int> target_ids(static_cast<std::size_t>(config.batch_size), session.target());
  DenoiserNet::Tape tape;

  for (int step = 1; step <= config.steps; ++step) {
    const ProbeBatch b = session.draw();
    const Eigen::Matrix2Xd f = base.predict(b.xt, anchor_ids, b.steps);
    const Eigen::Matrix2Xd g = net.predict(b.xt, target_ids, b.steps, tape);
    LossValue lv;
    try {
      lv = closed_form_loss(config.divergence, f, g, config.omega_t, config.sigma);
    } catch (const LossExplosion& e) {
      throw LossExplosion("unlearn step " + std::to_string(step) + ": " + e.what());
    }
    if (config.grad_log_every > 0 && step % config.grad_log_every == 0) {
      GradLogRecord rec = gradient_relation_check(base, net, session.head(b, 16), session.anchor(),
                                                  session.target(), config.sigma);
      rec.step = step;
      result.grad_log.push_back(rec);
    }
    Eigen::VectorXd g_u = Eigen::VectorXd::Zero(net.parameters().size());
    net.backward(tape, lv.d_trainable, g_u);
    StepMetrics m;
    m.step = step;
    m.loss = lv.value;
    m.mse = lv.mse;
    session.finish_step(net, adam, g_u, m, result);
  }
  check_frozen(base, frozen_sum);
  return result;
}

UnlearnResult unlearn_variational(const DenoiserNet& base, const ConceptSet& concepts,
                                  const NoiseSchedule& schedule, const UnlearnConfig& config) {
  config.validate(concepts);
  if (config.mode != UnlearnMode::Variational) {
    throw std::invalid_argument("unlearn_variational: config.mode is not variational");
  }
  const DivergenceSpec spec = make_spec(config.divergence);
  const std::uint64_t frozen_sum = base.checksum();
  Session session(base, concepts, schedule, config);
  std::mt19937_64& rng = session.rng();
  UnlearnResult result{base, {}, {}, {}, Discriminator::make(5, rng(), config.critic_width)};
  DenoiserNet& net = result.net;
  Discriminator& critic = *result.critic;
  Adam adam(net.parameters().size(), config.learning_rate, config.variational_beta1);
  Adam critic_adam(critic.omega.size(), config.critic_learning_rate, config.variational_beta1);
  const std::vector<int> anchor_ids(static_cast<std::size_t>(config.batch_size), session.anchor());
  const std::vector<int> target_ids(static_cast<std::size_t>(config.batch_size), session.target());
  const int T = schedule.steps();
  DenoiserNet::Tape tape;
  Mlp<double>::Tape critic_tape;
  Eigen::VectorXd scratch(critic.omega.size());

  auto critic_step = [&]() {
    const ProbeBatch b = session.draw();
    const auto [zp, zq] = critic_noise(b.xt.cols(), config.coupled_noise, rng);
    const Eigen::MatrixXd p =
        critic_inputs(base.predict(b.xt, anchor_ids, b.steps), zp, b, config.sigma, T);
    const Eigen::MatrixXd q =
        critic_inputs(net.predict(b.xt, target_ids, b.steps), zq, b, config.sigma, T);
    const ObjectiveGradient og = variational_objective_gradient(spec, critic, p, q);
    critic_adam.step(critic.omega, -og.d_omega);
    return og.value;
  };

  try {
    for (int k = 0; k < (config.steps > 0 ? config.critic_warmup : 0); ++k) critic_step();
  } catch (const DomainError& e) {
    throw TrainingFailure(std::string("unlearn critic warm-up: ") + e.what());
  }
  for (int step = 1; step <= config.steps; ++step) {
    StepMetrics m;
    m.step = step;
    try {
      for (int k = 0; k < config.discriminator_ratio; ++k) m.critic_objective = critic_step();

      const ProbeBatch b = session.draw();
      const Eigen::Matrix2Xd f = base.predict(b.xt, anchor_ids, b.steps);
      const Eigen::Matrix2Xd g = net.predict(b.xt, target_ids, b.steps, tape);
      const auto [zp, zq] = critic_noise(b.xt.cols(), config.coupled_noise, rng);
      const Eigen::MatrixXd p = critic_inputs(f, zp, b, config.sigma, T);
      const Eigen::MatrixXd q = critic_inputs(g, zq, b, config.sigma, T);
      const Eigen::RowVectorXd raw_p = critic.raw(p);
      const Eigen::RowVectorXd raw_q = critic.net.forward(critic.omega, q, critic_tape).row(0);
      const CriticTerms terms = critic_terms(spec, raw_p, raw_q);
      Eigen::MatrixXd d_input;
      scratch.setZero();
      critic.net.backward(critic.omega, critic_tape, terms.d_raw_q, scratch, &d_input);
      Eigen::VectorXd g_u = Eigen::VectorXd::Zero(net.parameters().size());
      net.backward(tape, config.omega_t * d_input.topRows(2), g_u);
      m.loss = config.omega_t * terms.value;
      m.mse = (f - g).colwise().squaredNorm().mean();
      session.finish_step(net, adam, g_u, m, result);
    } catch (const DomainError& e) {
      throw TrainingFailure("unlearn step " + std::to_string(step) + ": " + e.what());
    }
  }
  check_frozen(base, frozen_sum);
  return result;
}

UnlearnResult unlearn(const DenoiserNet& base, const ConceptSet& concepts,
                      const NoiseSchedule& schedule, const UnlearnConfig& config) {
  return config.mode == UnlearnMode::ClosedForm
             ? unlearn_closed_form(base, concepts, schedule, config)
             : unlearn_variational(base, concepts, schedule, config);
}

}  // namespace fdl
