#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fdl/diffusion.hpp"
#include "fdl/divergence.hpp"
#include "fdl/variational.hpp"

namespace fdl {

enum class UnlearnMode { ClosedForm, Variational };

/// Which concept conditions the frozen trajectories that supply x_t.
enum class TrajectorySource { Anchor, Target };

struct Regularizers {
  bool prior_preservation = false;
  double preservation_weight = 1.0;
  bool gradient_surgery = false;
  bool importance_sampling = false;
  double cutoff = 0.2;
};

struct UnlearnConfig {
  std::string target = "A";
  std::string anchor = "B";
  UnlearnMode mode = UnlearnMode::ClosedForm;
  DivergenceName divergence = DivergenceName::SquaredHellinger;
  double omega_t = 1.0;
  double sigma = 1.0;
  Regularizers regularizers{};
  int steps = 500;
  double learning_rate = 1e-3;
  int batch_size = 128;
  std::uint64_t seed = 0;

  /// Critic ascent steps per generator step (variational mode).
  int discriminator_ratio = 5;
  double critic_learning_rate = 1e-3;
  int critic_width = 64;
  /// Critic-only ascent steps before the first generator step.
  int critic_warmup = 0;
  /// Adam first-moment decay for both players in variational mode.
  double variational_beta1 = 0.5;
  /// Share the Gaussian reverse-step noise between the p and q critic inputs
  /// (common random numbers; each expectation is unchanged).
  bool coupled_noise = false;

  TrajectorySource trajectory_source = TrajectorySource::Anchor;
  /// Number of frozen trajectories pre-generated for drawing x_t.
  int trajectory_pool = 1024;
  /// Per-concept evaluation every k steps (0 disables intermediate evaluation).
  int eval_every = 0;
  int eval_samples = 500;
  /// Gradient-relation records every k steps (0 disables; closed form only).
  int grad_log_every = 0;

  /// Throws std::invalid_argument on an inadmissible combination.
  void validate(const ConceptSet& concepts) const;
};

std::string_view mode_name(UnlearnMode mode);
UnlearnMode parse_mode(std::string_view token);
std::string_view source_name(TrajectorySource source);
TrajectorySource parse_source(std::string_view token);

/// Divergences with a closed-form reverse-step loss.
bool has_closed_form(DivergenceName name);

// Closed-form losses between frozen predictions F and trainable predictions G
// (columns are samples, m_i = |F_i - G_i|^2, batch mean).

/// omega * mean(m).
double loss_mse(const Eigen::Matrix2Xd& frozen, const Eigen::Matrix2Xd& trainable, double omega);
/// -omega * mean(exp(-m / (8 sigma^2))).
double loss_hellinger(const Eigen::Matrix2Xd& frozen, const Eigen::Matrix2Xd& trainable,
                      double omega, double sigma);
/// omega * mean(exp(m / sigma^2)); throws LossExplosion once m / sigma^2 > 80.
double loss_chi2(const Eigen::Matrix2Xd& frozen, const Eigen::Matrix2Xd& trainable,
                 double omega, double sigma);

inline constexpr double kChi2ExponentGuard = 80.0;

struct LossValue {
  double value = 0.0;
  double mse = 0.0;  // mean m, for logging
  /// dL / dG, same shape as the trainable predictions.
  Eigen::Matrix2Xd d_trainable;
};

/// KL -> MSE, Jeffreys -> (omega / sigma^2) MSE, H^2, chi^2. Throws
/// UnsupportedError for divergences without a closed form.
LossValue closed_form_loss(DivergenceName name, const Eigen::Matrix2Xd& frozen,
                           const Eigen::Matrix2Xd& trainable, double omega, double sigma);

/// Points (x_t, t) at which frozen and trainable predictions are compared.
struct ProbeBatch {
  Eigen::Matrix2Xd xt;
  std::vector<int> steps;
};

struct GradLogRecord {
  int step = 0;
  double mse_value = 0.0;
  double grad_norm_kl = 0.0;
  double grad_norm_h2 = 0.0;
  double grad_norm_chi2 = 0.0;
  /// Largest relative residual of the two gradient identities over the batch.
  double max_relation_error = 0.0;
  /// Samples past the chi^2 exponent guard, left out of the chi^2 terms.
  int chi2_skipped = 0;
};

/// Per sample, with u = m / (8 sigma^2) and w = m / sigma^2, checks
///   grad J_H2 = exp(-u) grad u   and   grad J_chi2 = exp(w) grad w
/// using independent backward passes, and records batch-mean gradient norms of
/// the MSE, H^2 and chi^2 losses (omega = 1). Samples whose chi^2 exponent
/// exceeds kChi2ExponentGuard are excluded from the chi^2 terms. Throws std::logic_error when an
/// identity is violated beyond `tolerance` (relative).
GradLogRecord gradient_relation_check(const DenoiserNet& frozen, const DenoiserNet& trainable,
                                      const ProbeBatch& batch, int frozen_concept,
                                      int trainable_concept, double sigma,
                                      double tolerance = 1e-6);

/// weight * mean |Phi(x, c, t) - Phi_hat(x, c, t)|^2 over a batch where column
/// j is conditioned on concepts[j]; accumulates d/dphi_hat into grad if given.
double prior_preservation_loss(const DenoiserNet& frozen, const DenoiserNet& trainable,
                               const ProbeBatch& batch, const std::vector<int>& concepts,
                               double weight, Eigen::VectorXd* grad = nullptr);

/// Projects g_unlearn off g_preserve when they conflict.
Eigen::VectorXd gradient_surgery(const Eigen::VectorXd& g_unlearn,
                                 const Eigen::VectorXd& g_preserve);

/// Uniform on [1, T], or on the ceil(cutoff * T) steps nearest x_0 when
/// importance sampling is on.
int sample_timestep(bool importance_sampling, double cutoff, int steps, std::mt19937_64& rng);

struct StepMetrics {
  int step = 0;
  double loss = 0.0;
  double mse = 0.0;
  double grad_norm = 0.0;
  double preservation_loss = 0.0;
  /// Critic objective (variational mode), in D_f units.
  double critic_objective = 0.0;
};

struct EvalSnapshot {
  int step = 0;
  std::vector<double> accuracy;  // indexed by concept id
};

struct UnlearnResult {
  DenoiserNet net;
  std::vector<StepMetrics> metrics;
  std::vector<EvalSnapshot> evals;
  std::vector<GradLogRecord> grad_log;
  std::optional<Discriminator> critic;
};

UnlearnResult unlearn_closed_form(const DenoiserNet& base, const ConceptSet& concepts,
                                  const NoiseSchedule& schedule, const UnlearnConfig& config);

UnlearnResult unlearn_variational(const DenoiserNet& base, const ConceptSet& concepts,
                                  const NoiseSchedule& schedule, const UnlearnConfig& config);

/// Dispatches on config.mode.
UnlearnResult unlearn(const DenoiserNet& base, const ConceptSet& concepts,
                      const NoiseSchedule& schedule, const UnlearnConfig& config);

}  // namespace fdl
