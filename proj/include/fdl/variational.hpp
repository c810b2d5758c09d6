#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "fdl/divergence.hpp"
#include "fdl/gaussian.hpp"
#include "fdl/mlp.hpp"

namespace fdl {

/// Critic T(x) = g_f(V_omega(x)) with V a tanh MLP (two hidden layers).
struct Discriminator {
  Mlp<double> net;
  Eigen::VectorXd omega;

  static Discriminator make(int input_dim, std::uint64_t seed, int width = 64);

  /// Raw critic V(x) for column samples; returns a row vector.
  Eigen::RowVectorXd raw(const Eigen::MatrixXd& x) const;
};

struct VariationalEstimate {
  double value = 0.0;
  int discriminator_steps = 0;
  /// Running mean of the last `smoothing` objective values, scaled to the named
  /// divergence; value == lower_bound_trace.back().
  std::vector<double> lower_bound_trace;
  /// Raw per-minibatch objective in D_f units.
  std::vector<double> objective_trace;
};

struct EstimatorOptions {
  int steps = 2000;
  double learning_rate = 1e-3;
  int batch_size = 512;
  int smoothing = 100;
  int width = 64;
  std::uint64_t seed = 0;
};

/// mean_p[g_f(V)] - mean_q[f*(g_f(V))], in D_f units (not scaled).
/// Throws DomainError when a critic output leaves dom(f*) or f* overflows.
double variational_objective(const DivergenceSpec& spec, const Discriminator& critic,
                             const Eigen::MatrixXd& samples_p,
                             const Eigen::MatrixXd& samples_q);

struct ObjectiveGradient {
  double value = 0.0;
  Eigen::VectorXd d_omega;
};

ObjectiveGradient variational_objective_gradient(const DivergenceSpec& spec,
                                                 const Discriminator& critic,
                                                 const Eigen::MatrixXd& samples_p,
                                                 const Eigen::MatrixXd& samples_q);

/// Ascends the objective on minibatches drawn from the two sample pools and
/// returns the smoothed final value times spec.scale(). The trained critic is
/// written to `trained` when non-null.
VariationalEstimate fit_estimate(const DivergenceSpec& spec,
                                 const Eigen::MatrixXd& samples_p,
                                 const Eigen::MatrixXd& samples_q,
                                 const EstimatorOptions& options,
                                 Discriminator* trained = nullptr);

/// Mean |g_f(V(x)) - f'(p(x)/q(x))| over grid points with |x - mu_P| <= 3 sigma_P.
double optimal_critic_residual(const DivergenceSpec& spec, const Discriminator& critic,
                               const Gaussian& p, const Gaussian& q,
                               const Eigen::VectorXd& grid);

}  // namespace fdl

namespace fdl {

/// Objective value and its derivative w.r.t. each raw critic output, given the
/// critic's raw values on the p batch and the q batch.
struct CriticTerms {
  double value = 0.0;
  Eigen::RowVectorXd d_raw_p;
  Eigen::RowVectorXd d_raw_q;
};

CriticTerms critic_terms(const DivergenceSpec& spec, const Eigen::RowVectorXd& raw_p,
                         const Eigen::RowVectorXd& raw_q);

}  // namespace fdl
