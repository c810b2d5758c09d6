#pragma once

#include <Eigen/Dense>
#include <complex>
#include <vector>

#include "fdl/divergence.hpp"
#include "fdl/gaussian.hpp"
#include "fdl/quadrature.hpp"

namespace fdl {

/// Min-max game J(phi, omega) = E_p[T(x)] - E_q[f*(T(x))] with target
/// p = N(mu*, sigma^2 I), generator q = N(phi, sigma^2 I) and affine critic
/// T = g_f(omega_0 + omega_1 . x). Expectations use tensor Gauss-Hermite
/// rules, so the flow is deterministic.
class TractableGame {
 public:
  /// Throws UnsupportedError when f* is not strictly convex (TV).
  TractableGame(DivergenceName name, Gaussian target, int quadrature_nodes = 40);

  /// x in R, mu* = 0.5, sigma = 1.
  static TractableGame scalar(DivergenceName name, double mu = 0.5, double sigma = 1.0);
  /// x in R^2, mu* = (0.5, -0.3), sigma = 1.
  static TractableGame planar(DivergenceName name);

  const DivergenceSpec& spec() const { return spec_; }
  const Gaussian& target() const { return target_; }
  int dim() const { return static_cast<int>(target_.dim()); }
  int critic_params() const { return dim() + 1; }
  double sigma() const { return std::sqrt(target_.variance(0)); }

  /// phi* = mu*, omega* = (g_f^{-1}(f'(1)), 0, ...).
  Eigen::VectorXd equilibrium_phi() const;
  Eigen::VectorXd equilibrium_omega() const;

  /// E_{N(mean, sigma^2 I)}[h(x)] for h returning a vector of length `out`.
  template <typename H>
  Eigen::VectorXd expect(const Eigen::VectorXd& mean, Eigen::Index out, H&& h) const;

 private:
  DivergenceSpec spec_;
  Gaussian target_;
  GaussHermite rule_;
};

struct DynState {
  Eigen::VectorXd phi;
  Eigen::VectorXd omega;
  double time = 0.0;

  Eigen::VectorXd packed() const;
};

struct FlowRhs {
  Eigen::VectorXd phi_dot;
  Eigen::VectorXd omega_dot;
};

/// phi' = -grad_phi J, omega' = +grad_omega J. Throws DomainError if a critic
/// value on the quadrature grid leaves dom(f*).
FlowRhs flow_rhs(const TractableGame& game, const DynState& state);

/// Classical RK4. Returns every `record_every`-th state (plus the last one).
/// Throws TrainingFailure with the time stamp when |state| exceeds 1e6.
std::vector<DynState> integrate(const TractableGame& game, const DynState& initial,
                                double horizon, double dt, int record_every = 1);

struct EigenBounds {
  /// -l_m(-K_TT) l_m(K_TP K_TP^T) / (l_m(-K_TT) l_M(-K_TT) + l_m(K_TP K_TP^T)).
  double real_bound_im0 = 0.0;
  /// -l_m(-K_TT) / 2.
  double real_bound_imneq0 = 0.0;
  /// min over eigenvalues of (applicable bound - Re(lambda)).
  double min_slack = 0.0;
};

struct JacobianReport {
  Eigen::MatrixXd k_tp;      // from the integral definitions
  Eigen::MatrixXd k_tt;
  Eigen::MatrixXd k_tp_fd;   // from finite differences of the flow
  Eigen::MatrixXd k_tt_fd;
  Eigen::MatrixXd jacobian;  // finite-difference Jacobian of (phi', omega')
  std::vector<std::complex<double>> eigenvalues;
  EigenBounds bounds;
  double top_left_norm = 0.0;         // |d phi' / d phi|_max
  double antisymmetry_error = 0.0;    // |top-right + bottom-left^T|_max
  double k_tt_mismatch = 0.0;         // |K_TT - K_TT_fd|_max
  double k_tp_mismatch = 0.0;
  double k_tt_symmetry_error = 0.0;
  int k_tp_rank = 0;
  bool k_tp_full_row_rank = false;
  double equilibrium_residual = 0.0;

  bool hurwitz() const;
};

/// Central differences (h = 1e-5) of the flow at the equilibrium, assembled
/// with analytic blocks and the eigenvalue bounds. Throws std::runtime_error
/// when the equilibrium residual exceeds 1e-6.
JacobianReport jacobian_at_equilibrium(const TractableGame& game, double h = 1e-5);

/// -slope of a least-squares line through log(distance) over the last
/// `tail_fraction` of the time span.
double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& distances,
                      double tail_fraction = 0.6);

/// Euclidean distance of the packed state to the equilibrium.
double distance_to_equilibrium(const TractableGame& game, const DynState& state);

struct RankingRow {
  DivergenceName divergence;
  double decay_rate = 0.0;
  double speed_index = 0.0;
};

struct RankingOptions {
  double mu = 0.5;
  double sigma = 1.0;
  double perturbation = 0.1;  // added to phi*
  double horizon = 30.0;
  double dt = 1e-3;
};

/// One row per divergence on identical scalar games. Throws UnsupportedError
/// for TV and TrainingFailure when a trajectory does not contract.
std::vector<RankingRow> speed_ranking_experiment(const std::vector<DivergenceName>& divergences,
                                                 const RankingOptions& options = {});

template <typename H>
Eigen::VectorXd TractableGame::expect(const Eigen::VectorXd& mean, Eigen::Index out,
                                      H&& h) const {
  const Eigen::Index n = rule_.nodes.size();
  const int d = dim();
  const double s = sigma();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(out);
  Eigen::VectorXd x(d);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    double w = 1.0;
    for (int k = 0; k < d; ++k) {
      x(k) = mean(k) + s * rule_.nodes(idx[static_cast<std::size_t>(k)]);
      w *= rule_.weights(idx[static_cast<std::size_t>(k)]);
    }
    acc += w * h(x);
    int k = 0;
    while (k < d && ++idx[static_cast<std::size_t>(k)] == n) idx[static_cast<std::size_t>(k++)] = 0;
    if (k == d) break;
  }
  return acc;
}

}  // namespace fdl
