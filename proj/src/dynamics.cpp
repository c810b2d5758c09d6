#include "fdl/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fdl/errors.hpp"

namespace fdl {

TractableGame::TractableGame(DivergenceName name, Gaussian target, int quadrature_nodes)
    : spec_(make_spec(name)), target_(std::move(target)), rule_(gauss_hermite(quadrature_nodes)) {
  if (!spec_.strictly_convex_conjugate()) {
    throw UnsupportedError(std::string(display_name(name)) +
                           " has no strictly convex conjugate; the stability analysis needs one");
  }
  if (target_.dim() > 2) throw DimensionMismatch("TractableGame: dimension 1 or 2");
  if ((target_.variance.array() != target_.variance(0)).any()) {
    throw std::invalid_argument("TractableGame: target must be isotropic");
  }
}

TractableGame TractableGame::scalar(DivergenceName name, double mu, double sigma) {
  return TractableGame(name, Gaussian::scalar(mu, sigma * sigma));
}

TractableGame TractableGame::planar(DivergenceName name) {
  return TractableGame(name, Gaussian(Eigen::Vector2d(0.5, -0.3), Eigen::Vector2d(1.0, 1.0)), 24);
}

Eigen::VectorXd TractableGame::equilibrium_phi() const { return target_.mean; }

Eigen::VectorXd TractableGame::equilibrium_omega() const {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(critic_params());
  w(0) = spec_.activation_inverse(spec_.f_prime_at_1());
  return w;
}

Eigen::VectorXd DynState::packed() const {
  Eigen::VectorXd v(phi.size() + omega.size());
  v << phi, omega;
  return v;
}

namespace {

DynState unpack(const Eigen::VectorXd& v, Eigen::Index d, double time) {
  return {v.head(d), v.tail(v.size() - d), time};
}

Eigen::VectorXd packed_rhs(const TractableGame& game, const DynState& s) {
  const FlowRhs r = flow_rhs(game, s);
  Eigen::VectorXd v(r.phi_dot.size() + r.omega_dot.size());
  v << r.phi_dot, r.omega_dot;
  return v;
}

double critic_raw(const Eigen::VectorXd& omega, const Eigen::VectorXd& x) {
  return omega(0) + omega.tail(x.size()).dot(x);
}

}  // namespace

FlowRhs flow_rhs(const TractableGame& game, const DynState& state) {
  const int d = game.dim();
  const int p = game.critic_params();
  if (state.phi.size() != d || state.omega.size() != p) {
    throw DimensionMismatch("flow_rhs: state does not match the game");
  }
  const DivergenceSpec& spec = game.spec();
  const double var = game.sigma() * game.sigma();
  Eigen::VectorXd feat(p);
  feat(0) = 1.0;

  const Eigen::VectorXd from_p = game.expect(game.target().mean, p, [&](const Eigen::VectorXd& x) {
    feat.tail(d) = x;
    return Eigen::VectorXd(spec.activation_prime(critic_raw(state.omega, x)) * feat);
  });
  const Eigen::VectorXd from_q = game.expect(state.phi, d + p, [&](const Eigen::VectorXd& x) {
    const double v = critic_raw(state.omega, x);
    const double t = spec.activation(v);
    if (!spec.f_star_domain().contains(t)) {
      throw DomainError("flow_rhs: critic value " + std::to_string(t) + " outside dom(f*)");
    }
    feat.tail(d) = x;
    Eigen::VectorXd out(d + p);
    out.head(d) = (x - state.phi) / var * spec.f_star(t);
    out.tail(p) = spec.f_star_prime(t) * spec.activation_prime(v) * feat;
    return out;
  });
  return {from_q.head(d), from_p - from_q.tail(p)};
}

std::vector<DynState> integrate(const TractableGame& game, const DynState& initial,
                                double horizon, double dt, int record_every) {
  if (!(dt > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("integrate: dt > 0, horizon >= 0");
  if (record_every < 1) throw std::invalid_argument("integrate: record_every >= 1");
  const Eigen::Index d = initial.phi.size();
  const long steps = std::lround(horizon / dt);
  Eigen::VectorXd y = initial.packed();
  std::vector<DynState> out{initial};
  double t = initial.time;
  for (long k = 1; k <= steps; ++k) {
    const Eigen::VectorXd k1 = packed_rhs(game, unpack(y, d, t));
    const Eigen::VectorXd k2 = packed_rhs(game, unpack(y + 0.5 * dt * k1, d, t + 0.5 * dt));
    const Eigen::VectorXd k3 = packed_rhs(game, unpack(y + 0.5 * dt * k2, d, t + 0.5 * dt));
    const Eigen::VectorXd k4 = packed_rhs(game, unpack(y + dt * k3, d, t + dt));
    y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = initial.time + static_cast<double>(k) * dt;
    if (!y.allFinite() || y.norm() > 1e6) {
      throw TrainingFailure("integrate: blow-up at t = " + std::to_string(t));
    }
    if (k % record_every == 0 || k == steps) out.push_back(unpack(y, d, t));
  }
  return out;
}

bool JacobianReport::hurwitz() const {
  return std::all_of(eigenvalues.begin(), eigenvalues.end(),
                     [](const std::complex<double>& l) { return l.real() < 0.0; });
}

JacobianReport jacobian_at_equilibrium(const TractableGame& game, double h) {
  const int d = game.dim();
  const int p = game.critic_params();
  const int n = d + p;
  const DynState eq{game.equilibrium_phi(), game.equilibrium_omega(), 0.0};
  JacobianReport rep;
  rep.equilibrium_residual = packed_rhs(game, eq).cwiseAbs().maxCoeff();
  if (rep.equilibrium_residual > 1e-6) {
    throw std::runtime_error("jacobian_at_equilibrium: residual " +
                             std::to_string(rep.equilibrium_residual) + " exceeds 1e-6");
  }

  const Eigen::VectorXd y0 = eq.packed();
  rep.jacobian.resize(n, n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd up = y0, down = y0;
    up(j) += h;
    down(j) -= h;
    rep.jacobian.col(j) =
        (packed_rhs(game, unpack(up, d, 0.0)) - packed_rhs(game, unpack(down, d, 0.0))) / (2.0 * h);
  }
  rep.k_tp_fd = -rep.jacobian.topRightCorner(d, p);
  rep.k_tt_fd = rep.jacobian.bottomRightCorner(p, p);
  rep.top_left_norm = rep.jacobian.topLeftCorner(d, d).cwiseAbs().maxCoeff();
  rep.antisymmetry_error =
      (rep.jacobian.topRightCorner(d, p) + rep.jacobian.bottomLeftCorner(p, d).transpose())
          .cwiseAbs()
          .maxCoeff();

  // Integral forms at the equilibrium, where (f*)'(T*) = 1 and g' is constant.
  const DivergenceSpec& spec = game.spec();
  const double v_star = eq.omega(0);
  const double gp = spec.activation_prime(v_star);
  const double c = spec.f_star_double_prime(spec.activation(v_star));
  const Eigen::VectorXd mu = game.target().mean;
  const double var = game.sigma() * game.sigma();
  const Eigen::VectorXd flat = game.expect(mu, d * p + p * p, [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd feat(p);
    feat << 1.0, x;
    Eigen::VectorXd out(d * p + p * p);
    Eigen::Map<Eigen::MatrixXd>(out.data(), d, p) = (-(x - mu) / var) * (gp * feat).transpose();
    Eigen::Map<Eigen::MatrixXd>(out.data() + d * p, p, p) = -c * gp * gp * feat * feat.transpose();
    return out;
  });
  rep.k_tp = Eigen::Map<const Eigen::MatrixXd>(flat.data(), d, p);
  rep.k_tt = Eigen::Map<const Eigen::MatrixXd>(flat.data() + d * p, p, p);
  rep.k_tt_mismatch = (rep.k_tt - rep.k_tt_fd).cwiseAbs().maxCoeff();
  rep.k_tp_mismatch = (rep.k_tp - rep.k_tp_fd).cwiseAbs().maxCoeff();
  rep.k_tt_symmetry_error = (rep.k_tt_fd - rep.k_tt_fd.transpose()).cwiseAbs().maxCoeff();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(rep.k_tp);
  const Eigen::VectorXd sv = svd.singularValues();
  rep.k_tp_rank = static_cast<int>((sv.array() > 1e-8 * sv.maxCoeff()).count());
  rep.k_tp_full_row_rank = rep.k_tp_rank == d;

  Eigen::EigenSolver<Eigen::MatrixXd> es(rep.jacobian);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) rep.eigenvalues.push_back(es.eigenvalues()(i));

  const Eigen::MatrixXd neg_tt = -0.5 * (rep.k_tt + rep.k_tt.transpose());
  const Eigen::VectorXd tt_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(neg_tt).eigenvalues();
  const Eigen::VectorXd pp_eig =
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(rep.k_tp * rep.k_tp.transpose()).eigenvalues();
  const double lm_tt = tt_eig.minCoeff();
  const double lM_tt = tt_eig.maxCoeff();
  const double lm_pp = pp_eig.minCoeff();
  rep.bounds.real_bound_im0 = -lm_tt * lm_pp / (lm_tt * lM_tt + lm_pp);
  rep.bounds.real_bound_imneq0 = -lm_tt / 2.0;
  rep.bounds.min_slack = std::numeric_limits<double>::infinity();
  for (const auto& l : rep.eigenvalues) {
    const bool real = std::abs(l.imag()) <= 1e-9 * std::max(1.0, std::abs(l));
    const double bound = real ? rep.bounds.real_bound_im0 : rep.bounds.real_bound_imneq0;
    rep.bounds.min_slack = std::min(rep.bounds.min_slack, bound - l.real());
  }
  return rep;
}

double fit_decay_rate(const std::vector<double>& times, const std::vector<double>& distances,
                      double tail_fraction) {
  if (times.size() != distances.size() || times.size() < 2) {
    throw std::invalid_argument("fit_decay_rate: need >= 2 matching points");
  }
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) {
    throw std::invalid_argument("fit_decay_rate: tail_fraction in (0, 1]");
  }
  const double start = times.back() - tail_fraction * (times.back() - times.front());
  double n = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < start) continue;
    if (!(distances[i] > 0.0)) throw std::invalid_argument("fit_decay_rate: distances must be > 0");
    const double y = std::log(distances[i]);
    n += 1;
    st += times[i];
    sy += y;
    stt += times[i] * times[i];
    sty += times[i] * y;
  }
  const double denom = n * stt - st * st;
  if (n < 2 || denom <= 0.0) throw std::invalid_argument("fit_decay_rate: degenerate tail");
  return -(n * sty - st * sy) / denom;
}

double distance_to_equilibrium(const TractableGame& game, const DynState& state) {
  const DynState eq{game.equilibrium_phi(), game.equilibrium_omega(), 0.0};
  return (state.packed() - eq.packed()).norm();
}

std::vector<RankingRow> speed_ranking_experiment(const std::vector<DivergenceName>& divergences,
                                                 const RankingOptions& options) {
  std::vector<RankingRow> rows;
  for (DivergenceName name : divergences) {
    const TractableGame game = TractableGame::scalar(name, options.mu, options.sigma);
    DynState start{game.equilibrium_phi(), game.equilibrium_omega(), 0.0};
    start.phi(0) += options.perturbation;
    const int every = std::max(1, static_cast<int>(std::lround(0.05 / options.dt)));
    const std::vector<DynState> traj = integrate(game, start, options.horizon, options.dt, every);
    std::vector<double> ts, ds;
    for (const DynState& s : traj) {
      ts.push_back(s.time);
      ds.push_back(distance_to_equilibrium(game, s));
    }
    if (!(ds.back() < ds.front())) {
      throw TrainingFailure(std::string(display_name(name)) + ": trajectory did not contract (" +
                            std::to_string(ds.front()) + " -> " + std::to_string(ds.back()) + ")");
    }
    rows.push_back({name, fit_decay_rate(ts, ds), convergence_speed_index(game.spec())});
  }
  return rows;
}

}  // namespace fdl
