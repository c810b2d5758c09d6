#pragma once

#include <Eigen/Dense>
#include <functional>

#include "fdl/divergence.hpp"
#include "fdl/gaussian.hpp"

namespace fdl {

/// Adaptive Simpson on [a, b] to absolute tolerance `tol`. Throws
/// OracleFailure when a panel still fails the error test at `max_depth`, or
/// when the integrand returns a non-finite value.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth = 40);

/// scale * int q f(p/q) dx for 1-D Gaussians over
/// [min(mu) - 10 max(sigma), max(mu) + 10 max(sigma)], tolerance 1e-9.
/// Independent of the closed forms in gaussian.hpp.
double quadrature_divergence(const DivergenceSpec& spec, const Gaussian& p,
                             const Gaussian& q);

/// Probabilists' Gauss-Hermite rule: E_{N(0,1)}[h] ~= sum w_i h(x_i).
/// Nodes from the symmetric Jacobi matrix (Golub-Welsch).
struct GaussHermite {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

GaussHermite gauss_hermite(int n);

}  // namespace fdl
