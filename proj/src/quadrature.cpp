#include "fdl/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "fdl/errors.hpp"

namespace fdl {

namespace {

struct Panel {
  double a, m, b;
  double fa, fm, fb;
  double whole;
};

double checked(const std::function<double(double)>& f, double x) {
  const double y = f(x);
  if (!std::isfinite(y)) {
    throw OracleFailure("adaptive_simpson: non-finite integrand at x = " +
                        std::to_string(x));
  }
  return y;
}

double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double refine(const std::function<double(double)>& f, const Panel& p,
              double tol, int depth, int max_depth) {
  const double lm = 0.5 * (p.a + p.m);
  const double rm = 0.5 * (p.m + p.b);
  const double flm = checked(f, lm);
  const double frm = checked(f, rm);
  const double left = simpson(p.a, p.m, p.fa, flm, p.fm);
  const double right = simpson(p.m, p.b, p.fm, frm, p.fb);
  const double delta = left + right - p.whole;
  if (std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  if (depth >= max_depth) {
    throw OracleFailure("adaptive_simpson: no convergence at depth " +
                        std::to_string(max_depth));
  }
  return refine(f, {p.a, lm, p.m, p.fa, flm, p.fm, left}, 0.5 * tol, depth + 1,
                max_depth) +
         refine(f, {p.m, rm, p.b, p.fm, frm, p.fb, right}, 0.5 * tol, depth + 1,
                max_depth);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double b, double tol, int max_depth) {
  // Start from a fixed partition so narrow peaks are not missed by the first
  // five-point estimate.
  constexpr int kPanels = 64;
  const double h = (b - a) / kPanels;
  double total = 0.0;
  for (int i = 0; i < kPanels; ++i) {
    const double pa = a + i * h;
    const double pb = (i + 1 == kPanels) ? b : pa + h;
    const double pm = 0.5 * (pa + pb);
    const double fa = checked(f, pa);
    const double fm = checked(f, pm);
    const double fb = checked(f, pb);
    total += refine(f, {pa, pm, pb, fa, fm, fb, simpson(pa, pb, fa, fm, fb)},
                    tol / kPanels, 0, max_depth);
  }
  return total;
}

double quadrature_divergence(const DivergenceSpec& spec, const Gaussian& p,
                             const Gaussian& q) {
  if (p.dim() != 1 || q.dim() != 1) {
    throw DimensionMismatch("quadrature_divergence: 1-D Gaussians only");
  }
  const double mp = p.mean(0), mq = q.mean(0);
  const double sp = std::sqrt(p.variance(0)), sq = std::sqrt(q.variance(0));
  const double smax = std::max(sp, sq);
  const double lo = std::min(mp, mq) - 10.0 * smax;
  const double hi = std::max(mp, mq) + 10.0 * smax;
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);

  auto integrand = [&](double x) {
    const double zp = (x - mp) / sp;
    const double zq = (x - mq) / sq;
    const double dp = norm / sp * std::exp(-0.5 * zp * zp);
    const double dq = norm / sq * std::exp(-0.5 * zq * zq);
    if (dq == 0.0) return 0.0;
    return dq * spec.f(dp / dq);
  };
  return spec.scale() * adaptive_simpson(integrand, lo, hi, 1e-9);
}

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n >= 1");
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  GaussHermite rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = eig.eigenvectors().row(0).transpose().array().square();
  return rule;
}

}  // namespace fdl
