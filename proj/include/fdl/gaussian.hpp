#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "fdl/errors.hpp"

namespace fdl {

/// Gaussian with diagonal covariance. The closed forms below are the
/// multivariate normal expressions specialised to diagonal Sigma, so every
/// determinant, trace and quadratic form reduces to per-coordinate sums.
template <typename Scalar>
struct DiagonalGaussian {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Vector mean;
  Vector variance;

  DiagonalGaussian(Vector mu, Vector var)
      : mean(std::move(mu)), variance(std::move(var)) {
    if (mean.size() < 1 || mean.size() != variance.size()) {
      throw DimensionMismatch("DiagonalGaussian: mean/variance length mismatch");
    }
    if (!(variance.array() > Scalar(0)).all()) {
      throw std::invalid_argument("DiagonalGaussian: variances must be > 0");
    }
  }

  static DiagonalGaussian scalar(Scalar mu, Scalar var) {
    return DiagonalGaussian(Vector::Constant(1, mu), Vector::Constant(1, var));
  }

  Eigen::Index dim() const { return mean.size(); }

  Scalar log_density(const Vector& x) const {
    const Scalar log2pi = Scalar(std::log(2.0 * 3.14159265358979323846));
    const auto z = (x - mean).array();
    return Scalar(-0.5) * ((z * z / variance.array()).sum() +
                           variance.array().log().sum() + Scalar(dim()) * log2pi);
  }
};

using Gaussian = DiagonalGaussian<double>;

namespace detail {

template <typename Scalar>
void require_same_dim(const DiagonalGaussian<Scalar>& p,
                      const DiagonalGaussian<Scalar>& q) {
  if (p.dim() != q.dim()) {
    throw DimensionMismatch("gaussian divergence: dimensions " +
                            std::to_string(p.dim()) + " and " +
                            std::to_string(q.dim()));
  }
}

}  // namespace detail

template <typename Scalar>
Scalar kl(const DiagonalGaussian<Scalar>& p, const DiagonalGaussian<Scalar>& q) {
  detail::require_same_dim(p, q);
  const auto vp = p.variance.array();
  const auto vq = q.variance.array();
  const auto dmu = (p.mean - q.mean).array();
  return Scalar(0.5) * ((vq / vp).log().sum() - Scalar(p.dim()) +
                        (vp / vq).sum() + (dmu * dmu / vq).sum());
}

template <typename Scalar>
Scalar jeffreys(const DiagonalGaussian<Scalar>& p,
                const DiagonalGaussian<Scalar>& q) {
  detail::require_same_dim(p, q);
  const auto vp = p.variance.array();
  const auto vq = q.variance.array();
  const auto dmu = (p.mean - q.mean).array();
  return -Scalar(p.dim()) +
         Scalar(0.5) * ((vp / vq).sum() + (vq / vp).sum() +
                        (dmu * dmu * (Scalar(1) / vq + Scalar(1) / vp)).sum());
}

/// H^2 = 1 - BC(P, Q); lies in [0, 1).
template <typename Scalar>
Scalar hellinger2(const DiagonalGaussian<Scalar>& p,
                  const DiagonalGaussian<Scalar>& q) {
  detail::require_same_dim(p, q);
  const auto vp = p.variance.array();
  const auto vq = q.variance.array();
  const auto avg = (vp + vq) / Scalar(2);
  const auto dmu = (p.mean - q.mean).array();
  const Scalar log_bc = Scalar(0.25) * (vp.log().sum() + vq.log().sum()) -
                        Scalar(0.5) * avg.log().sum() -
                        Scalar(0.125) * (dmu * dmu / avg).sum();
  return -std::expm1(log_bc);
}

/// Pearson chi^2(P || Q). The diagonal case is the product of the per-coordinate
/// factors int p_i^2 / q_i, minus one; each factor needs 2 var_Q > var_P.
template <typename Scalar>
Scalar chi2(const DiagonalGaussian<Scalar>& p, const DiagonalGaussian<Scalar>& q) {
  detail::require_same_dim(p, q);
  Scalar log_prod(0);
  for (Eigen::Index i = 0; i < p.dim(); ++i) {
    const Scalar vp = p.variance(i);
    const Scalar vq = q.variance(i);
    const Scalar gap = Scalar(2) * vq - vp;
    if (!(gap > Scalar(0))) {
      throw DivergenceUndefined(
          "chi2: requires 2 var_Q > var_P in every coordinate (coordinate " +
          std::to_string(i) + ")");
    }
    const Scalar dmu = p.mean(i) - q.mean(i);
    log_prod += std::log(vq) - Scalar(0.5) * std::log(vp) -
                Scalar(0.5) * std::log(gap) + dmu * dmu / gap;
  }
  return std::expm1(log_prod);
}

template <typename Scalar>
Scalar mahalanobis(const DiagonalGaussian<Scalar>& p,
                   const DiagonalGaussian<Scalar>& q,
                   const typename DiagonalGaussian<Scalar>::Vector& shared_variance) {
  detail::require_same_dim(p, q);
  if (shared_variance.size() != p.dim()) {
    throw DimensionMismatch("mahalanobis: shared variance length");
  }
  if (!(shared_variance.array() > Scalar(0)).all()) {
    throw std::invalid_argument("mahalanobis: shared variance must be > 0");
  }
  const auto d = (q.mean - p.mean).array();
  return std::sqrt((d * d / shared_variance.array()).sum());
}

}  // namespace fdl
