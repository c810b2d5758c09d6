#include "fdl/lambert_w.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "fdl/errors.hpp"

namespace fdl {

namespace {

constexpr double kTol = 1e-12;
constexpr int kMaxIter = 100;

}  // namespace

double lambert_w0(double z) {
  const double branch_point = -1.0 / std::numbers::e;
  if (std::isnan(z) || z < branch_point) {
    throw DomainError("lambert_w0: argument below -1/e");
  }
  if (z == 0.0) return 0.0;
  if (z == branch_point) return -1.0;
  if (std::isinf(z)) return z;

  double w;
  if (z < 1.0) {
    // Series about the branch point keeps the start inside the basin.
    const double p = std::sqrt(2.0 * (std::numbers::e * z + 1.0));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else {
    const double l = std::log(z);
    w = l - std::log(std::max(l, 1.0));
  }

  for (int i = 0; i < kMaxIter; ++i) {
    const double ew = std::exp(w);
    const double f = w * ew - z;
    const double wp1 = w + 1.0;
    const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= step;
    if (std::abs(step) <= kTol * (1.0 + std::abs(w))) break;
  }
  return w;
}

double lambert_w0_exp(double x) {
  if (std::isnan(x)) throw DomainError("lambert_w0_exp: NaN argument");
  if (x < 1.0) return lambert_w0(std::exp(x));
  // Solve w + log(w) = x with Halley on h(w) = w + log w - x.
  double w = x - std::log(x);
  if (w <= 0.0) w = 1.0;
  for (int i = 0; i < kMaxIter; ++i) {
    const double h = w + std::log(w) - x;
    const double h1 = 1.0 + 1.0 / w;
    const double h2 = -1.0 / (w * w);
    const double step = h / (h1 - h * h2 / (2.0 * h1));
    w -= step;
    if (std::abs(step) <= kTol * (1.0 + std::abs(w))) break;
  }
  return w;
}

}  // namespace fdl
