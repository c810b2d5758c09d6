#include "fdl/divergence.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fdl/errors.hpp"
#include "fdl/lambert_w.hpp"

namespace fdl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kLn2 = std::numbers::ln2;

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// u log u with the continuous extension 0 log 0 = 0.
double xlogx(double u) { return u == 0.0 ? 0.0 : u * std::log(u); }

void require_nonnegative(double u) {
  if (!(u >= 0.0)) throw DomainError("generator evaluated at negative ratio");
}

void require_positive(double u) {
  if (!(u > 0.0)) throw DomainError("generator derivative requires u > 0");
}

}  // namespace

std::string_view cli_name(DivergenceName name) {
  switch (name) {
    case DivergenceName::KL: return "kl";
    case DivergenceName::ReverseKL: return "rkl";
    case DivergenceName::SquaredHellinger: return "hellinger2";
    case DivergenceName::JensenShannon: return "js";
    case DivergenceName::GAN: return "gan";
    case DivergenceName::PearsonChi2: return "chi2";
    case DivergenceName::Jeffreys: return "jeffreys";
    case DivergenceName::TotalVariation: return "tv";
  }
  return "?";
}

std::string_view display_name(DivergenceName name) {
  switch (name) {
    case DivergenceName::KL: return "Kullback-Leibler";
    case DivergenceName::ReverseKL: return "Reverse Kullback-Leibler";
    case DivergenceName::SquaredHellinger: return "Squared Hellinger";
    case DivergenceName::JensenShannon: return "Jensen-Shannon";
    case DivergenceName::GAN: return "GAN";
    case DivergenceName::PearsonChi2: return "Pearson chi^2";
    case DivergenceName::Jeffreys: return "Jeffreys";
    case DivergenceName::TotalVariation: return "Total Variation";
  }
  return "?";
}

DivergenceName parse_divergence(std::string_view token) {
  for (auto name : kAllDivergences) {
    if (cli_name(name) == token) return name;
  }
  throw std::invalid_argument("unknown divergence '" + std::string(token) +
                              "' (expected kl, rkl, hellinger2, js, gan, chi2, "
                              "jeffreys or tv)");
}

DivergenceSpec::DivergenceSpec(DivergenceName name)
    : name_(name), f2_at_1_(kNaN), scale_(1.0) {
  switch (name) {
    case DivergenceName::KL:
      f2_at_1_ = 1.0;
      break;
    case DivergenceName::ReverseKL:
      f2_at_1_ = 1.0;
      domain_ = {-kInf, 0.0};
      break;
    case DivergenceName::SquaredHellinger:
      f2_at_1_ = 0.5;
      scale_ = 0.5;
      domain_ = {-kInf, 1.0};
      bound_ = scale_ * (1.0 + 1.0);
      break;
    case DivergenceName::JensenShannon:
      f2_at_1_ = 0.5;
      domain_ = {-kInf, kLn2};
      bound_ = kLn2 + kLn2;
      break;
    case DivergenceName::GAN:
      f2_at_1_ = 0.5;
      domain_ = {-kInf, 0.0};
      bound_ = 0.0 + 0.0;
      break;
    case DivergenceName::PearsonChi2:
      f2_at_1_ = 2.0;
      break;
    case DivergenceName::Jeffreys:
      f2_at_1_ = 2.0;
      break;
    case DivergenceName::TotalVariation:
      domain_ = {-0.5, 0.5, true};
      bound_ = 0.5 + 0.5;
      break;
  }
}

double DivergenceSpec::f(double u) const {
  require_nonnegative(u);
  switch (name_) {
    case DivergenceName::KL: return xlogx(u);
    case DivergenceName::ReverseKL: return u == 0.0 ? kInf : -std::log(u);
    case DivergenceName::SquaredHellinger: {
      const double r = std::sqrt(u) - 1.0;
      return r * r;
    }
    case DivergenceName::JensenShannon:
      return xlogx(u) - (u + 1.0) * std::log((u + 1.0) / 2.0);
    case DivergenceName::GAN: return xlogx(u) - xlogx(u + 1.0);
    case DivergenceName::PearsonChi2: return (u - 1.0) * (u - 1.0);
    case DivergenceName::Jeffreys:
      return u == 0.0 ? kInf : (u - 1.0) * std::log(u);
    case DivergenceName::TotalVariation: return 0.5 * std::abs(u - 1.0);
  }
  return kNaN;
}

double DivergenceSpec::f_prime(double u) const {
  require_positive(u);
  switch (name_) {
    case DivergenceName::KL: return std::log(u) + 1.0;
    case DivergenceName::ReverseKL: return -1.0 / u;
    case DivergenceName::SquaredHellinger: return 1.0 - 1.0 / std::sqrt(u);
    case DivergenceName::JensenShannon: return std::log(2.0 * u / (u + 1.0));
    case DivergenceName::GAN: return std::log(u / (u + 1.0));
    case DivergenceName::PearsonChi2: return 2.0 * (u - 1.0);
    case DivergenceName::Jeffreys: return std::log(u) + 1.0 - 1.0 / u;
    case DivergenceName::TotalVariation:
      if (u == 1.0) return 0.0;  // subgradient midpoint
      return u > 1.0 ? 0.5 : -0.5;
  }
  return kNaN;
}

double DivergenceSpec::f_double_prime(double u) const {
  require_positive(u);
  switch (name_) {
    case DivergenceName::KL: return 1.0 / u;
    case DivergenceName::ReverseKL: return 1.0 / (u * u);
    case DivergenceName::SquaredHellinger: return 0.5 / (u * std::sqrt(u));
    case DivergenceName::JensenShannon:
    case DivergenceName::GAN: return 1.0 / u - 1.0 / (u + 1.0);
    case DivergenceName::PearsonChi2: return 2.0;
    case DivergenceName::Jeffreys: return 1.0 / u + 1.0 / (u * u);
    case DivergenceName::TotalVariation: return u == 1.0 ? kNaN : 0.0;
  }
  return kNaN;
}

double DivergenceSpec::f_prime_at_1() const { return f_prime(1.0); }

void DivergenceSpec::require_in_domain(double t, const char* what) const {
  if (!domain_.contains(t)) {
    throw DomainError(std::string(what) + ": t = " + std::to_string(t) +
                      " outside the conjugate domain of " +
                      std::string(cli_name(name_)));
  }
}

double DivergenceSpec::f_star(double t) const {
  require_in_domain(t, "f_star");
  switch (name_) {
    case DivergenceName::KL: return std::exp(t - 1.0);
    case DivergenceName::ReverseKL: return -1.0 - std::log(-t);
    case DivergenceName::SquaredHellinger: return t / (1.0 - t);
    case DivergenceName::JensenShannon: return -std::log(2.0 - std::exp(t));
    case DivergenceName::GAN: return -std::log1p(-std::exp(t));
    case DivergenceName::PearsonChi2: return 0.25 * t * t + t;
    case DivergenceName::Jeffreys: {
      const double w = lambert_w0_exp(1.0 - t);
      return w + 1.0 / w + t - 2.0;
    }
    case DivergenceName::TotalVariation: return t;
  }
  return kNaN;
}

double DivergenceSpec::f_star_prime(double t) const {
  require_in_domain(t, "f_star_prime");
  switch (name_) {
    case DivergenceName::KL: return std::exp(t - 1.0);
    case DivergenceName::ReverseKL: return -1.0 / t;
    case DivergenceName::SquaredHellinger: {
      const double d = 1.0 - t;
      return 1.0 / (d * d);
    }
    case DivergenceName::JensenShannon: {
      const double e = std::exp(t);
      return e / (2.0 - e);
    }
    case DivergenceName::GAN: {
      const double e = std::exp(t);
      return e / (1.0 - e);
    }
    case DivergenceName::PearsonChi2: return 0.5 * t + 1.0;
    case DivergenceName::Jeffreys:
      // (f*)' = (f')^{-1}; solving log u + 1 - 1/u = t gives u = 1 / W(e^{1-t}).
      return 1.0 / lambert_w0_exp(1.0 - t);
    case DivergenceName::TotalVariation: return 1.0;
  }
  return kNaN;
}

double DivergenceSpec::f_star_double_prime(double t) const {
  require_in_domain(t, "f_star_double_prime");
  switch (name_) {
    case DivergenceName::KL: return std::exp(t - 1.0);
    case DivergenceName::ReverseKL: return 1.0 / (t * t);
    case DivergenceName::SquaredHellinger: {
      const double d = 1.0 - t;
      return 2.0 / (d * d * d);
    }
    case DivergenceName::JensenShannon: {
      const double e = std::exp(t);
      const double d = 2.0 - e;
      return 2.0 * e / (d * d);
    }
    case DivergenceName::GAN: {
      const double e = std::exp(t);
      const double d = 1.0 - e;
      return e / (d * d);
    }
    case DivergenceName::PearsonChi2: return 0.5;
    case DivergenceName::Jeffreys:
      return 1.0 / f_double_prime(f_star_prime(t));
    case DivergenceName::TotalVariation: return 0.0;
  }
  return kNaN;
}

double DivergenceSpec::activation(double v) const {
  switch (name_) {
    case DivergenceName::KL:
    case DivergenceName::PearsonChi2:
    case DivergenceName::Jeffreys: return v;
    case DivergenceName::ReverseKL: return -std::exp(-v);
    case DivergenceName::SquaredHellinger: return -std::expm1(-v);
    case DivergenceName::JensenShannon: return kLn2 - softplus(-v);
    case DivergenceName::GAN: return -softplus(-v);
    case DivergenceName::TotalVariation: return 0.5 * std::tanh(v);
  }
  return kNaN;
}

double DivergenceSpec::activation_prime(double v) const {
  switch (name_) {
    case DivergenceName::KL:
    case DivergenceName::PearsonChi2:
    case DivergenceName::Jeffreys: return 1.0;
    case DivergenceName::ReverseKL:
    case DivergenceName::SquaredHellinger: return std::exp(-v);
    case DivergenceName::JensenShannon:
    case DivergenceName::GAN: return sigmoid(-v);
    case DivergenceName::TotalVariation: {
      const double th = std::tanh(v);
      return 0.5 * (1.0 - th * th);
    }
  }
  return kNaN;
}

double DivergenceSpec::activation_inverse(double t) const {
  require_in_domain(t, "activation_inverse");
  switch (name_) {
    case DivergenceName::KL:
    case DivergenceName::PearsonChi2:
    case DivergenceName::Jeffreys: return t;
    case DivergenceName::ReverseKL: return -std::log(-t);
    case DivergenceName::SquaredHellinger: return -std::log1p(-t);
    case DivergenceName::JensenShannon: return -std::log(std::expm1(kLn2 - t));
    case DivergenceName::GAN: return -std::log(std::expm1(-t));
    case DivergenceName::TotalVariation: return std::atanh(2.0 * t);
  }
  return kNaN;
}

DivergenceSpec make_spec(DivergenceName name) { return DivergenceSpec(name); }

DivergenceSpec make_spec(std::string_view cli_token) {
  return DivergenceSpec(parse_divergence(cli_token));
}

double check_conjugate_identity(const DivergenceSpec& spec, double u) {
  const double t = spec.f_prime(u);
  if (!spec.f_star_domain().interior(t)) {
    throw DomainError("check_conjugate_identity: f'(u) outside the interior of the conjugate domain");
  }
  return std::abs(spec.f_star_prime(t) - u);
}

double convergence_speed_index(const DivergenceSpec& spec) {
  const double f2 = spec.f_double_prime_at_1();
  if (!(f2 > 0.0)) {
    throw UnsupportedError("convergence_speed_index: f''(1) undefined for " +
                           std::string(cli_name(spec.name())));
  }
  return 1.0 / f2;
}

std::optional<double> boundedness(const DivergenceSpec& spec) {
  return spec.bound();
}

}  // namespace fdl
