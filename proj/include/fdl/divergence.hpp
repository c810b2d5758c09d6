#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>

namespace fdl {

enum class DivergenceName {
  KL,
  ReverseKL,
  SquaredHellinger,
  JensenShannon,
  GAN,
  PearsonChi2,
  Jeffreys,
  TotalVariation,
};

inline constexpr std::array<DivergenceName, 8> kAllDivergences = {
    DivergenceName::KL,          DivergenceName::ReverseKL,
    DivergenceName::SquaredHellinger, DivergenceName::JensenShannon,
    DivergenceName::GAN,         DivergenceName::PearsonChi2,
    DivergenceName::Jeffreys,    DivergenceName::TotalVariation,
};

/// Canonical CLI token: kl, rkl, hellinger2, js, gan, chi2, jeffreys, tv.
std::string_view cli_name(DivergenceName name);
std::string_view display_name(DivergenceName name);
/// Inverse of cli_name. Throws std::invalid_argument for unknown tokens.
DivergenceName parse_divergence(std::string_view token);

/// Interval with open ends unless `closed` is set; either bound may be infinite.
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool closed = false;

  bool contains(double t) const {
    return closed ? (t >= lower && t <= upper) : interior(t);
  }
  bool interior(double t) const { return t > lower && t < upper; }
};

/// One f-divergence: generator f, its Fenchel conjugate f*, and the output
/// activation g_f mapping a raw critic value into dom(f*).
///
/// All members are pure functions of the divergence name, so a spec is a
/// cheap immutable value. Conjugate evaluations outside the open domain throw
/// DomainError instead of saturating.
class DivergenceSpec {
 public:
  explicit DivergenceSpec(DivergenceName name);

  DivergenceName name() const { return name_; }

  double f(double u) const;
  double f_prime(double u) const;
  double f_double_prime(double u) const;
  /// f''(1); NaN for TotalVariation (kink at 1).
  double f_double_prime_at_1() const { return f2_at_1_; }
  /// f'(1), the optimal critic value when p = q.
  double f_prime_at_1() const;

  double f_star(double t) const;
  double f_star_prime(double t) const;
  double f_star_double_prime(double t) const;
  const Interval& f_star_domain() const { return domain_; }

  double activation(double v) const;
  double activation_prime(double v) const;
  /// Inverse of the output activation; requires t in the activation's range.
  double activation_inverse(double t) const;

  /// Factor mapping D_f under this generator to the conventional value of the
  /// named divergence (1/2 for squared Hellinger, whose generator integrates to
  /// 2(1 - BC)).
  double scale() const { return scale_; }

  bool is_bounded() const { return bound_.has_value(); }
  std::optional<double> bound() const { return bound_; }
  bool strictly_convex_conjugate() const {
    return name_ != DivergenceName::TotalVariation;
  }

 private:
  void require_in_domain(double t, const char* what) const;

  DivergenceName name_;
  double f2_at_1_;
  double scale_;
  Interval domain_;
  std::optional<double> bound_;
};

DivergenceSpec make_spec(DivergenceName name);
DivergenceSpec make_spec(std::string_view cli_token);

/// |(f*)'(f'(u)) - u|. Throws DomainError if f'(u) leaves the open domain.
double check_conjugate_identity(const DivergenceSpec& spec, double u);

/// 1 / f''(1). Throws UnsupportedError for TotalVariation.
double convergence_speed_index(const DivergenceSpec& spec);

/// scale * (f(0) + f⋆(0)) when both limits are finite, with f⋆(0) =
/// lim_{u->inf} f(u)/u.
std::optional<double> boundedness(const DivergenceSpec& spec);

}  // namespace fdl
