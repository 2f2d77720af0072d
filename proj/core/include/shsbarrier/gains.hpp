#pragma once

#include <string>

namespace shs {

/// Closed-form scalar gain function on the nonnegative half line.
///
/// Three shapes cover every gain used by the toolkit: the zero function,
/// s -> a*s, and s -> a*s^b with a > 0, b > 0. The linear and power shapes
/// are class-K-infinity; the zero shape stands in for an absent gain.
struct ScalarGainFunction {
  enum class Kind { zero, linear, power };

  Kind kind = Kind::zero;
  double scale = 0.0;
  double exponent = 1.0;  // only meaningful for Kind::power

  static ScalarGainFunction zero();
  static ScalarGainFunction linear(double a);
  static ScalarGainFunction power(double a, double b);
  static ScalarGainFunction identity() { return linear(1.0); }

  double operator()(double s) const;

  /// Inverse on s >= 0. Rejects negative arguments and the zero kind.
  double inverse(double s) const;

  bool is_zero() const { return kind == Kind::zero; }
  bool is_class_k_infinity() const { return kind != Kind::zero && scale > 0; }
  /// Concave on the half line (power exponent <= 1), hence subadditive.
  bool is_concave() const;

  /// Largest c with f(s) >= c*s for all s in [0, s_max]. Throws when no
  /// positive c exists (power kind with exponent > 1 near zero).
  double linear_lower_bound(double s_max) const;

  std::string to_string() const;
  bool operator==(const ScalarGainFunction&) const = default;
};

}  // namespace shs
