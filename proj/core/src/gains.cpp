#include "shsbarrier/gains.hpp"

#include <cmath>
#include <sstream>

#include "shsbarrier/errors.hpp"

namespace shs {

ScalarGainFunction ScalarGainFunction::zero() { return {}; }

ScalarGainFunction ScalarGainFunction::linear(double a) {
  if (!(a > 0)) throw InputError("linear gain needs scale > 0");
  return {Kind::linear, a, 1.0};
}

ScalarGainFunction ScalarGainFunction::power(double a, double b) {
  if (!(a > 0)) throw InputError("power gain needs scale > 0");
  if (!(b > 0)) throw InputError("power gain needs exponent > 0");
  return {Kind::power, a, b};
}

double ScalarGainFunction::operator()(double s) const {
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::linear:
      return scale * s;
    case Kind::power:
      if (s < 0) throw InputError("power gain applied to negative argument");
      return scale * std::pow(s, exponent);
  }
  return 0.0;
}

double ScalarGainFunction::inverse(double s) const {
  if (s < 0) throw InputError("gain inverse of a negative value");
  switch (kind) {
    case Kind::zero:
      throw InputError("zero gain is not invertible");
    case Kind::linear:
      return s / scale;
    case Kind::power:
      return std::pow(s / scale, 1.0 / exponent);
  }
  return 0.0;
}

bool ScalarGainFunction::is_concave() const {
  return kind != Kind::power || exponent <= 1.0;
}

double ScalarGainFunction::linear_lower_bound(double s_max) const {
  if (!(s_max > 0)) throw InputError("linear_lower_bound needs s_max > 0");
  switch (kind) {
    case Kind::zero:
      return 0.0;
    case Kind::linear:
      return scale;
    case Kind::power:
      if (exponent == 1.0) return scale;
      if (exponent > 1.0) {
        // f(s)/s -> 0 as s -> 0, so no positive linear minorant exists.
        throw InputError(
            "power gain with exponent > 1 has no linear lower bound near 0");
      }
      return scale * std::pow(s_max, exponent - 1.0);
  }
  return 0.0;
}

std::string ScalarGainFunction::to_string() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::zero:
      os << "0";
      break;
    case Kind::linear:
      os << scale << "*s";
      break;
    case Kind::power:
      os << scale << "*s^" << exponent;
      break;
  }
  return os.str();
}

}  // namespace shs
