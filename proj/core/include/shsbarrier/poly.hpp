#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

namespace shs {

/// Sparse multivariate polynomial over named real variables.
///
/// Terms are kept in a map from exponent vector to coefficient. The map's
/// lexicographic key order is the canonical term order used for evaluation
/// and serialization, so identical polynomials always evaluate and print
/// identically. Normalization drops terms whose coefficient is exactly zero.
/// Instances are immutable in spirit: every operation returns a new value,
/// and shared instances are safe to read concurrently.
class Polynomial {
 public:
  using Exponents = std::vector<int>;
  using TermMap = std::map<Exponents, double>;

  Polynomial() = default;
  explicit Polynomial(std::vector<std::string> variables);

  static Polynomial constant(std::vector<std::string> variables, double value);
  static Polynomial variable(std::vector<std::string> variables,
                             const std::string& name);
  /// Univariate helper: coefficients listed from degree 0 upward.
  static Polynomial univariate(const std::string& var,
                               std::span<const double> coeffs_low_to_high);

  const std::vector<std::string>& variables() const { return vars_; }
  const TermMap& terms() const { return terms_; }
  std::size_t variable_count() const { return vars_.size(); }
  bool is_zero() const { return terms_.empty(); }
  int total_degree() const;
  int degree_in(const std::string& var) const;

  /// Sum of coeff * prod x_i^e_i accumulated in canonical term order.
  double eval(std::span<const double> point) const;

  /// Exact symbolic partial derivative with respect to a declared variable.
  Polynomial partial(const std::string& var) const;

  /// Substitutes every variable by a polynomial over `target_vars` and
  /// expands. Variables without an entry in `subs` get the identity
  /// substitution (they must then exist in the target space).
  Polynomial substitute(const std::map<std::string, Polynomial>& subs,
                        const std::vector<std::string>& target_vars) const;

  /// Convenience wrapper keeping the variable space: identity for missing
  /// entries. This is the shift/composition entry point used for jump terms.
  Polynomial compose_shift(const std::map<std::string, Polynomial>& subs) const;

  /// Re-expresses the polynomial over a superset of its variables.
  Polynomial embed(const std::vector<std::string>& superset) const;

  /// Re-expresses the polynomial over a subset of its variables; the dropped
  /// variables must not occur in any term.
  Polynomial shrink(const std::vector<std::string>& subset) const;

  /// True if every term has exponent zero outside the given variable set.
  bool uses_only(const std::vector<std::string>& allowed) const;

  void add_term(const Exponents& exps, double coeff);

  Polynomial operator-() const;
  Polynomial& operator+=(const Polynomial& rhs);
  Polynomial& operator-=(const Polynomial& rhs);
  Polynomial& operator*=(const Polynomial& rhs);
  Polynomial& operator*=(double scalar);
  friend Polynomial operator+(Polynomial lhs, const Polynomial& rhs) {
    lhs += rhs;
    return lhs;
  }
  friend Polynomial operator-(Polynomial lhs, const Polynomial& rhs) {
    lhs -= rhs;
    return lhs;
  }
  friend Polynomial operator*(Polynomial lhs, const Polynomial& rhs) {
    lhs *= rhs;
    return lhs;
  }
  friend Polynomial operator*(Polynomial lhs, double scalar) {
    lhs *= scalar;
    return lhs;
  }
  friend Polynomial operator*(double scalar, Polynomial rhs) {
    rhs *= scalar;
    return rhs;
  }

  bool operator==(const Polynomial& rhs) const {
    return vars_ == rhs.vars_ && terms_ == rhs.terms_;
  }

  /// Term-wise comparison with absolute tolerance on each coefficient.
  bool approx_equal(const Polynomial& rhs, double tol) const;

  std::string to_string() const;

 private:
  void check_same_space(const Polynomial& rhs) const;
  std::vector<std::string> vars_;
  TermMap terms_;
};

}  // namespace shs
