#pragma once

#include <optional>
#include <span>
#include <vector>

#include "shsbarrier/gains.hpp"
#include "shsbarrier/model.hpp"
#include "shsbarrier/poly.hpp"

namespace shs {

/// Generator applied to a barrier, with the three summands kept apart.
struct GeneratorResult {
  Polynomial value;
  Polynomial drift_part;
  Polynomial diffusion_part;
  Polynomial jump_part;
};

/// Applies the infinitesimal generator of mode `p` to a barrier polynomial
/// in the subsystem's state variables:
///   drift_part     = grad(B) . f_p
///   diffusion_part = 1/2 Tr(sigma_p sigma_p^T Hess(B))
///   jump_part      = sum_j rate_j * (B(x + reset column j) - B(x))
/// The result lives over state+input+internal variables since the drift
/// depends on inputs.
GeneratorResult apply_generator(const Subsystem& sub, int mode,
                                const Polynomial& barrier);

/// A scalar gain applied to the value of an inner polynomial; `sign` is +1
/// or -1. Used to carry non-polynomial pieces (square-root gains) of a
/// condition alongside its polynomial part.
struct GainTerm {
  double sign = 1.0;
  ScalarGainFunction fn;
  Polynomial inner;
};

/// Polynomial expression plus tagged non-polynomial gain terms. Evaluates
/// as poly(x) + sum sign * fn(inner(x)).
struct ConditionExpr {
  Polynomial poly;
  std::vector<GainTerm> penalties;

  bool non_polynomial() const { return !penalties.empty(); }
  double eval(std::span<const double> point) const;
  const std::vector<std::string>& variables() const { return poly.variables(); }
};

/// Left-hand side of the mode-p decay condition, as an expression whose
/// nonpositivity over the state and internal input sets is the condition:
///   L(B_p) + sum_p' rate_pp' B_p' + kappa(B_p) - rho_int(|w|^2) - psi.
/// If a controller is given (or stored in the mode) it replaces the input
/// variables. Linear gains are folded into the polynomial part; power gains
/// become tagged penalties.
ConditionExpr assemble_drift_condition(
    const Subsystem& sub, int mode, const std::vector<Polynomial>& barriers,
    const ScalarGainFunction& kappa, const ScalarGainFunction& rho_int,
    double psi, const std::optional<std::vector<Polynomial>>& controller);

/// Squared Euclidean norm of the internal input as a polynomial over the
/// subsystem's full variable list.
Polynomial internal_norm_sq(const Subsystem& sub);

}  // namespace shs
