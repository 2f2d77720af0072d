#include "shsbarrier/generator.hpp"

#include "shsbarrier/errors.hpp"

namespace shs {

GeneratorResult apply_generator(const Subsystem& sub, int mode,
                                const Polynomial& barrier) {
  if (mode < 0 || mode >= sub.mode_count()) {
    throw InputError("mode index out of range");
  }
  auto sv = sub.state_vars();
  if (!barrier.uses_only(sv)) {
    throw InputError("barrier must be a polynomial in the state variables only");
  }
  const Polynomial b = barrier.embed(sv);
  const auto av = sub.all_vars();
  const Mode& md = sub.modes[mode];

  GeneratorResult out;
  out.drift_part = Polynomial(av);
  out.diffusion_part = Polynomial(av);
  out.jump_part = Polynomial(av);

  // grad(B) . f
  for (int k = 0; k < sub.state_dim; ++k) {
    Polynomial dk = b.partial(sv[k]).embed(av);
    out.drift_part += dk * md.drift[k].embed(av);
  }

  // 1/2 sum_{k,l} (sigma sigma^T)_{kl} d2B/dx_k dx_l, written as the
  // explicit double sum since per-subsystem dimensions stay small.
  const int bdim = sub.brownian_dim();
  if (bdim > 0) {
    for (int k = 0; k < sub.state_dim; ++k) {
      for (int l = 0; l < sub.state_dim; ++l) {
        Polynomial hess = b.partial(sv[k]).partial(sv[l]);
        if (hess.is_zero()) continue;
        Polynomial ssT(sv);
        for (int c = 0; c < bdim; ++c) {
          ssT += md.diffusion[k][c] * md.diffusion[l][c];
        }
        if (ssT.is_zero()) continue;
        out.diffusion_part += (hess * ssT * 0.5).embed(av);
      }
    }
  }

  // sum_j rate_j (B(x + reset column j) - B(x))
  for (int j = 0; j < sub.poisson_dim(); ++j) {
    if (sub.poisson_rates[j] == 0.0) continue;
    std::map<std::string, Polynomial> shift;
    bool nonzero = false;
    for (int k = 0; k < sub.state_dim; ++k) {
      const Polynomial& rk = md.reset[k][j];
      if (!rk.is_zero()) nonzero = true;
      shift.emplace(sv[k], Polynomial::variable(sv, sv[k]) + rk.embed(sv));
    }
    if (!nonzero) continue;
    Polynomial shifted = b.compose_shift(shift);
    out.jump_part += ((shifted - b) * sub.poisson_rates[j]).embed(av);
  }

  out.value = out.drift_part + out.diffusion_part + out.jump_part;
  return out;
}

double ConditionExpr::eval(std::span<const double> point) const {
  double v = poly.eval(point);
  for (const auto& term : penalties) {
    v += term.sign * term.fn(term.inner.eval(point));
  }
  return v;
}

Polynomial internal_norm_sq(const Subsystem& sub) {
  auto av = sub.all_vars();
  Polynomial sum(av);
  for (const auto& name : sub.internal_vars()) {
    Polynomial wi = Polynomial::variable(av, name);
    sum += wi * wi;
  }
  return sum;
}

ConditionExpr assemble_drift_condition(
    const Subsystem& sub, int mode, const std::vector<Polynomial>& barriers,
    const ScalarGainFunction& kappa, const ScalarGainFunction& rho_int,
    double psi, const std::optional<std::vector<Polynomial>>& controller) {
  if (static_cast<int>(barriers.size()) != sub.mode_count()) {
    throw InputError("need one barrier per mode");
  }
  const auto av = sub.all_vars();
  const auto sv = sub.state_vars();

  Polynomial lhs = apply_generator(sub, mode, barriers[mode]).value;

  // Mode coupling through the subsystem's own rate matrix.
  for (int q = 0; q < sub.mode_count(); ++q) {
    lhs += sub.transition_rates[mode][q].embed(av) * barriers[q].embed(av);
  }

  ConditionExpr expr;
  expr.poly = lhs;

  // kappa(B_p): linear folds in, power rides along as a penalty.
  const Polynomial b_here = barriers[mode].embed(av);
  switch (kappa.kind) {
    case ScalarGainFunction::Kind::zero:
      break;
    case ScalarGainFunction::Kind::linear:
      expr.poly += b_here * kappa.scale;
      break;
    case ScalarGainFunction::Kind::power:
      if (kappa.exponent == 1.0) {
        expr.poly += b_here * kappa.scale;
      } else {
        expr.penalties.push_back({+1.0, kappa, b_here});
      }
      break;
  }

  // -rho_int(|w|^2)
  if (!rho_int.is_zero() && sub.internal_dim() > 0) {
    Polynomial wsq = internal_norm_sq(sub);
    if (rho_int.kind == ScalarGainFunction::Kind::linear ||
        (rho_int.kind == ScalarGainFunction::Kind::power &&
         rho_int.exponent == 1.0)) {
      expr.poly -= wsq * rho_int.scale;
    } else {
      expr.penalties.push_back({-1.0, rho_int, wsq});
    }
  }

  expr.poly -= Polynomial::constant(av, psi);

  // Substitute the controller for the input variables when available.
  const std::optional<std::vector<Polynomial>>& ctrl =
      controller ? controller : sub.modes[mode].controller;
  if (ctrl) {
    if (static_cast<int>(ctrl->size()) != sub.input_dim()) {
      throw InputError("controller output dimension mismatch");
    }
    std::map<std::string, Polynomial> subs;
    auto uv = sub.input_vars();
    for (std::size_t j = 0; j < uv.size(); ++j) {
      subs.emplace(uv[j], (*ctrl)[j].embed(av));
    }
    expr.poly = expr.poly.substitute(subs, av);
    for (auto& p : expr.penalties) {
      p.inner = p.inner.substitute(subs, av);
    }
  }
  return expr;
}

}  // namespace shs
