#include "shsbarrier/probability.hpp"

#include <algorithm>
#include <cmath>

#include "shsbarrier/errors.hpp"

namespace shs {

namespace {
double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }
}  // namespace

ReachBound reach_bound(const BoundInput& in) {
  if (!(in.lambda > in.gamma) || in.gamma < 0) {
    throw InputError("reach bound needs lambda > gamma >= 0");
  }
  if (in.psi < 0) throw InputError("psi must be nonnegative");
  if (!(in.kappa_hat > 0)) throw InputError("kappa-hat must be positive");
  if (!(in.horizon > 0) || !std::isfinite(in.horizon)) {
    throw InputError("horizon must be positive and finite");
  }

  ReachBound out;
  out.branch_supermartingale =
      1.0 - (1.0 - in.gamma / in.lambda) * std::exp(-in.psi * in.horizon / in.lambda);
  double ekt = std::exp(in.kappa_hat * in.horizon);
  out.branch_cmartingale =
      (in.kappa_hat * in.gamma + (ekt - 1.0) * in.psi) /
      (in.kappa_hat * in.lambda * ekt);

  double threshold = in.psi / in.kappa_hat;
  if (in.lambda > threshold) {
    out.delta = out.branch_supermartingale;
    out.used_supermartingale_branch = true;
  } else if (in.lambda < threshold) {
    out.delta = out.branch_cmartingale;
  } else {
    // Both formulas apply at the boundary; keep the larger so the result
    // stays an upper bound either way.
    out.delta = std::max(out.branch_supermartingale, out.branch_cmartingale);
    out.used_supermartingale_branch =
        out.branch_supermartingale >= out.branch_cmartingale;
  }
  out.delta = clamp01(out.delta);
  return out;
}

double reach_bound_infinite(double gamma, double lambda, double psi) {
  if (psi != 0.0) {
    throw InputError("infinite-horizon bound requires psi = 0");
  }
  if (!(lambda > gamma) || gamma < 0) {
    throw InputError("infinite-horizon bound needs lambda > gamma >= 0");
  }
  return clamp01(gamma / lambda);
}

CombinedBound combine_runs(const std::vector<RunBound>& runs) {
  CombinedBound out;
  double sum = 0.0;
  for (const auto& run : runs) {
    if (run.trivial()) {
      // Direct edge into an accepting location: the empty product is one and
      // no certificate can improve it.
      out.has_trivial_run = true;
      sum += 1.0;
      continue;
    }
    double prod = 1.0;
    for (double d : run.element_bounds) {
      if (d < 0.0 || !std::isfinite(d)) {
        throw InputError("element bound outside [0, 1]");
      }
      prod *= std::min(d, 1.0);
    }
    sum += prod;
  }
  out.violation_bound = clamp01(sum);
  out.satisfaction_bound = 1.0 - out.violation_bound;
  return out;
}

}  // namespace shs
