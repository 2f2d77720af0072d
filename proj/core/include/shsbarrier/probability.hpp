#pragma once

#include <map>
#include <string>
#include <vector>

namespace shs {

/// Inputs of the finite-horizon reachability bound.
struct BoundInput {
  double gamma = 0.0;
  double lambda = 0.0;
  double psi = 0.0;
  double kappa_hat = 0.0;
  double horizon = 0.0;
};

struct ReachBound {
  double delta = 0.0;           // clamped to [0, 1]
  double branch_supermartingale; // raw value of the lambda >= psi/kappa branch
  double branch_cmartingale;     // raw value of the lambda <= psi/kappa branch
  bool used_supermartingale_branch = false;
};

/// Upper bound on the probability of reaching the unsafe level within the
/// horizon. At the branch boundary both formulas are evaluated and the
/// larger is kept.
ReachBound reach_bound(const BoundInput& in);

/// Infinite-horizon bound gamma/lambda, valid only when the certificate has
/// psi = 0 (the caller asserts it; a nonzero psi is rejected).
double reach_bound_infinite(double gamma, double lambda, double psi = 0.0);

/// One accepting run of the complement automaton decomposed into elements:
/// each element carries its reachability bound, a run of length two carries
/// the trivial factor one.
struct RunBound {
  std::vector<std::string> locations;
  std::vector<double> element_bounds;  // empty for length-2 runs
  bool trivial() const { return element_bounds.empty(); }
};

struct CombinedBound {
  double violation_bound = 0.0;     // clamped to [0, 1]
  double satisfaction_bound = 0.0;  // 1 - violation_bound
  bool has_trivial_run = false;     // some run contributed the factor one
};

/// Sum over accepting runs of the product of element bounds.
CombinedBound combine_runs(const std::vector<RunBound>& runs);

}  // namespace shs
