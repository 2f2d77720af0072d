#pragma once

#include <span>
#include <vector>

namespace shs {

/// Dense linear program over free (sign-unrestricted) variables:
///   minimize c^T x  subject to  A x <= b.
/// Equalities are expressed as two opposing inequalities by the caller.
struct LinearProgram {
  explicit LinearProgram(int num_vars) : num_vars(num_vars) {}

  int num_vars = 0;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;

  void add_le(std::span<const double> row, double b);
  void add_ge(std::span<const double> row, double b);
  void add_eq(std::span<const double> row, double b);
  std::size_t constraint_count() const { return rows.size(); }
};

struct LpResult {
  enum class Status { optimal, infeasible, unbounded };
  Status status = Status::infeasible;
  std::vector<double> x;
  double objective = 0.0;
  bool ok() const { return status == Status::optimal; }
};

/// Two-phase primal simplex. Deterministic: identical inputs give identical
/// pivots and an identical solution vector.
LpResult solve_lp(const LinearProgram& lp, std::span<const double> objective);

/// Phase-1 feasibility probe: cheaper than a full solve when only
/// satisfiability matters.
bool lp_feasible(const LinearProgram& lp);

/// Minimizes the objectives in order, pinning each achieved optimum (plus a
/// slack comfortably above the solver tolerance) before optimizing the next
/// one. If a later stage fails numerically, the last successful stage's
/// point is returned.
LpResult solve_lexicographic(const LinearProgram& lp,
                             const std::vector<std::vector<double>>& objectives,
                             double pin_slack = 1e-4);

}  // namespace shs
