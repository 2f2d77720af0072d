#include "shsbarrier/lp.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "shsbarrier/errors.hpp"

namespace shs {

namespace {

constexpr double kEps = 1e-9;
constexpr double kPivotEps = 1e-7;
constexpr int kRefreshInterval = 128;

// Dense tableau simplex on the standard form
//   min c^T z   s.t.  S z = r,  z >= 0.
// The original matrix is kept aside and the working tableau is periodically
// recomputed from the current basis by fresh Gaussian elimination, which
// stops pivot round-off from accumulating. Pricing uses the most negative
// reduced cost with a Bland fallback after degenerate stalls; ties break on
// the smallest index, so runs are deterministic.
class Tableau {
 public:
  Tableau(std::vector<std::vector<double>> standard, std::vector<double> rhs)
      : s_(std::move(standard)),
        r_(std::move(rhs)),
        m_(static_cast<int>(r_.size())),
        n_(m_ ? static_cast<int>(s_[0].size()) : 0),
        a_(m_, std::vector<double>(n_ + 1, 0.0)),
        basis_(m_, -1) {}

  std::vector<int>& basis() { return basis_; }
  const std::vector<std::vector<double>>& a() const { return a_; }

  // Recomputes the working tableau B^{-1}[S | r] and the reduced-cost row
  // for `cost` from scratch, given the current basis. Returns false for a
  // numerically singular basis.
  bool refresh(const std::vector<double>& cost, std::vector<double>& cost_row,
               double& cost_rhs) {
    // Augmented elimination on [B | S | r], reducing B to the identity. Row
    // order follows the basis vector, so row k ends up describing basis k.
    std::vector<std::vector<double>> work(m_,
                                          std::vector<double>(m_ + n_ + 1));
    for (int i = 0; i < m_; ++i) {
      for (int k = 0; k < m_; ++k) work[i][k] = s_[i][basis_[k]];
      for (int j = 0; j < n_; ++j) work[i][m_ + j] = s_[i][j];
      work[i][m_ + n_] = r_[i];
    }
    for (int col = 0; col < m_; ++col) {
      int piv = -1;
      double best = 1e-11;
      for (int row = col; row < m_; ++row) {
        if (std::abs(work[row][col]) > best) {
          best = std::abs(work[row][col]);
          piv = row;
        }
      }
      if (piv < 0) return false;
      std::swap(work[col], work[piv]);
      double d = work[col][col];
      for (int j = col; j <= m_ + n_; ++j) work[col][j] /= d;
      for (int row = 0; row < m_; ++row) {
        if (row == col) continue;
        double f = work[row][col];
        if (f == 0.0) continue;
        work[row][col] = 0.0;
        for (int j = col + 1; j <= m_ + n_; ++j) {
          work[row][j] -= f * work[col][j];
        }
      }
    }
    for (int k = 0; k < m_; ++k) {
      for (int j = 0; j < n_; ++j) a_[k][j] = work[k][m_ + j];
      a_[k][n_] = work[k][m_ + n_];
    }
    cost_row.assign(n_, 0.0);
    cost_rhs = 0.0;
    for (int j = 0; j < n_; ++j) cost_row[j] = cost[j];
    for (int k = 0; k < m_; ++k) {
      double cb = cost[basis_[k]];
      if (cb == 0.0) continue;
      for (int j = 0; j < n_; ++j) cost_row[j] -= cb * a_[k][j];
      cost_rhs -= cb * a_[k][n_];
    }
    return true;
  }

  // Runs simplex iterations, pricing only the first `price_cols` columns
  // (or all when 0). Returns false on unboundedness.
  bool iterate(const std::vector<double>& cost, std::vector<double>& cost_row,
               double& cost_rhs, int price_cols = 0) {
    const int limit = price_cols > 0 ? price_cols : n_;
    int stall = 0;
    int since_refresh = 0;
    for (long iter = 0;; ++iter) {
      if (iter > 500'000) {
        throw NumericError("simplex iteration limit reached");
      }
      if (++since_refresh >= kRefreshInterval) {
        if (!refresh(cost, cost_row, cost_rhs)) return false;
        since_refresh = 0;
      }
      const bool bland = stall > 64;
      int enter = -1;
      double best_cost = -kEps;
      for (int j = 0; j < limit; ++j) {
        if (cost_row[j] < best_cost) {
          enter = j;
          if (bland) break;
          best_cost = cost_row[j];
        }
      }
      if (enter < 0) {
        // Optimality candidate: confirm on a freshly recomputed tableau.
        if (!refresh(cost, cost_row, cost_rhs)) return false;
        since_refresh = 0;
        bool confirmed = true;
        for (int j = 0; j < limit; ++j) {
          if (cost_row[j] < -10 * kEps) {
            confirmed = false;
            break;
          }
        }
        if (confirmed) return true;
        stall = 65;  // continue carefully under Bland
        continue;
      }
      int leave = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i) {
        if (a_[i][enter] > kPivotEps) {
          double ratio = a_[i][n_] / a_[i][enter];
          if (ratio < best_ratio - kEps ||
              (ratio < best_ratio + kEps &&
               (leave < 0 || basis_[i] < basis_[leave]))) {
            best_ratio = ratio;
            leave = i;
          }
        }
      }
      if (leave < 0) {
        // Recheck on a fresh tableau before declaring an unbounded ray.
        if (!refresh(cost, cost_row, cost_rhs)) return false;
        since_refresh = 0;
        bool any = false;
        for (int i = 0; i < m_; ++i) {
          if (a_[i][enter] > kPivotEps) any = true;
        }
        if (!any) {
          if (bland) return false;
          stall = 65;
          continue;
        }
        continue;
      }
      double before = cost_rhs;
      pivot(leave, enter, cost_row, cost_rhs);
      if (std::abs(cost_rhs - before) <= 1e-13 * (1.0 + std::abs(before))) {
        ++stall;
      } else {
        stall = 0;
      }
    }
  }

  void pivot(int row, int col, std::vector<double>& cost_row,
             double& cost_rhs) {
    double pivot_value = a_[row][col];
    for (double& v : a_[row]) v /= pivot_value;
    for (int i = 0; i < m_; ++i) {
      if (i == row) continue;
      double factor = a_[i][col];
      if (factor == 0.0) continue;
      for (int j = 0; j <= n_; ++j) a_[i][j] -= factor * a_[row][j];
    }
    double cfac = cost_row[col];
    if (cfac != 0.0) {
      for (int j = 0; j < n_; ++j) cost_row[j] -= cfac * a_[row][j];
      cost_rhs -= cfac * a_[row][n_];
    }
    basis_[row] = col;
  }

  // Basic solution values recomputed from the original data.
  std::vector<double> basic_solution() {
    std::vector<double> z(n_, 0.0);
    std::vector<double> zero_cost(n_, 0.0);
    std::vector<double> row;
    double rhs_value;
    if (!refresh(zero_cost, row, rhs_value)) return z;
    for (int k = 0; k < m_; ++k) z[basis_[k]] = a_[k][n_];
    return z;
  }

 private:
  std::vector<std::vector<double>> s_;
  std::vector<double> r_;
  int m_, n_;
  std::vector<std::vector<double>> a_;
  std::vector<int> basis_;
};

}  // namespace

void LinearProgram::add_le(std::span<const double> row, double b) {
  if (static_cast<int>(row.size()) != num_vars) {
    throw InputError("LP constraint has wrong arity");
  }
  rows.emplace_back(row.begin(), row.end());
  rhs.push_back(b);
}

void LinearProgram::add_ge(std::span<const double> row, double b) {
  std::vector<double> neg(row.begin(), row.end());
  for (double& v : neg) v = -v;
  add_le(neg, -b);
}

void LinearProgram::add_eq(std::span<const double> row, double b) {
  add_le(row, b);
  add_ge(row, b);
}

LpResult solve_lp(const LinearProgram& lp, std::span<const double> objective) {
  if (static_cast<int>(objective.size()) != lp.num_vars) {
    throw InputError("LP objective has wrong arity");
  }
  const int n_free = lp.num_vars;
  const int m = static_cast<int>(lp.rows.size());

  // Equilibrate: rows to unit max entry, then columns to unit max entry
  // (substituting x_j = y_j / col_scale_j). Keeps pivots well conditioned
  // when variable magnitudes span many decades.
  std::vector<std::vector<double>> rows = lp.rows;
  std::vector<double> rhs = lp.rhs;
  for (int i = 0; i < m; ++i) {
    double s = std::abs(rhs[i]);
    for (double v : rows[i]) s = std::max(s, std::abs(v));
    if (s > 0) {
      for (double& v : rows[i]) v /= s;
      rhs[i] /= s;
    }
  }
  std::vector<double> col_scale(n_free, 1.0);
  for (int j = 0; j < n_free; ++j) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s = std::max(s, std::abs(rows[i][j]));
    if (s > 0) col_scale[j] = s;
  }
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n_free; ++j) rows[i][j] /= col_scale[j];
  }

  // Standard form: free variables split as y = y+ - y-; one slack per row;
  // artificials for rows whose right side is negative after slack insertion.
  const int n_split = 2 * n_free;
  const int n_slack = m;
  int n_art = 0;
  for (int i = 0; i < m; ++i) {
    if (rhs[i] < 0) ++n_art;
  }
  const int n_total = n_split + n_slack + n_art;

  std::vector<std::vector<double>> standard(m, std::vector<double>(n_total, 0.0));
  std::vector<double> r(m, 0.0);
  std::vector<int> initial_basis(m, -1);
  int art = n_split + n_slack;
  for (int i = 0; i < m; ++i) {
    double sign = rhs[i] < 0 ? -1.0 : 1.0;
    for (int j = 0; j < n_free; ++j) {
      standard[i][2 * j] = sign * rows[i][j];
      standard[i][2 * j + 1] = -sign * rows[i][j];
    }
    standard[i][n_split + i] = sign;
    r[i] = sign * rhs[i];
    if (rhs[i] < 0) {
      standard[i][art] = 1.0;
      initial_basis[i] = art;
      ++art;
    } else {
      initial_basis[i] = n_split + i;
    }
  }

  Tableau t(std::move(standard), std::move(r));
  t.basis() = initial_basis;

  LpResult result;
  std::vector<double> cost_row;
  double cost_rhs = 0.0;
  if (n_art > 0) {
    std::vector<double> phase1_cost(n_total, 0.0);
    for (int j = n_split + n_slack; j < n_total; ++j) phase1_cost[j] = 1.0;
    if (!t.refresh(phase1_cost, cost_row, cost_rhs) ||
        !t.iterate(phase1_cost, cost_row, cost_rhs)) {
      result.status = LpResult::Status::infeasible;
      return result;
    }
    // Judge feasibility from exactly recomputed artificial levels.
    std::vector<double> z = t.basic_solution();
    double art_level = 0.0;
    for (int j = n_split + n_slack; j < n_total; ++j) {
      art_level += std::abs(z[j]);
    }
    if (art_level > 1e-8) {
      if (std::getenv("SHS_LP_TRACE")) {
        std::fprintf(stderr, "[lp] phase-1 artificial level %g (m=%d n=%d)\n",
                     art_level, m, n_free);
      }
      result.status = LpResult::Status::infeasible;
      return result;
    }
    // Pivot leftover artificials out of the basis where possible.
    std::vector<double> zero_cost(n_total, 0.0);
    if (!t.refresh(zero_cost, cost_row, cost_rhs)) {
      result.status = LpResult::Status::infeasible;
      return result;
    }
    for (int i = 0; i < m; ++i) {
      if (t.basis()[i] >= n_split + n_slack) {
        for (int j = 0; j < n_split + n_slack; ++j) {
          if (std::abs(t.a()[i][j]) > kPivotEps) {
            t.pivot(i, j, cost_row, cost_rhs);
            break;
          }
        }
      }
    }
  }

  // Phase 2; artificial columns are excluded from pricing so they can never
  // re-enter the basis.
  std::vector<double> cost(n_total, 0.0);
  double obj_scale = 0.0;
  for (int j = 0; j < n_free; ++j) {
    obj_scale = std::max(obj_scale, std::abs(objective[j] / col_scale[j]));
  }
  if (obj_scale == 0.0) obj_scale = 1.0;
  for (int j = 0; j < n_free; ++j) {
    double c = objective[j] / col_scale[j] / obj_scale;
    cost[2 * j] = c;
    cost[2 * j + 1] = -c;
  }
  if (!t.refresh(cost, cost_row, cost_rhs)) {
    result.status = LpResult::Status::infeasible;
    return result;
  }
  if (!t.iterate(cost, cost_row, cost_rhs, n_split + n_slack)) {
    result.status = LpResult::Status::unbounded;
    return result;
  }

  std::vector<double> z = t.basic_solution();
  result.x.resize(n_free);
  for (int j = 0; j < n_free; ++j) {
    result.x[j] = (z[2 * j] - z[2 * j + 1]) / col_scale[j];
  }
  // The returned point must satisfy the scaled rows; anything else counts
  // as infeasible rather than optimal.
  for (int i = 0; i < m; ++i) {
    double dot = 0.0;
    for (int j = 0; j < n_free; ++j) {
      dot += rows[i][j] * col_scale[j] * result.x[j];
    }
    if (dot > rhs[i] + 1e-6) {
      if (std::getenv("SHS_LP_TRACE")) {
        std::fprintf(stderr, "[lp] residual reject row %d: %g (m=%d n=%d)\n", i,
                     dot - rhs[i], m, n_free);
      }
      result.status = LpResult::Status::infeasible;
      return result;
    }
  }
  result.status = LpResult::Status::optimal;
  result.objective = 0.0;
  for (int j = 0; j < n_free; ++j) {
    result.objective += objective[j] * result.x[j];
  }
  return result;
}

bool lp_feasible(const LinearProgram& lp) {
  std::vector<double> zero(lp.num_vars, 0.0);
  // A zero objective turns phase 2 into a no-op.
  return solve_lp(lp, zero).ok();
}

LpResult solve_lexicographic(const LinearProgram& lp,
                             const std::vector<std::vector<double>>& objectives,
                             double pin_slack) {
  LinearProgram work = lp;
  LpResult last;
  LpResult best;
  for (std::size_t k = 0; k < objectives.size(); ++k) {
    last = solve_lp(work, objectives[k]);
    if (!last.ok()) {
      // Later stages are refinements; a numerically stuck refinement must
      // not discard a feasible earlier answer.
      if (k > 0 && best.ok()) return best;
      return last;
    }
    best = last;
    if (k + 1 < objectives.size()) {
      double scale = std::max(1.0, std::abs(last.objective));
      work.add_le(objectives[k], last.objective + pin_slack * scale);
    }
  }
  return last;
}

}  // namespace shs
