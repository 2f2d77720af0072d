#include "shsbarrier/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "shsbarrier/errors.hpp"
#include "shsbarrier/lp.hpp"
#include "shsbarrier/rng.hpp"

namespace shs {

namespace {

std::vector<Polynomial::Exponents> monomials_up_to(int nvars, int degree) {
  std::vector<Polynomial::Exponents> out;
  Polynomial::Exponents current(nvars, 0);
  auto rec = [&](auto&& self, int var, int remaining) -> void {
    if (var == nvars) {
      out.push_back(current);
      return;
    }
    for (int e = 0; e <= remaining; ++e) {
      current[var] = e;
      self(self, var + 1, remaining - e);
    }
    current[var] = 0;
  };
  rec(rec, 0, degree);
  std::sort(out.begin(), out.end());
  return out;
}

double eval_monomial(const Polynomial::Exponents& e,
                     std::span<const double> x) {
  double v = 1.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (int k = 0; k < e[i]; ++k) v *= x[i];
  }
  return v;
}

struct Cex {
  int condition = 0;  // 0: output bound, 1: initial, 2: unsafe, 3: decay
  int mode = 0;
  std::vector<double> x;
  std::vector<double> w;          // decay only
  int input_assignment = -1;      // decay with finite inputs
};

// Variable layout of the candidate LP.
struct Layout {
  int modes = 0;
  int barrier_terms = 0;
  int input_dim = 0;
  int controller_terms = 0;  // per input coordinate, continuous inputs only
  bool controller_unknowns = false;

  int barrier(int mode, int term) const { return mode * barrier_terms + term; }
  int gamma(int mode) const { return modes * barrier_terms + mode; }
  int psi(int mode) const { return modes * barrier_terms + modes + mode; }
  int alpha(int mode) const { return modes * barrier_terms + 2 * modes + mode; }
  int rho(int mode) const { return modes * barrier_terms + 3 * modes + mode; }
  int controller(int mode, int input, int term) const {
    return modes * (barrier_terms + 4) +
           (mode * input_dim + input) * controller_terms + term;
  }
  int controller_block() const {
    return controller_unknowns ? modes * input_dim * controller_terms : 0;
  }
  int total() const { return modes * (barrier_terms + 4) + controller_block(); }
};

struct Workspace {
  Subsystem task;  // subsystem with the task regions substituted
  SynthesisConfig cfg;
  /// High-dimensional internal inputs are verified through a conservative
  /// norm bound; the candidate program must credit the interaction relief
  /// the same way or verification can never close.
  bool conservative_rho_credit = false;
  double wsq_floor = 0.0;
  /// Current cushion multiplier; halved when the sliver of certificates
  /// satisfying every stored counterexample becomes too thin to cut with
  /// the full cushion.
  double slack_scale = 1.0;
  std::vector<Polynomial::Exponents> basis;            // barrier monomials
  // Monomials are scaled to the state box (value of basis t at x is
  // monomial(x) / basis_scale[t]), which keeps the LP well conditioned.
  std::vector<double> basis_scale;
  std::vector<Polynomial::Exponents> controller_basis; // controller monomials
  std::vector<double> controller_scale;
  std::vector<std::vector<Polynomial>> gen_basis;      // [mode][term] generator
  std::vector<std::vector<Polynomial>> rate_row;       // [mode][mode'] rates
  Polynomial hsq;                                      // |h(x)|^2
  Layout layout;
  std::vector<Cex> pool;
  std::vector<std::vector<double>> finite_inputs;
  std::vector<std::vector<std::vector<double>>> controller_coeffs;  // [mode][input][term]
  std::vector<double> last_theta;  // previous candidate, assignment heuristic
};

// Adds a normalized row (a^T theta <= b - slack) to the program.
void add_row(LinearProgram& lp, std::vector<double> row, double b,
             double rel_slack = 1e-4, double abs_slack = 0.0) {
  double scale = 0.0;
  for (double v : row) scale = std::max(scale, std::abs(v));
  scale = std::max(scale, std::abs(b));
  if (scale == 0.0) scale = 1.0;
  for (double& v : row) v /= scale;
  lp.add_le(row, b / scale - rel_slack - abs_slack / scale);
}

// Normalized slack of a row at a concrete unknown vector (positive: holds).
double row_slack(const std::vector<double>& row, double b,
                 const std::vector<double>& theta) {
  double scale = std::abs(b);
  double dot = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    dot += row[i] * theta[i];
    scale = std::max(scale, std::abs(row[i]));
  }
  if (scale == 0.0) scale = 1.0;
  return (b - dot) / scale;
}

double controller_value_at(const Workspace& ws, int mode, int input,
                           std::span<const double> x) {
  double v = 0.0;
  for (std::size_t t = 0; t < ws.controller_basis.size(); ++t) {
    v += ws.controller_coeffs[mode][input][t] *
         eval_monomial(ws.controller_basis[t], x) / ws.controller_scale[t];
  }
  return v;
}

// Constraint row of one counterexample at a fixed decay rate, as a pair
// (row, rhs) meaning row^T theta <= rhs. When `controller_unknowns_active`
// is set, barrier coefficients are taken from `fixed_barrier` and the
// controller coefficients become LP unknowns.
std::pair<std::vector<double>, double> build_cex_row(
    const Workspace& ws, int num_vars, const Cex& cex, double kappa_hat,
    bool controller_unknowns_active,
    const std::vector<std::vector<double>>* fixed_barrier) {
  const Layout& L = ws.layout;
  const Subsystem& sub = ws.task;
  std::vector<double> row(num_vars, 0.0);

  if (cex.condition == 0) {
    // -B(x) + a_alpha * (|h(x)|^2)^e <= 0
    for (int t = 0; t < L.barrier_terms; ++t) {
      row[L.barrier(cex.mode, t)] =
          -eval_monomial(ws.basis[t], cex.x) / ws.basis_scale[t];
    }
    double hval = std::max(ws.hsq.eval(cex.x), 0.0);
    row[L.alpha(cex.mode)] = std::pow(hval, ws.cfg.tmpl.alpha_exponent);
    return {std::move(row), 0.0};
  }
  if (cex.condition == 1) {
    // B(x) - gamma <= 0
    for (int t = 0; t < L.barrier_terms; ++t) {
      row[L.barrier(cex.mode, t)] =
          eval_monomial(ws.basis[t], cex.x) / ws.basis_scale[t];
    }
    row[L.gamma(cex.mode)] = -1.0;
    return {std::move(row), 0.0};
  }
  if (cex.condition == 2) {
    // lambda_pin - B(x) <= 0
    for (int t = 0; t < L.barrier_terms; ++t) {
      row[L.barrier(cex.mode, t)] =
          -eval_monomial(ws.basis[t], cex.x) / ws.basis_scale[t];
    }
    return {std::move(row), -ws.cfg.tmpl.lambda_pin};
  }

  // Decay condition at (x, w):
  //   sum_t theta_{p,t} G_{p,t}(x,nu,w) + sum_q rate_pq(x) B_q(x)
  //   + kappa_hat B_p(x) - a_rho (|w|^2)^e - psi_p <= 0
  std::vector<double> point(sub.state_dim + sub.input_dim() + sub.internal_dim(),
                            0.0);
  std::copy(cex.x.begin(), cex.x.end(), point.begin());
  for (std::size_t k = 0; k < cex.w.size(); ++k) {
    point[sub.state_dim + sub.input_dim() + k] = cex.w[k];
  }
  if (sub.input_dim() > 0) {
    if (!ws.finite_inputs.empty()) {
      const auto& nu = ws.finite_inputs[std::max(cex.input_assignment, 0)];
      for (int j = 0; j < sub.input_dim(); ++j) point[sub.state_dim + j] = nu[j];
    } else if (!controller_unknowns_active) {
      for (int j = 0; j < sub.input_dim(); ++j) {
        point[sub.state_dim + j] = controller_value_at(ws, cex.mode, j, cex.x);
      }
    }
  }

  double constant = 0.0;
  if (!controller_unknowns_active) {
    for (int t = 0; t < L.barrier_terms; ++t) {
      row[L.barrier(cex.mode, t)] +=
          ws.gen_basis[cex.mode][t].eval(point) / ws.basis_scale[t];
    }
  } else {
    // Barrier fixed, controller linear in the drift: evaluate the generator
    // at nu = 0 and add the input-channel sensitivities times the controller
    // unknowns.
    std::vector<double> p0 = point;
    for (int j = 0; j < sub.input_dim(); ++j) p0[sub.state_dim + j] = 0.0;
    for (int t = 0; t < L.barrier_terms; ++t) {
      constant += (*fixed_barrier)[cex.mode][t] *
                  ws.gen_basis[cex.mode][t].eval(p0) / ws.basis_scale[t];
    }
    for (int j = 0; j < sub.input_dim(); ++j) {
      std::vector<double> pj = p0;
      pj[sub.state_dim + j] = 1.0;
      double sens = 0.0;
      for (int t = 0; t < L.barrier_terms; ++t) {
        sens += (*fixed_barrier)[cex.mode][t] *
                (ws.gen_basis[cex.mode][t].eval(pj) -
                 ws.gen_basis[cex.mode][t].eval(p0)) /
                ws.basis_scale[t];
      }
      for (std::size_t t = 0; t < ws.controller_basis.size(); ++t) {
        row[L.controller(cex.mode, j, static_cast<int>(t))] +=
            sens * eval_monomial(ws.controller_basis[t], cex.x) /
            ws.controller_scale[t];
      }
    }
  }

  for (int q = 0; q < L.modes; ++q) {
    double rate = ws.rate_row[cex.mode][q].eval(cex.x);
    double kappa_term = (q == cex.mode) ? kappa_hat : 0.0;
    for (int t = 0; t < L.barrier_terms; ++t) {
      double mono = eval_monomial(ws.basis[t], cex.x) / ws.basis_scale[t];
      if (!controller_unknowns_active) {
        row[L.barrier(q, t)] += (rate + kappa_term) * mono;
      } else {
        constant += (*fixed_barrier)[q][t] * (rate + kappa_term) * mono;
      }
    }
  }

  double wsq = 0.0;
  for (double wv : cex.w) wsq += wv * wv;
  if (ws.conservative_rho_credit) wsq = ws.wsq_floor;
  row[L.rho(cex.mode)] = -std::pow(std::max(wsq, 0.0), ws.cfg.tmpl.rho_int_exponent);
  row[L.psi(cex.mode)] = -1.0;
  return {std::move(row), -constant};
}

void add_cex_constraint(const Workspace& ws, LinearProgram& lp, const Cex& cex,
                        double kappa_hat, bool controller_unknowns_active,
                        const std::vector<std::vector<double>>* fixed_barrier) {
  auto [row, rhs] = build_cex_row(ws, lp.num_vars, cex, kappa_hat,
                                  controller_unknowns_active, fixed_barrier);
  add_row(lp, std::move(row), rhs, 1e-4,
          ws.cfg.tmpl.margin_slack * ws.slack_scale);
}

void add_variable_bounds(const Workspace& ws, LinearProgram& lp,
                         bool controller_unknowns_active) {
  const Layout& L = ws.layout;
  auto bound = [&](int var, double lo, double hi) {
    std::vector<double> row(lp.num_vars, 0.0);
    row[var] = 1.0;
    lp.add_le(row, hi);
    row[var] = -1.0;
    lp.add_le(row, -lo);
  };
  const auto& t = ws.cfg.tmpl;
  for (int p = 0; p < L.modes; ++p) {
    for (int k = 0; k < L.barrier_terms; ++k) {
      bound(L.barrier(p, k), -t.coefficient_bound, t.coefficient_bound);
    }
    double gfloor = t.gamma_floor > 0 ? t.gamma_floor : 1e-3 * t.lambda_pin;
    bound(L.gamma(p), std::min(gfloor, 0.5 * t.lambda_pin), 0.995 * t.lambda_pin);
    bound(L.psi(p), 0.0, t.psi_bound);
    bound(L.alpha(p), 1e-9, t.gain_scale_bound);
    bound(L.rho(p), 0.0, t.gain_scale_bound);
    if (controller_unknowns_active) {
      for (int j = 0; j < L.input_dim; ++j) {
        for (int k = 0; k < L.controller_terms; ++k) {
          bound(L.controller(p, j, k), -t.coefficient_bound, t.coefficient_bound);
        }
      }
    }
  }
}

// Keeps box-input controllers inside the input box at the sampled states.
void add_controller_range_rows(const Workspace& ws, LinearProgram& lp) {
  if (ws.layout.input_dim == 0 || !ws.finite_inputs.empty()) return;
  const Box& ubox = std::get<Box>(ws.task.external_input);
  for (const auto& cex : ws.pool) {
    if (cex.condition != 3) continue;
    for (int j = 0; j < ws.layout.input_dim; ++j) {
      std::vector<double> lo_row(lp.num_vars, 0.0);
      for (std::size_t t = 0; t < ws.controller_basis.size(); ++t) {
        lo_row[ws.layout.controller(cex.mode, j, static_cast<int>(t))] =
            eval_monomial(ws.controller_basis[t], cex.x) /
            ws.controller_scale[t];
      }
      std::vector<double> hi_row = lo_row;
      lp.add_le(hi_row, ubox.dims[j].hi);
      for (double& v : lo_row) v = -v;
      lp.add_le(lo_row, -ubox.dims[j].lo);
    }
  }
}

// Weighted blend standing in for the staged objective. The drift allowance
// and start level drive the probability bound (psi with the horizon as its
// lever arm). The interaction gain scale is penalized hard: a small rho_int
// is what keeps the small-gain test passable downstream, and the drift
// allowance can absorb what the relief would have covered. The output-bound
// scale gets a whisper of maximization so its inverse stays tame inside the
// gain chain.
std::vector<double> candidate_objective(const Workspace& ws, int num_vars) {
  const Layout& L = ws.layout;
  std::vector<double> c(num_vars, 0.0);
  for (int p = 0; p < L.modes; ++p) {
    c[L.psi(p)] = 5.0;
    c[L.gamma(p)] = 1.0;
    c[L.rho(p)] = 500.0;
    c[L.alpha(p)] = -1e-6;
  }
  return c;
}

LpResult solve_candidate(Workspace& ws, double kappa_hat,
                         bool controller_unknowns_active,
                         const std::vector<std::vector<double>>* fixed_barrier,
                         bool include_decay = true) {
  LinearProgram lp(ws.layout.total());
  for (const auto& cex : ws.pool) {
    if (controller_unknowns_active && cex.condition != 3) continue;
    if (!include_decay && cex.condition == 3) continue;
    add_cex_constraint(ws, lp, cex, kappa_hat, controller_unknowns_active,
                       fixed_barrier);
  }
  add_variable_bounds(ws, lp, controller_unknowns_active);
  if (controller_unknowns_active) add_controller_range_rows(ws, lp);
  LpResult result;
  try {
    result = solve_lp(lp, candidate_objective(ws, lp.num_vars));
  } catch (const NumericError&) {
    result.status = LpResult::Status::infeasible;
  }
  if (result.ok() && std::getenv("SHS_SYNTH_TRACE")) {
    double worst = 0.0;
    std::size_t worst_row = 0;
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
      double dot = 0.0;
      for (int j = 0; j < lp.num_vars; ++j) dot += lp.rows[i][j] * result.x[j];
      if (dot - lp.rhs[i] > worst) {
        worst = dot - lp.rhs[i];
        worst_row = i;
      }
    }
    if (worst > 1e-6) {
      std::fprintf(stderr, "[cegis] WARNING solution violates row %zu by %g\n",
                   worst_row, worst);
    }
  }
  return result;
}

PseudoCertificate certificate_from(const Workspace& ws,
                                   const LpResult& sol, double kappa_hat) {
  PseudoCertificate cert;
  const Layout& L = ws.layout;
  auto sv = ws.task.state_vars();
  for (int p = 0; p < L.modes; ++p) {
    ModeCertificate mc;
    mc.barrier = Polynomial(sv);
    for (int t = 0; t < L.barrier_terms; ++t) {
      double c = sol.x[L.barrier(p, t)] / ws.basis_scale[t];
      if (c != 0.0) mc.barrier.add_term(ws.basis[t], c);
    }
    mc.gamma = std::max(sol.x[L.gamma(p)], 0.0);
    mc.lambda = ws.cfg.tmpl.lambda_pin;
    mc.psi = std::max(sol.x[L.psi(p)], 0.0);
    mc.kappa = ScalarGainFunction::linear(kappa_hat);
    double a_alpha = std::max(sol.x[L.alpha(p)], 1e-12);
    mc.alpha = ws.cfg.tmpl.alpha_exponent == 1.0
                   ? ScalarGainFunction::linear(a_alpha)
                   : ScalarGainFunction::power(a_alpha, ws.cfg.tmpl.alpha_exponent);
    double a_rho = sol.x[L.rho(p)];
    if (a_rho <= 1e-12) {
      mc.rho_int = ScalarGainFunction::zero();
    } else if (ws.cfg.tmpl.rho_int_exponent == 1.0) {
      mc.rho_int = ScalarGainFunction::linear(a_rho);
    } else {
      mc.rho_int = ScalarGainFunction::power(a_rho, ws.cfg.tmpl.rho_int_exponent);
    }
    if (L.controller_unknowns) {
      std::vector<Polynomial> ctrl;
      for (int j = 0; j < L.input_dim; ++j) {
        Polynomial cj(sv);
        for (std::size_t t = 0; t < ws.controller_basis.size(); ++t) {
          double c = ws.controller_coeffs[p][j][t] / ws.controller_scale[t];
          if (c != 0.0) cj.add_term(ws.controller_basis[t], c);
        }
        ctrl.push_back(std::move(cj));
      }
      mc.controller = std::move(ctrl);
    }
    cert.modes.push_back(std::move(mc));
  }
  return cert;
}

void seed_counterexamples(Workspace& ws) {
  const Subsystem& sub = ws.task;
  const int g = ws.cfg.seed_grid_points;
  auto push_state_grid = [&](const Box& box, int condition) {
    for (int p = 0; p < sub.mode_count(); ++p) {
      for_each_grid_point(box, g, [&](std::span<const double> x) {
        ws.pool.push_back({condition, p, {x.begin(), x.end()}, {}, -1});
      });
    }
  };
  push_state_grid(sub.state_box, 0);
  push_state_grid(sub.initial_box, 1);
  for (const auto& b : sub.unsafe_region.boxes) push_state_grid(b, 2);

  // Decay seeds: state grid crossed with the internal-input center and the
  // two extreme corners.
  std::vector<std::vector<double>> wpoints;
  const int wd = sub.internal_dim();
  if (wd == 0) {
    wpoints.push_back({});
  } else {
    std::vector<double> lo(wd), hi(wd), mid(wd);
    for (int k = 0; k < wd; ++k) {
      lo[k] = sub.internal_input_box.dims[k].lo;
      hi[k] = sub.internal_input_box.dims[k].hi;
      mid[k] = sub.internal_input_box.dims[k].center();
    }
    wpoints = {mid, lo, hi};
  }
  for (int p = 0; p < sub.mode_count(); ++p) {
    for_each_grid_point(sub.state_box, g, [&](std::span<const double> x) {
      for (const auto& w : wpoints) {
        ws.pool.push_back({3, p, {x.begin(), x.end()}, w, -1});
      }
    });
    // The barrier valley sits inside the start set; sample the decay
    // condition densely there.
    for_each_grid_point(sub.initial_box, g, [&](std::span<const double> x) {
      for (const auto& w : wpoints) {
        ws.pool.push_back({3, p, {x.begin(), x.end()}, w, -1});
      }
    });
  }
}

// Worst margin over every condition for the falsifier; returns the
// counterexamples to add (empty when nothing was violated).
std::vector<Cex> falsify_candidate(const Workspace& ws,
                                   const PseudoCertificate& cert,
                                   std::uint64_t round_seed) {
  const Subsystem& sub = ws.task;
  std::vector<Cex> found;
  FalsifyEffort effort = ws.cfg.effort;
  for (int p = 0; p < sub.mode_count(); ++p) {
    effort.seed = round_seed * 1000003ULL + static_cast<std::uint64_t>(p);
    for (const std::string condition :
         {"output_lower_bound", "initial_level", "unsafe_level", "decay"}) {
      auto witness = falsify(sub, cert, condition, p, effort);
      if (!witness) continue;
      Cex cex;
      cex.mode = p;
      if (condition == "output_lower_bound") cex.condition = 0;
      if (condition == "initial_level") cex.condition = 1;
      if (condition == "unsafe_level") cex.condition = 2;
      if (condition == "decay") cex.condition = 3;
      cex.x.assign(witness->begin(), witness->begin() + sub.state_dim);
      if (cex.condition == 3 && sub.internal_dim() > 0) {
        cex.w.assign(witness->begin() + sub.state_dim, witness->end());
      }
      found.push_back(std::move(cex));
    }
  }
  return found;
}

bool certificate_passes(const Subsystem& sub, const PseudoCertificate& cert,
                        const GridConfig& grid, VerificationReport* out) {
  VerificationReport rep = verify_cpbf(sub, cert, grid);
  if (out) *out = rep;
  return !rep.any_falsified() && rep.non_falsified_with_nonnegative_margins();
}

struct ProbeResult {
  bool success = false;
  PseudoCertificate certificate;
  int iterations = 0;
  std::string reason;
  VerificationReport report;
};

ProbeResult run_cegis(Workspace& ws, double kappa_hat) {
  ProbeResult out;
  const Subsystem& sub = ws.task;
  const bool finite = !ws.finite_inputs.empty();
  const bool continuous_ctrl = ws.layout.controller_unknowns;

  for (int iter = 0; iter < ws.cfg.max_iterations; ++iter) {
    out.iterations = iter + 1;

    // Assign inputs to any fresh decay counterexamples. The cheap pass
    // scores the declared inputs against the previous candidate (smallest
    // index on ties, which reduces to declared order when no candidate
    // exists yet); if the program then turns out infeasible, fall back to
    // per-counterexample declared-order probing, first feasible wins.
    if (finite && ws.last_theta.empty()) {
      // Warm start: shape the barrier from the level conditions alone so the
      // first assignment pass has a direction to score against.
      LpResult warm = solve_candidate(ws, kappa_hat, false, nullptr, false);
      if (warm.ok()) ws.last_theta = warm.x;
      if (std::getenv("SHS_SYNTH_TRACE")) {
        std::fprintf(stderr, "[cegis] warm solve ok=%d\n", warm.ok());
      }
    }
    if (finite) {
      for (auto& cex : ws.pool) {
        if (cex.condition != 3 || cex.input_assignment >= 0) continue;
        int pick = 0;
        if (!ws.last_theta.empty()) {
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < ws.finite_inputs.size(); ++k) {
            Cex probe = cex;
            probe.input_assignment = static_cast<int>(k);
            auto [row, rhs] = build_cex_row(ws, ws.layout.total(), probe,
                                            kappa_hat, false, nullptr);
            double slack = row_slack(row, rhs, ws.last_theta);
            if (slack > best + 1e-15) {
              best = slack;
              pick = static_cast<int>(k);
            }
          }
        }
        cex.input_assignment = pick;
      }
    }

    LpResult sol = solve_candidate(ws, kappa_hat, false, nullptr);
    if (!sol.ok() && continuous_ctrl && !ws.last_theta.empty()) {
      // The stored controller may conflict with the fresh counterexamples:
      // re-fit it against the previous barrier first, then retry.
      std::vector<std::vector<double>> fixed(ws.layout.modes);
      for (int p = 0; p < ws.layout.modes; ++p) {
        for (int t = 0; t < ws.layout.barrier_terms; ++t) {
          fixed[p].push_back(ws.last_theta[ws.layout.barrier(p, t)]);
        }
      }
      LpResult refit = solve_candidate(ws, kappa_hat, true, &fixed);
      if (refit.ok()) {
        for (int p = 0; p < ws.layout.modes; ++p) {
          for (int j = 0; j < ws.layout.input_dim; ++j) {
            for (int t = 0; t < ws.layout.controller_terms; ++t) {
              ws.controller_coeffs[p][j][t] =
                  refit.x[ws.layout.controller(p, j, t)];
            }
          }
        }
        sol = solve_candidate(ws, kappa_hat, false, nullptr);
      }
    }
    if (!sol.ok() && ws.slack_scale > 1.0 / 64.0) {
      ws.slack_scale *= 0.5;
      if (std::getenv("SHS_SYNTH_TRACE")) {
        std::fprintf(stderr, "[cegis] thinning margin cushion to %g\n",
                     ws.cfg.tmpl.margin_slack * ws.slack_scale);
      }
      sol = solve_candidate(ws, kappa_hat, false, nullptr);
      if (!sol.ok()) continue;  // retry next iteration, cushion halved again
    }
    if (std::getenv("SHS_SYNTH_TRACE") && !sol.ok()) {
      std::fprintf(stderr, "[cegis] main solve infeasible, trying fallback\n");
    }
    if (!sol.ok() && finite && ws.finite_inputs.size() > 1) {
      // Rebuild every assignment incrementally: counterexamples enter one by
      // one, each taking the first input (declared order) that keeps the
      // program feasible together with the ones already placed.
      LinearProgram base(ws.layout.total());
      for (const auto& other : ws.pool) {
        if (other.condition != 3) {
          add_cex_constraint(ws, base, other, kappa_hat, false, nullptr);
        }
      }
      add_variable_bounds(ws, base, false);
      bool progress = true;
      for (auto& cex : ws.pool) {
        if (cex.condition != 3) continue;
        bool assigned = false;
        for (std::size_t k = 0; k < ws.finite_inputs.size(); ++k) {
          cex.input_assignment = static_cast<int>(k);
          LinearProgram probe = base;
          add_cex_constraint(ws, probe, cex, kappa_hat, false, nullptr);
          if (lp_feasible(probe)) {
            assigned = true;
            break;
          }
        }
        if (!assigned) {
          if (std::getenv("SHS_SYNTH_TRACE")) {
            std::fprintf(stderr,
                         "[cegis] fallback stuck at cex mode=%d x=%g wdim=%zu\n",
                         cex.mode, cex.x[0], cex.w.size());
          }
          progress = false;
          break;
        }
        add_cex_constraint(ws, base, cex, kappa_hat, false, nullptr);
      }
      if (progress) sol = solve_candidate(ws, kappa_hat, false, nullptr);
    }
    if (!sol.ok()) {
      out.reason = "candidate program infeasible";
      return out;
    }
    // Re-score the assignments against the fresh candidate; repeat while it
    // changes the picture (bounded rounds, revert on infeasibility).
    if (finite && ws.finite_inputs.size() > 1) {
      for (int round = 0; round < 4; ++round) {
        bool changed = false;
        std::vector<int> before;
        for (const auto& cex : ws.pool) {
          if (cex.condition == 3) before.push_back(cex.input_assignment);
        }
        for (auto& cex : ws.pool) {
          if (cex.condition != 3) continue;
          int pick = cex.input_assignment;
          double best = -std::numeric_limits<double>::infinity();
          for (std::size_t k = 0; k < ws.finite_inputs.size(); ++k) {
            Cex probe = cex;
            probe.input_assignment = static_cast<int>(k);
            auto [row, rhs] = build_cex_row(ws, ws.layout.total(), probe,
                                            kappa_hat, false, nullptr);
            double slack = row_slack(row, rhs, sol.x);
            if (slack > best + 1e-15) {
              best = slack;
              pick = static_cast<int>(k);
            }
          }
          if (pick != cex.input_assignment) {
            cex.input_assignment = pick;
            changed = true;
          }
        }
        if (!changed) break;
        LpResult improved = solve_candidate(ws, kappa_hat, false, nullptr);
        if (!improved.ok()) {
          std::size_t at = 0;
          for (auto& cex : ws.pool) {
            if (cex.condition == 3) cex.input_assignment = before[at++];
          }
          break;
        }
        sol = std::move(improved);
      }
    }
    ws.last_theta = sol.x;
    if (continuous_ctrl) {
      // Alternate once: re-optimize the controller against the fixed barrier.
      std::vector<std::vector<double>> fixed(ws.layout.modes);
      for (int p = 0; p < ws.layout.modes; ++p) {
        for (int t = 0; t < ws.layout.barrier_terms; ++t) {
          fixed[p].push_back(sol.x[ws.layout.barrier(p, t)]);
        }
      }
      LpResult ctrl_sol = solve_candidate(ws, kappa_hat, true, &fixed);
      if (std::getenv("SHS_SYNTH_TRACE") && !ctrl_sol.ok()) {
        std::fprintf(stderr, "[cegis] controller step LP failed\n");
      }
      if (ctrl_sol.ok()) {
        // Adopt only the controller; re-solve the full program against it so
        // the barrier and its constants stay mutually consistent.
        for (int p = 0; p < ws.layout.modes; ++p) {
          for (int j = 0; j < ws.layout.input_dim; ++j) {
            for (int t = 0; t < ws.layout.controller_terms; ++t) {
              ws.controller_coeffs[p][j][t] =
                  ctrl_sol.x[ws.layout.controller(p, j, t)];
            }
          }
        }
        LpResult replay = solve_candidate(ws, kappa_hat, false, nullptr);
        if (replay.ok()) sol = std::move(replay);
      }
    }

    PseudoCertificate cert = certificate_from(ws, sol, kappa_hat);
    auto fresh = falsify_candidate(
        ws, cert, ws.cfg.seed * 7919ULL + static_cast<std::uint64_t>(iter));
    if (std::getenv("SHS_SYNTH_TRACE")) {
      std::fprintf(stderr, "[cegis] kappa=%g iter=%d pool=%zu fresh=%zu:",
                   kappa_hat, iter, ws.pool.size(), fresh.size());
      for (const auto& cex : fresh) {
        std::fprintf(stderr, " c%d/m%d@%.6f", cex.condition, cex.mode,
                     cex.x.empty() ? 0.0 : cex.x[0]);
      }
      std::fprintf(stderr, " psi=%g gamma=%g\n", cert.modes[0].psi,
                   cert.modes[0].gamma);
    }
    if (fresh.empty()) {
      VerificationReport rep;
      if (certificate_passes(sub, cert, ws.cfg.verify_grid, &rep)) {
        out.success = true;
        out.certificate = std::move(cert);
        out.report = std::move(rep);
        return out;
      }
      // Feed the verifier's witnesses back into the pool.
      bool fed = false;
      for (const auto& cond : rep.conditions) {
        if (cond.status != ConditionStatus::falsified || cond.witness.empty()) {
          continue;
        }
        Cex cex;
        cex.mode = cond.mode;
        if (cond.name == "output_lower_bound") cex.condition = 0;
        else if (cond.name == "initial_level") cex.condition = 1;
        else if (cond.name == "unsafe_level") cex.condition = 2;
        else cex.condition = 3;
        cex.x.assign(cond.witness.begin(),
                     cond.witness.begin() + sub.state_dim);
        if (cex.condition == 3 &&
            cond.witness.size() > static_cast<std::size_t>(sub.state_dim)) {
          cex.w.assign(cond.witness.begin() + sub.state_dim, cond.witness.end());
        }
        ws.pool.push_back(std::move(cex));
        fed = true;
      }
      if (!fed) {
        out.reason = "verification margins stayed inconclusive";
        out.certificate = std::move(cert);
        out.report = std::move(rep);
        return out;
      }
    } else {
      for (auto& cex : fresh) {
        bool duplicate = false;
        for (const auto& old : ws.pool) {
          if (old.condition != cex.condition || old.mode != cex.mode) continue;
          double d = 0.0;
          for (std::size_t k = 0; k < cex.x.size(); ++k) {
            d = std::max(d, std::abs(old.x[k] - cex.x[k]));
          }
          for (std::size_t k = 0; k < cex.w.size() && k < old.w.size(); ++k) {
            d = std::max(d, std::abs(old.w[k] - cex.w[k]));
          }
          if (d < 1e-9) {
            duplicate = true;
            break;
          }
        }
        if (!duplicate) ws.pool.push_back(std::move(cex));
      }
    }
  }
  out.reason = "iteration budget exhausted";
  return out;
}

}  // namespace

std::optional<std::vector<double>> falsify_margin(
    const std::function<double(std::span<const double>)>& margin,
    const Box& domain, const FalsifyEffort& effort) {
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> best_pt;
  const int dims = domain.dim();
  int per_dim = effort.grid_points_per_dim;
  // Keep the scan budget flat across dimensions.
  while (dims > 1 && std::pow(per_dim, dims) > 200'000 && per_dim > 3) {
    per_dim = per_dim / 2 + 1;
  }
  for_each_grid_point(domain, per_dim, [&](std::span<const double> x) {
    double v = margin(x);
    if (v < best) {
      best = v;
      best_pt.assign(x.begin(), x.end());
    }
  });

  Rng rng(effort.seed);
  auto descend = [&](std::vector<double> pt) {
    std::vector<double> step(dims);
    for (int d = 0; d < dims; ++d) step[d] = domain.dims[d].width() / 8.0;
    double value = margin(pt);
    for (int it = 0; it < effort.descent_steps; ++it) {
      bool moved = false;
      for (int d = 0; d < dims; ++d) {
        if (step[d] <= 0) continue;
        for (double dir : {+1.0, -1.0}) {
          std::vector<double> trial = pt;
          trial[d] = std::clamp(trial[d] + dir * step[d], domain.dims[d].lo,
                                domain.dims[d].hi);
          double v = margin(trial);
          if (v < value) {
            value = v;
            pt = std::move(trial);
            moved = true;
            break;
          }
        }
      }
      if (!moved) {
        for (int d = 0; d < dims; ++d) step[d] *= 0.5;
        if (*std::max_element(step.begin(), step.end()) <
            1e-10 * domain.dims[0].width()) {
          break;
        }
      }
    }
    if (value < best) {
      best = value;
      best_pt = pt;
    }
  };

  if (!best_pt.empty()) descend(best_pt);
  for (int s = 0; s < effort.multistarts; ++s) {
    std::vector<double> start(dims);
    for (int d = 0; d < dims; ++d) {
      start[d] = domain.dims[d].lo + rng.uniform01() * domain.dims[d].width();
    }
    descend(std::move(start));
  }
  if (best < 0.0 && !best_pt.empty()) return best_pt;
  return std::nullopt;
}

std::optional<std::vector<double>> falsify(const Subsystem& sub,
                                           const PseudoCertificate& cert,
                                           const std::string& condition,
                                           int mode,
                                           const FalsifyEffort& effort) {
  cert.check(sub);
  const ModeCertificate& mc = cert.modes.at(mode);
  const auto sv = sub.state_vars();

  if (condition == "output_lower_bound") {
    ConditionExpr m = build_output_bound_margin(sub, mc);
    return falsify_margin([&](std::span<const double> x) { return m.eval(x); },
                          sub.state_box, effort);
  }
  if (condition == "initial_level") {
    Polynomial m = Polynomial::constant(sv, mc.gamma) - mc.barrier.embed(sv);
    return falsify_margin([&](std::span<const double> x) { return m.eval(x); },
                          sub.initial_box, effort);
  }
  if (condition == "unsafe_level") {
    Polynomial m = mc.barrier.embed(sv) - Polynomial::constant(sv, mc.lambda);
    std::optional<std::vector<double>> best;
    double best_val = 0.0;
    for (const auto& box : sub.unsafe_region.boxes) {
      auto w = falsify_margin(
          [&](std::span<const double> x) { return m.eval(x); }, box, effort);
      if (w) {
        double v = m.eval(*w);
        if (!best || v < best_val) {
          best = w;
          best_val = v;
        }
      }
    }
    return best;
  }
  if (condition == "decay") {
    std::vector<std::string> eval_vars = sv;
    auto wv = sub.internal_vars();
    eval_vars.insert(eval_vars.end(), wv.begin(), wv.end());
    auto branches = build_decay_margin_branches(sub, mode, cert, eval_vars);
    const int wd = sub.internal_dim();
    auto margin_xw = [&](std::span<const double> z) {
      double bestv = -std::numeric_limits<double>::infinity();
      for (const auto& br : branches) bestv = std::max(bestv, br.eval(z));
      return bestv;
    };
    if (wd == 0) {
      return falsify_margin(margin_xw, sub.state_box, effort);
    }
    if (wd <= 3) {
      Box domain = sub.state_box;
      domain.dims.insert(domain.dims.end(), sub.internal_input_box.dims.begin(),
                         sub.internal_input_box.dims.end());
      return falsify_margin(margin_xw, domain, effort);
    }
    // High-dimensional internal inputs: search the state, evaluating each
    // branch at its own worst box corner (margins are affine in w here).
    auto corner_margin = [&](std::span<const double> x) {
      std::vector<double> z(x.begin(), x.end());
      z.resize(x.size() + wd, 0.0);
      double bestv = -std::numeric_limits<double>::infinity();
      for (const auto& br : branches) {
        for (int k = 0; k < wd; ++k) {
          // finite-difference sign probe of the w coefficient
          z[x.size() + k] = sub.internal_input_box.dims[k].lo;
          double vlo = br.eval(z);
          z[x.size() + k] = sub.internal_input_box.dims[k].hi;
          double vhi = br.eval(z);
          z[x.size() + k] = vlo <= vhi ? sub.internal_input_box.dims[k].lo
                                       : sub.internal_input_box.dims[k].hi;
        }
        bestv = std::max(bestv, br.eval(z));
      }
      return bestv;
    };
    auto found = falsify_margin(corner_margin, sub.state_box, effort);
    if (!found) return std::nullopt;
    // Reconstruct the witness (x, w*) for the first minimizing branch.
    std::vector<double> z(found->begin(), found->end());
    z.resize(found->size() + wd, 0.0);
    double bestv = std::numeric_limits<double>::infinity();
    std::vector<double> best_z;
    for (const auto& br : branches) {
      for (int k = 0; k < wd; ++k) {
        z[found->size() + k] = sub.internal_input_box.dims[k].lo;
        double vlo = br.eval(z);
        z[found->size() + k] = sub.internal_input_box.dims[k].hi;
        double vhi = br.eval(z);
        z[found->size() + k] = vlo <= vhi ? sub.internal_input_box.dims[k].lo
                                          : sub.internal_input_box.dims[k].hi;
      }
      double v = margin_xw(z);
      if (v < bestv) {
        bestv = v;
        best_z = z;
      }
    }
    if (bestv < 0.0) return best_z;
    return std::nullopt;
  }
  throw InputError("unknown condition '" + condition + "'");
}

SynthesisResult synthesize_cpbf(const Subsystem& sub, const Box& task_initial,
                                const Region& task_unsafe,
                                const SynthesisConfig& cfg) {
  Workspace ws;
  ws.task = sub;
  ws.task.initial_box = task_initial;
  ws.task.unsafe_region = task_unsafe;
  ws.task.check_shape();
  if (!ws.task.state_box.contains_box(task_initial, 1e-9)) {
    throw InputError("task initial set must lie inside the state set");
  }
  for (const auto& b : task_unsafe.boxes) {
    if (!ws.task.state_box.contains_box(b, 1e-9)) {
      throw InputError("task unsafe set must lie inside the state set");
    }
  }
  ws.cfg = cfg;

  ws.basis = monomials_up_to(sub.state_dim, cfg.tmpl.barrier_degree);
  ws.controller_basis = monomials_up_to(sub.state_dim, cfg.tmpl.controller_degree);
  // Characteristic magnitude of each monomial over the state box.
  auto monomial_scale = [&](const Polynomial::Exponents& e) {
    double s = 1.0;
    for (std::size_t d = 0; d < e.size(); ++d) {
      double m = std::max(std::abs(ws.task.state_box.dims[d].lo),
                          std::abs(ws.task.state_box.dims[d].hi));
      for (int k = 0; k < e[d]; ++k) s *= std::max(m, 1e-6);
    }
    return s;
  };
  for (const auto& e : ws.basis) ws.basis_scale.push_back(monomial_scale(e));
  for (const auto& e : ws.controller_basis) {
    ws.controller_scale.push_back(monomial_scale(e));
  }
  ws.hsq = ws.task.output_norm_sq();
  const int m = sub.mode_count();
  ws.gen_basis.resize(m);
  ws.rate_row.resize(m);
  auto sv = sub.state_vars();
  for (int p = 0; p < m; ++p) {
    for (const auto& e : ws.basis) {
      Polynomial mono(sv);
      mono.add_term(e, 1.0);
      ws.gen_basis[p].push_back(apply_generator(ws.task, p, mono).value);
    }
    ws.rate_row[p] = ws.task.transition_rates[p];
  }

  ws.layout.modes = m;
  ws.layout.barrier_terms = static_cast<int>(ws.basis.size());
  ws.layout.input_dim = sub.input_dim();
  ws.layout.controller_terms = static_cast<int>(ws.controller_basis.size());
  if (ws.task.finite_inputs()) {
    ws.finite_inputs =
        std::get<std::vector<std::vector<double>>>(ws.task.external_input);
    if (ws.finite_inputs.empty() && sub.input_dim() > 0) {
      throw SynthesisError("finite input set is empty");
    }
    ws.layout.controller_unknowns = false;
  } else if (sub.input_dim() > 0) {
    for (int p = 0; p < m; ++p) {
      for (const auto& d : ws.task.modes[p].drift) {
        for (const auto& u : ws.task.input_vars()) {
          if (d.degree_in(u) > 1) {
            throw SynthesisError(
                "box-input synthesis needs drift affine in the inputs");
          }
        }
      }
    }
    ws.layout.controller_unknowns = true;
    ws.controller_coeffs.assign(
        m, std::vector<std::vector<double>>(
               sub.input_dim(), std::vector<double>(ws.controller_basis.size(), 0.0)));
  }

  if (sub.internal_dim() > cfg.verify_grid.internal_grid_dim_limit) {
    ws.conservative_rho_credit = true;
    double floor = 0.0;
    for (const auto& iv : ws.task.internal_input_box.dims) {
      double lo2 = iv.lo * iv.lo, hi2 = iv.hi * iv.hi;
      floor += (iv.lo <= 0.0 && iv.hi >= 0.0) ? 0.0 : std::min(lo2, hi2);
    }
    ws.wsq_floor = floor;
  }

  seed_counterexamples(ws);

  SynthesisResult result;
  auto probe = [&](double kappa) {
    // Input assignments proven for another decay rate may not transfer.
    for (auto& cex : ws.pool) {
      if (cex.condition == 3) cex.input_assignment = -1;
    }
    return run_cegis(ws, kappa);
  };

  if (cfg.tmpl.kappa_hat > 0) {
    ProbeResult pr = probe(cfg.tmpl.kappa_hat);
    result.success = pr.success;
    result.certificate = pr.certificate;
    result.kappa_hat = cfg.tmpl.kappa_hat;
    result.iterations = pr.iterations;
    result.failure_reason = pr.reason;
    result.report = pr.report;
    result.worst_margin = pr.report.worst_margin();
    return result;
  }

  // Outer bisection on the decay rate: feasibility shrinks as kappa grows,
  // so search for the largest rate that still synthesizes. A larger rate
  // tightens both the probability bound and the small-gain margin.
  double lo = cfg.kappa_lo, hi = cfg.kappa_hi;
  ProbeResult hi_probe = probe(hi);
  if (hi_probe.success) {
    result.success = true;
    result.certificate = hi_probe.certificate;
    result.kappa_hat = hi;
    result.iterations = hi_probe.iterations;
    result.report = hi_probe.report;
    result.worst_margin = hi_probe.report.worst_margin();
    return result;
  }
  ProbeResult best = probe(lo);
  if (!best.success) {
    result.failure_reason = best.reason.empty()
                                ? "no certificate at the smallest decay rate"
                                : best.reason;
    result.iterations = best.iterations;
    result.report = best.report;
    result.worst_margin = best.report.worst_margin();
    return result;
  }
  double best_kappa = lo;
  for (int step = 0; step < cfg.kappa_bisection_steps; ++step) {
    double mid = std::sqrt(lo * hi);  // the range spans several decades
    ProbeResult pr = probe(mid);
    if (pr.success) {
      best = std::move(pr);
      best_kappa = mid;
      lo = mid;
    } else {
      hi = mid;
    }
  }
  result.success = true;
  result.certificate = best.certificate;
  result.kappa_hat = best_kappa;
  result.iterations = best.iterations;
  result.report = best.report;
  result.worst_margin = best.report.worst_margin();
  return result;
}

}  // namespace shs
