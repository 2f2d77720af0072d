#include "shsbarrier/certificate.hpp"

#include <algorithm>
#include <cmath>

#include "shsbarrier/errors.hpp"

namespace shs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Box concat_boxes(const Box& a, const Box& b) {
  Box out = a;
  out.dims.insert(out.dims.end(), b.dims.begin(), b.dims.end());
  return out;
}

ConditionExpr negated(const ConditionExpr& e) {
  ConditionExpr out;
  out.poly = -e.poly;
  out.penalties = e.penalties;
  for (auto& p : out.penalties) p.sign = -p.sign;
  return out;
}

// Margin functions below are >= 0 iff the condition holds.
double numeric_grad_norm(
    const std::function<double(std::span<const double>)>& f,
    std::span<const double> z, std::span<const double> h) {
  std::vector<double> pt(z.begin(), z.end());
  double sq = 0.0;
  for (std::size_t d = 0; d < pt.size(); ++d) {
    double save = pt[d];
    pt[d] = save + h[d];
    double up = f(pt);
    pt[d] = save - h[d];
    double dn = f(pt);
    pt[d] = save;
    double g = (up - dn) / (2.0 * h[d]);
    sq += g * g;
  }
  return std::sqrt(sq);
}

double estimate_lipschitz(
    const std::function<double(std::span<const double>)>& f, const Box& domain,
    const GridConfig& cfg) {
  if (domain.empty()) return 0.0;
  std::vector<double> h(domain.dims.size());
  for (std::size_t d = 0; d < h.size(); ++d) {
    h[d] = std::max(1e-8, 1e-6 * std::max(1.0, domain.dims[d].width()));
  }
  double worst = 0.0;
  for_each_grid_point(domain, cfg.lipschitz_points_per_dim,
                      [&](std::span<const double> z) {
                        worst = std::max(worst, numeric_grad_norm(f, z, h));
                      },
                      cfg.max_grid_points);
  return worst * cfg.lipschitz_safety;
}

ConditionStatus classify(double min_margin, double allowance, bool strict) {
  if (strict ? (min_margin <= 0.0) : (min_margin < 0.0)) {
    return ConditionStatus::falsified;
  }
  if (min_margin > allowance || allowance == 0.0) {
    return ConditionStatus::verified;
  }
  return ConditionStatus::inconclusive;
}

MarginScan scan_margin_axes(
    const std::function<double(std::span<const double>)>& m, const Box& domain,
    const std::vector<int>& counts, int refine_factor,
    std::size_t max_points, double* cell_half_diag_out) {
  MarginScan scan;
  if (domain.empty()) {
    scan.min_margin = m(std::span<const double>{});
    scan.points = 1;
    if (cell_half_diag_out) *cell_half_diag_out = 0.0;
    return scan;
  }
  std::vector<std::vector<double>> axes;
  std::size_t total = 1;
  double diag_sq = 0.0;
  for (std::size_t d = 0; d < domain.dims.size(); ++d) {
    axes.push_back(linspace(domain.dims[d], counts[d]));
    total *= axes.back().size();
    if (total > max_points) {
      throw CapacityError("verification grid exceeds the point cap");
    }
    double step = axes.back().size() > 1
                      ? domain.dims[d].width() / (axes.back().size() - 1)
                      : 0.0;
    diag_sq += 0.25 * step * step;
  }
  if (cell_half_diag_out) *cell_half_diag_out = std::sqrt(diag_sq);

  std::vector<double> pt(domain.dims.size());
  std::vector<std::size_t> idx(domain.dims.size(), 0);
  for (;;) {
    for (std::size_t d = 0; d < idx.size(); ++d) pt[d] = axes[d][idx[d]];
    double v = m(pt);
    ++scan.points;
    if (v < scan.min_margin) {
      scan.min_margin = v;
      scan.argmin = pt;
    }
    std::size_t d = idx.size();
    bool done = true;
    while (d > 0) {
      --d;
      if (++idx[d] < axes[d].size()) {
        done = false;
        break;
      }
      idx[d] = 0;
    }
    if (done) break;
  }

  if (refine_factor > 1 && !scan.argmin.empty()) {
    // One refinement pass around the worst sample.
    Box window = domain;
    std::vector<int> wcounts(domain.dims.size());
    for (std::size_t d = 0; d < domain.dims.size(); ++d) {
      double step = axes[d].size() > 1
                        ? domain.dims[d].width() / (axes[d].size() - 1)
                        : 0.0;
      window.dims[d].lo = std::max(domain.dims[d].lo, scan.argmin[d] - step);
      window.dims[d].hi = std::min(domain.dims[d].hi, scan.argmin[d] + step);
      wcounts[d] = step > 0 ? 2 * refine_factor + 1 : 1;
    }
    MarginScan fine = scan_margin_axes(m, window, wcounts, 1, max_points, nullptr);
    scan.points += fine.points;
    if (fine.min_margin < scan.min_margin) {
      scan.min_margin = fine.min_margin;
      scan.argmin = fine.argmin;
    }
  }
  return scan;
}

// Decomposition of a margin expression that is affine in the internal input
// variables, used to bound the worst case over high-dimensional input boxes
// without gridding them.
struct WAffineBranch {
  Polynomial base;                      // internal-input-free part, over x
  std::vector<Polynomial> coeff;        // per internal var, over x
  std::vector<GainTerm> x_penalties;    // penalties free of internal inputs
  std::vector<std::pair<double, ScalarGainFunction>> wsq_penalties;
  const ConditionExpr* exact = nullptr; // original expression over x+w
};

bool is_wsq(const Polynomial& p, const std::vector<std::string>& wvars) {
  if (!p.uses_only(wvars)) return false;
  Polynomial ref(p.variables());
  for (const auto& w : wvars) {
    Polynomial wi = Polynomial::variable(p.variables(), w);
    ref += wi * wi;
  }
  return p.approx_equal(ref, 1e-12);
}

std::optional<WAffineBranch> decompose_w_affine(
    const ConditionExpr& margin, const std::vector<std::string>& xvars,
    const std::vector<std::string>& wvars) {
  WAffineBranch br;
  br.base = Polynomial(xvars);
  br.coeff.assign(wvars.size(), Polynomial(xvars));
  const auto& vars = margin.poly.variables();
  std::vector<int> wpos(vars.size(), -1);
  for (std::size_t i = 0; i < vars.size(); ++i) {
    for (std::size_t j = 0; j < wvars.size(); ++j) {
      if (vars[i] == wvars[j]) wpos[i] = static_cast<int>(j);
    }
  }
  for (const auto& [exps, c] : margin.poly.terms()) {
    int wdeg = 0;
    int wvar = -1;
    for (std::size_t i = 0; i < exps.size(); ++i) {
      if (wpos[i] >= 0 && exps[i] > 0) {
        wdeg += exps[i];
        wvar = wpos[i];
      }
    }
    if (wdeg > 1) return std::nullopt;
    Polynomial::Exponents xe;
    std::vector<std::string> keep;
    for (std::size_t i = 0; i < exps.size(); ++i) {
      if (wpos[i] < 0) {
        keep.push_back(vars[i]);
        xe.push_back(exps[i]);
      }
    }
    Polynomial piece(keep);
    piece.add_term(xe, c);
    if (wdeg == 0) {
      br.base += piece.embed(xvars);
    } else {
      br.coeff[wvar] += piece.embed(xvars);
    }
  }
  for (const auto& pen : margin.penalties) {
    if (pen.inner.uses_only(xvars)) {
      br.x_penalties.push_back({pen.sign, pen.fn, pen.inner.shrink(xvars)});
    } else if (is_wsq(pen.inner, wvars)) {
      br.wsq_penalties.push_back({pen.sign, pen.fn});
    } else {
      return std::nullopt;
    }
  }
  br.exact = &margin;
  return br;
}

struct WBoxNormBounds {
  double wsq_min = 0.0;
  double wsq_max = 0.0;
};

WBoxNormBounds norm_bounds(const Box& wbox) {
  WBoxNormBounds nb;
  for (const auto& iv : wbox.dims) {
    double lo2 = iv.lo * iv.lo, hi2 = iv.hi * iv.hi;
    nb.wsq_max += std::max(lo2, hi2);
    nb.wsq_min += (iv.lo <= 0.0 && iv.hi >= 0.0) ? 0.0 : std::min(lo2, hi2);
  }
  return nb;
}

}  // namespace

void PseudoCertificate::check(const Subsystem& sub) const {
  if (static_cast<int>(modes.size()) != sub.mode_count()) {
    throw InputError("certificate must carry one barrier per mode");
  }
  for (const auto& mc : modes) {
    if (!mc.barrier.uses_only(sub.state_vars())) {
      throw InputError("barrier depends on non-state variables");
    }
    if (mc.gamma < 0 || mc.psi < 0) {
      throw InputError("gamma and psi must be nonnegative");
    }
    if (!sub.unsafe_region.empty() && !(mc.lambda > 0)) {
      throw InputError("lambda must be positive when the unsafe region is nonempty");
    }
    if (mc.kappa.kind == ScalarGainFunction::Kind::power &&
        mc.kappa.exponent > 1.0) {
      throw InputError("kappa power exponent above 1 admits no linear lower bound");
    }
    if (mc.controller &&
        static_cast<int>(mc.controller->size()) != sub.input_dim()) {
      throw InputError("controller dimension mismatch");
    }
  }
}

void NetworkCertificate::check() const {
  for (double m : mu) {
    if (!(m > 0)) throw InputError("mu must be strictly positive entrywise");
  }
  if (!(lambda > gamma)) {
    throw InputError("network certificate needs lambda > gamma");
  }
}

std::string to_string(ConditionStatus s) {
  switch (s) {
    case ConditionStatus::verified: return "verified";
    case ConditionStatus::falsified: return "falsified";
    case ConditionStatus::inconclusive: return "inconclusive";
  }
  return "?";
}

bool VerificationReport::any_falsified() const {
  return std::any_of(conditions.begin(), conditions.end(), [](const auto& c) {
    return c.status == ConditionStatus::falsified;
  });
}

bool VerificationReport::all_verified() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) {
    return c.status == ConditionStatus::verified;
  });
}

bool VerificationReport::non_falsified_with_nonnegative_margins() const {
  return std::all_of(conditions.begin(), conditions.end(), [](const auto& c) {
    return c.status != ConditionStatus::falsified && c.min_margin >= 0.0;
  });
}

double VerificationReport::worst_margin() const {
  double w = kInf;
  for (const auto& c : conditions) w = std::min(w, c.min_margin);
  return w;
}

MarginScan scan_margin(const std::function<double(std::span<const double>)>& m,
                       const Box& domain, int points_per_dim,
                       int refine_factor, std::size_t max_points) {
  std::vector<int> counts(domain.dims.size(), points_per_dim);
  return scan_margin_axes(m, domain, counts, refine_factor, max_points, nullptr);
}

std::vector<Polynomial> box_face_polys(const Box& box,
                                       const std::vector<std::string>& vars) {
  if (box.dim() > static_cast<int>(vars.size())) {
    throw InputError("box dimension exceeds the variable count");
  }
  std::vector<Polynomial> rows;
  for (int k = 0; k < box.dim(); ++k) {
    Polynomial xk = Polynomial::variable(vars, vars[k]);
    rows.push_back(xk - Polynomial::constant(vars, box.dims[k].lo));
    rows.push_back(Polynomial::constant(vars, box.dims[k].hi) - xk);
  }
  return rows;
}

namespace {

struct ScanOutcome {
  double min_margin = kInf;
  std::vector<double> witness;
  std::size_t points = 0;
  double cell_half_diag = 0.0;
  bool exact_violation = false;  // a concrete point with margin < 0 was found
  double lipschitz = 0.0;
};

ConditionReport make_report(std::string name, int mode, const ScanOutcome& oc,
                            const GridConfig& cfg) {
  if (cfg.strict && !cfg.lipschitz_bound) {
    throw ConfigError("strict verification requires a supplied Lipschitz bound");
  }
  ConditionReport rep;
  rep.name = std::move(name);
  rep.mode = mode;
  rep.min_margin = oc.min_margin;
  rep.witness = oc.witness;
  rep.stats.points = oc.points;
  rep.stats.cell_half_diagonal = oc.cell_half_diag;
  rep.stats.lipschitz = oc.lipschitz;
  double allowance = oc.lipschitz * oc.cell_half_diag;
  if (oc.min_margin < 0.0 && !oc.exact_violation) {
    // A conservative bound dipped below zero without a concrete violating
    // sample: not enough for falsified, never enough for verified.
    rep.status = ConditionStatus::inconclusive;
  } else {
    rep.status = classify(oc.min_margin, allowance, cfg.strict);
  }
  return rep;
}

// Scans max-over-branches margins on an explicit product grid.
ScanOutcome scan_branches(const std::vector<ConditionExpr>& branches,
                          const Box& domain, const std::vector<int>& counts,
                          const GridConfig& cfg) {
  auto value = [&](std::span<const double> z) {
    double best = -kInf;
    for (const auto& br : branches) best = std::max(best, br.eval(z));
    return best;
  };
  ScanOutcome oc;
  MarginScan scan = scan_margin_axes(value, domain, counts, cfg.refine_factor,
                                     cfg.max_grid_points, &oc.cell_half_diag);
  oc.min_margin = scan.min_margin;
  oc.witness = scan.argmin;
  oc.points = scan.points;
  oc.exact_violation = scan.min_margin < 0.0;
  oc.lipschitz = cfg.lipschitz_bound
                     ? *cfg.lipschitz_bound
                     : estimate_lipschitz(value, domain, cfg);
  return oc;
}

// Scans margins over the state grid only, bounding the internal-input part
// analytically. Sound for branches affine in the internal inputs.
ScanOutcome scan_branches_w_affine(const std::vector<WAffineBranch>& branches,
                                   const std::vector<ConditionExpr>& exact,
                                   const Box& xbox, const Box& wbox,
                                   const GridConfig& cfg) {
  WBoxNormBounds nb = norm_bounds(wbox);
  ScanOutcome oc;
  auto bound_at = [&](std::span<const double> x) {
    // max over branches of a per-branch lower bound on min over w.
    double best = -kInf;
    for (const auto& br : branches) {
      double v = br.base.eval(x);
      for (std::size_t j = 0; j < br.coeff.size(); ++j) {
        double c = br.coeff[j].eval(x);
        v += std::min(c * wbox.dims[j].lo, c * wbox.dims[j].hi);
      }
      for (const auto& pen : br.x_penalties) {
        v += pen.sign * pen.fn(pen.inner.eval(x));
      }
      for (const auto& [sign, fn] : br.wsq_penalties) {
        v += sign > 0 ? sign * fn(nb.wsq_min) : sign * fn(nb.wsq_max);
      }
      best = std::max(best, v);
    }
    return best;
  };

  MarginScan scan =
      scan_margin_axes(bound_at, xbox,
                       std::vector<int>(xbox.dims.size(), cfg.state_points_per_dim),
                       cfg.refine_factor, cfg.max_grid_points, &oc.cell_half_diag);
  oc.min_margin = scan.min_margin;
  oc.points = scan.points;
  oc.witness = scan.argmin;
  oc.lipschitz = cfg.lipschitz_bound ? *cfg.lipschitz_bound
                                     : estimate_lipschitz(bound_at, xbox, cfg);

  if (scan.min_margin < 0.0 && !scan.argmin.empty()) {
    // Try to confirm with a concrete point: per-branch minimizing corner.
    const auto& x = scan.argmin;
    for (const auto& br : branches) {
      std::vector<double> z(x.begin(), x.end());
      z.resize(x.size() + wbox.dims.size());
      for (std::size_t j = 0; j < wbox.dims.size(); ++j) {
        double c = br.coeff[j].eval(x);
        z[x.size() + j] = c > 0 ? wbox.dims[j].lo : wbox.dims[j].hi;
      }
      double worst = -kInf;
      for (const auto& e : exact) worst = std::max(worst, e.eval(z));
      if (worst < 0.0) {
        oc.exact_violation = true;
        oc.min_margin = worst;
        oc.witness = z;
        break;
      }
    }
  }
  return oc;
}

}  // namespace

ConditionExpr build_output_bound_margin(const Subsystem& sub,
                                        const ModeCertificate& mc) {
  auto sv = sub.state_vars();
  ConditionExpr m;
  m.poly = mc.barrier.embed(sv);
  if (!mc.alpha.is_zero()) {
    Polynomial hsq = sub.output_norm_sq();
    if (mc.alpha.kind == ScalarGainFunction::Kind::linear ||
        (mc.alpha.kind == ScalarGainFunction::Kind::power &&
         mc.alpha.exponent == 1.0)) {
      m.poly -= hsq * mc.alpha.scale;
    } else {
      m.penalties.push_back({-1.0, mc.alpha, hsq});
    }
  }
  return m;
}

std::vector<ConditionExpr> build_decay_margin_branches(
    const Subsystem& sub, int mode, const PseudoCertificate& cert,
    const std::vector<std::string>& eval_vars) {
  const ModeCertificate& mc = cert.modes[mode];
  std::vector<Polynomial> barriers;
  for (const auto& m : cert.modes) barriers.push_back(m.barrier);
  const auto av = sub.all_vars();
  std::vector<ConditionExpr> branches;

  const std::optional<std::vector<Polynomial>>& ctrl =
      mc.controller ? mc.controller : sub.modes[mode].controller;
  if (ctrl || sub.input_dim() == 0) {
    ConditionExpr cond = assemble_drift_condition(
        sub, mode, barriers, mc.kappa, mc.rho_int, mc.psi, ctrl);
    ConditionExpr m = negated(cond);
    m.poly = m.poly.shrink(eval_vars);
    for (auto& p : m.penalties) p.inner = p.inner.shrink(eval_vars);
    branches.push_back(std::move(m));
  } else if (sub.finite_inputs()) {
    const auto& inputs =
        std::get<std::vector<std::vector<double>>>(sub.external_input);
    if (inputs.empty()) throw InputError("finite input set is empty");
    ConditionExpr cond = assemble_drift_condition(
        sub, mode, barriers, mc.kappa, mc.rho_int, mc.psi, std::nullopt);
    auto uv = sub.input_vars();
    for (const auto& nu : inputs) {
      if (static_cast<int>(nu.size()) != sub.input_dim()) {
        throw InputError("finite input vector has wrong dimension");
      }
      std::map<std::string, Polynomial> fix;
      for (std::size_t j = 0; j < uv.size(); ++j) {
        fix.emplace(uv[j], Polynomial::constant(av, nu[j]));
      }
      ConditionExpr m = negated(cond);
      m.poly = m.poly.substitute(fix, av).shrink(eval_vars);
      for (auto& p : m.penalties) {
        p.inner = p.inner.substitute(fix, av).shrink(eval_vars);
      }
      branches.push_back(std::move(m));
    }
  } else {
    throw InputError(
        "decay condition needs a controller or a finite external input set");
  }
  return branches;
}

VerificationReport verify_cpbf(const Subsystem& sub,
                               const PseudoCertificate& cert,
                               const GridConfig& cfg) {
  cert.check(sub);
  VerificationReport report;
  const auto sv = sub.state_vars();

  for (int p = 0; p < sub.mode_count(); ++p) {
    const ModeCertificate& mc = cert.modes[p];

    {  // B >= alpha(|h|^2) on X
      ConditionExpr m = build_output_bound_margin(sub, mc);
      ScanOutcome oc = scan_branches(
          {m}, sub.state_box,
          std::vector<int>(sub.state_dim, cfg.state_points_per_dim), cfg);
      report.conditions.push_back(make_report("output_lower_bound", p, oc, cfg));
    }
    {  // B <= gamma on the initial set
      ConditionExpr m;
      m.poly = Polynomial::constant(sv, mc.gamma) - mc.barrier.embed(sv);
      ScanOutcome oc = scan_branches(
          {m}, sub.initial_box,
          std::vector<int>(sub.state_dim, cfg.state_points_per_dim), cfg);
      report.conditions.push_back(make_report("initial_level", p, oc, cfg));
    }
    {  // B >= lambda on every unsafe box
      ConditionExpr m;
      m.poly = mc.barrier.embed(sv) - Polynomial::constant(sv, mc.lambda);
      if (sub.unsafe_region.empty()) {
        ConditionReport rep;
        rep.name = "unsafe_level";
        rep.mode = p;
        rep.status = ConditionStatus::verified;
        report.conditions.push_back(rep);
      } else {
        ScanOutcome worst;
        bool first = true;
        for (const auto& ub : sub.unsafe_region.boxes) {
          ScanOutcome oc = scan_branches(
              {m}, ub, std::vector<int>(sub.state_dim, cfg.state_points_per_dim),
              cfg);
          if (first || oc.min_margin < worst.min_margin) {
            std::size_t pts = worst.points + oc.points;
            worst = oc;
            worst.points = pts;
          } else {
            worst.points += oc.points;
          }
          first = false;
        }
        report.conditions.push_back(make_report("unsafe_level", p, worst, cfg));
      }
    }
    {  // decay condition over X (x W)
      const int wdim = sub.internal_dim();
      std::vector<std::string> eval_vars = sv;
      auto wv = sub.internal_vars();
      if (wdim > 0) eval_vars.insert(eval_vars.end(), wv.begin(), wv.end());
      std::vector<ConditionExpr> branches =
          build_decay_margin_branches(sub, p, cert, eval_vars);

      ScanOutcome oc;
      if (wdim == 0) {
        oc = scan_branches(branches, sub.state_box,
                           std::vector<int>(sub.state_dim,
                                            cfg.state_points_per_dim),
                           cfg);
      } else if (wdim <= cfg.internal_grid_dim_limit) {
        Box domain = concat_boxes(sub.state_box, sub.internal_input_box);
        std::vector<int> counts(sub.state_dim, cfg.state_points_per_dim);
        counts.insert(counts.end(), wdim, cfg.input_points_per_dim);
        oc = scan_branches(branches, domain, counts, cfg);
      } else {
        std::vector<WAffineBranch> affine;
        for (const auto& br : branches) {
          auto dec = decompose_w_affine(br, sv, wv);
          if (!dec) {
            throw CapacityError(
                "decay condition is not affine in a high-dimensional internal "
                "input; grid verification is infeasible");
          }
          affine.push_back(std::move(*dec));
        }
        oc = scan_branches_w_affine(affine, branches, sub.state_box,
                                    sub.internal_input_box, cfg);
      }
      report.conditions.push_back(make_report("decay", p, oc, cfg));
    }
  }
  return report;
}

VerificationReport verify_cbf(const Network& net,
                              const std::vector<PseudoCertificate>& certs,
                              const NetworkCertificate& ncert,
                              const GridConfig& cfg) {
  ncert.check();
  const int N = net.size();
  if (static_cast<int>(certs.size()) != N ||
      static_cast<int>(ncert.mu.size()) != N) {
    throw InputError("need one certificate and one weight per subsystem");
  }
  for (int i = 0; i < N; ++i) certs[i].check(net.subsystems[i]);

  VerificationReport report;

  // Level conditions decompose across the product structure: the extremes of
  // a weighted sum of per-subsystem barriers over product sets are sums of
  // per-subsystem extremes.
  double worst_initial = 0.0;
  double worst_unsafe = 0.0;
  bool unsafe_empty = false;
  for (int i = 0; i < N; ++i) {
    const auto& sub = net.subsystems[i];
    double max_b = -kInf;
    double min_bu = kInf;
    for (int p = 0; p < sub.mode_count(); ++p) {
      const auto& b = certs[i].modes[p].barrier;
      auto neg = [&](std::span<const double> x) { return -b.eval(x); };
      MarginScan s = scan_margin(neg, sub.initial_box, cfg.state_points_per_dim,
                                 cfg.refine_factor, cfg.max_grid_points);
      max_b = std::max(max_b, -s.min_margin);
      if (sub.unsafe_region.empty()) {
        unsafe_empty = true;
      } else {
        for (const auto& ub : sub.unsafe_region.boxes) {
          auto pos = [&](std::span<const double> x) { return b.eval(x); };
          MarginScan su = scan_margin(pos, ub, cfg.state_points_per_dim,
                                      cfg.refine_factor, cfg.max_grid_points);
          min_bu = std::min(min_bu, su.min_margin);
        }
      }
    }
    worst_initial += ncert.mu[i] * max_b;
    if (!unsafe_empty) worst_unsafe += ncert.mu[i] * min_bu;
  }
  {
    ConditionReport rep;
    rep.name = "initial_level";
    rep.min_margin = ncert.gamma - worst_initial;
    rep.status = rep.min_margin >= 0 ? ConditionStatus::verified
                                     : ConditionStatus::falsified;
    report.conditions.push_back(rep);
  }
  {
    ConditionReport rep;
    rep.name = "unsafe_level";
    if (unsafe_empty) {
      rep.status = ConditionStatus::verified;
    } else {
      rep.min_margin = worst_unsafe - ncert.lambda;
      rep.status = rep.min_margin >= 0 ? ConditionStatus::verified
                                       : ConditionStatus::falsified;
    }
    report.conditions.push_back(rep);
  }

  // Decay condition per joint mode, with the mode-coupling sum reduced to
  // per-subsystem rate sums and internal inputs wired from neighbor outputs.
  long long joint = 1;
  for (const auto& sub : net.subsystems) joint *= sub.mode_count();
  if (joint > 4096) {
    throw CapacityError("joint mode count exceeds the verification cap");
  }
  Box global_box;
  for (const auto& sub : net.subsystems) {
    global_box = concat_boxes(global_box, sub.state_box);
  }
  std::vector<int> offsets(N, 0);
  for (int i = 1; i < N; ++i) {
    offsets[i] = offsets[i - 1] + net.subsystems[i - 1].state_dim;
  }

  for (int pj = 0; pj < joint; ++pj) {
    auto tuple = joint_mode_tuple(net, pj);
    // Per-subsystem decay pieces (generator + rate coupling), inputs kept.
    std::vector<std::vector<ConditionExpr>> pieces(N);
    for (int i = 0; i < N; ++i) {
      const auto& sub = net.subsystems[i];
      std::vector<Polynomial> barriers;
      for (const auto& m : certs[i].modes) barriers.push_back(m.barrier);
      ConditionExpr core;
      core.poly = apply_generator(sub, tuple[i], barriers[tuple[i]]).value;
      for (int q = 0; q < sub.mode_count(); ++q) {
        core.poly += sub.transition_rates[tuple[i]][q].embed(sub.all_vars()) *
                     barriers[q].embed(sub.all_vars());
      }
      const auto& mc = certs[i].modes[tuple[i]];
      const std::optional<std::vector<Polynomial>>& ctrl =
          mc.controller ? mc.controller : sub.modes[tuple[i]].controller;
      if (ctrl) {
        std::map<std::string, Polynomial> subs;
        auto uv = sub.input_vars();
        for (std::size_t j = 0; j < uv.size(); ++j) {
          subs.emplace(uv[j], (*ctrl)[j].embed(sub.all_vars()));
        }
        core.poly = core.poly.substitute(subs, sub.all_vars());
        pieces[i].push_back(core);
      } else if (sub.input_dim() == 0) {
        pieces[i].push_back(core);
      } else if (sub.finite_inputs()) {
        const auto& inputs =
            std::get<std::vector<std::vector<double>>>(sub.external_input);
        auto uv = sub.input_vars();
        for (const auto& nu : inputs) {
          std::map<std::string, Polynomial> fix;
          for (std::size_t j = 0; j < uv.size(); ++j) {
            fix.emplace(uv[j], Polynomial::constant(sub.all_vars(), nu[j]));
          }
          ConditionExpr alt;
          alt.poly = core.poly.substitute(fix, sub.all_vars());
          pieces[i].push_back(alt);
        }
      } else {
        throw InputError("network decay check needs controllers or finite inputs");
      }
    }

    auto margin = [&](std::span<const double> x) {
      double acc = 0.0;
      double barrier_sum = 0.0;
      for (int i = 0; i < N; ++i) {
        const auto& sub = net.subsystems[i];
        std::span<const double> xi(x.data() + offsets[i], sub.state_dim);
        // Wire the internal inputs from the neighbors' outputs.
        std::vector<double> z(xi.begin(), xi.end());
        z.resize(sub.state_dim + sub.input_dim() + sub.internal_dim(), 0.0);
        int wbase = sub.state_dim + sub.input_dim();
        for (int src : net.incoming(i)) {
          auto [off, width] = net.internal_slice(i, src);
          const auto& h = net.subsystems[src].outputs.at(sub.id);
          std::span<const double> xs(x.data() + offsets[src],
                                     net.subsystems[src].state_dim);
          for (int k = 0; k < width; ++k) {
            z[wbase + off + k] =
                h[k].embed(net.subsystems[src].state_vars()).eval(xs);
          }
        }
        double best = kInf;
        for (const auto& alt : pieces[i]) best = std::min(best, alt.eval(z));
        acc += ncert.mu[i] * best;
        barrier_sum +=
            ncert.mu[i] * certs[i].modes[tuple[i]].barrier.eval(xi);
      }
      return ncert.psi - ncert.kappa_hat * barrier_sum - acc;
    };

    ScanOutcome oc;
    MarginScan scan = scan_margin_axes(
        margin, global_box,
        std::vector<int>(global_box.dims.size(), cfg.state_points_per_dim),
        cfg.refine_factor, cfg.max_grid_points, &oc.cell_half_diag);
    oc.min_margin = scan.min_margin;
    oc.witness = scan.argmin;
    oc.points = scan.points;
    oc.exact_violation = scan.min_margin < 0.0;
    oc.lipschitz = cfg.lipschitz_bound
                       ? *cfg.lipschitz_bound
                       : estimate_lipschitz(margin, global_box, cfg);
    report.conditions.push_back(
        make_report("decay_joint_mode_" + std::to_string(pj), pj, oc, cfg));
  }
  return report;
}

std::vector<ConditionExpr> assemble_sos_expressions(
    const Subsystem& sub, int mode, const PseudoCertificate& cert,
    const SosMultipliers& mult) {
  const ModeCertificate& mc = cert.modes.at(mode);
  const auto av = sub.all_vars();
  const auto sv = sub.state_vars();
  std::vector<ConditionExpr> out;

  auto dot_rows = [&](const std::vector<Polynomial>& l,
                      const std::vector<Polynomial>& g) {
    if (l.empty()) return Polynomial(av);
    if (l.size() != g.size()) {
      throw InputError("multiplier count does not match region row count");
    }
    Polynomial acc(av);
    for (std::size_t k = 0; k < g.size(); ++k) {
      acc += l[k].embed(av) * g[k].embed(av);
    }
    return acc;
  };

  {  // B - l^T g - alpha(h^T h)
    ConditionExpr e = build_output_bound_margin(sub, mc);
    e.poly = e.poly.embed(av) - dot_rows(mult.state, box_face_polys(sub.state_box, sv));
    for (auto& p : e.penalties) p.inner = p.inner.embed(av);
    out.push_back(std::move(e));
  }
  {  // -B - l0^T g0 + gamma
    ConditionExpr e;
    e.poly = Polynomial::constant(av, mc.gamma) - mc.barrier.embed(av) -
             dot_rows(mult.initial, box_face_polys(sub.initial_box, sv));
    out.push_back(std::move(e));
  }
  for (const auto& ub : sub.unsafe_region.boxes) {
    // B - lu^T gu - lambda, one expression per unsafe box
    ConditionExpr e;
    e.poly = mc.barrier.embed(av) - Polynomial::constant(av, mc.lambda) -
             dot_rows(mult.unsafe, box_face_polys(ub, sv));
    out.push_back(std::move(e));
  }
  {  // decay expression
    std::vector<Polynomial> barriers;
    for (const auto& m : cert.modes) barriers.push_back(m.barrier);
    ConditionExpr cond = assemble_drift_condition(
        sub, mode, barriers, mc.kappa, mc.rho_int, mc.psi, mult.controller);
    ConditionExpr e = negated(cond);
    if (!mult.controller && sub.input_dim() > 0 && !mult.input.empty()) {
      // keep the free-input coupling rows when nu stays symbolic
      auto uv = sub.input_vars();
      for (std::size_t j = 0; j < uv.size() && j < mult.input.size(); ++j) {
        e.poly -= Polynomial::variable(av, uv[j]) - mult.input[j].embed(av);
      }
    }
    e.poly -= dot_rows(mult.state_decay, box_face_polys(sub.state_box, sv));
    if (!mult.internal.empty() && sub.internal_dim() > 0) {
      Box wb = sub.internal_input_box;
      auto wv = sub.internal_vars();
      e.poly -= dot_rows(mult.internal, box_face_polys(wb, wv));
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace shs
