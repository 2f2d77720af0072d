#include "shsbarrier/sim.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "shsbarrier/errors.hpp"
#include "shsbarrier/rng.hpp"

namespace shs {

namespace {

constexpr double kRateProbeTolerance = 1e-9;

// Flattened polynomial over a fixed variable layout; evaluation walks a
// contiguous factor list instead of the term map.
struct CompiledPoly {
  struct Factor {
    int var;
    int exp;
  };
  struct Term {
    double coeff;
    int begin;
    int end;
  };
  std::vector<Term> terms;
  std::vector<Factor> factors;

  static CompiledPoly from(const Polynomial& p,
                           const std::vector<std::string>& layout) {
    Polynomial q = p.embed(layout);
    CompiledPoly out;
    for (const auto& [exps, coeff] : q.terms()) {
      Term t{coeff, static_cast<int>(out.factors.size()), 0};
      for (std::size_t v = 0; v < exps.size(); ++v) {
        if (exps[v] > 0) {
          out.factors.push_back({static_cast<int>(v), exps[v]});
        }
      }
      t.end = static_cast<int>(out.factors.size());
      out.terms.push_back(t);
    }
    return out;
  }

  double eval(const double* z) const {
    double sum = 0.0;
    for (const auto& t : terms) {
      double v = t.coeff;
      for (int f = t.begin; f < t.end; ++f) {
        double x = z[factors[f].var];
        for (int e = 0; e < factors[f].exp; ++e) v *= x;
      }
      sum += v;
    }
    return sum;
  }
};

struct CompiledGainTerm {
  double sign;
  ScalarGainFunction fn;
  CompiledPoly inner;
};

struct CompiledExpr {
  CompiledPoly poly;
  std::vector<CompiledGainTerm> penalties;
  double eval(const double* z) const {
    double v = poly.eval(z);
    for (const auto& p : penalties) v += p.sign * p.fn(p.inner.eval(z));
    return v;
  }
};

CompiledExpr compile_expr(const ConditionExpr& e,
                          const std::vector<std::string>& layout) {
  CompiledExpr out;
  out.poly = CompiledPoly::from(e.poly, layout);
  for (const auto& p : e.penalties) {
    out.penalties.push_back({p.sign, p.fn, CompiledPoly::from(p.inner, layout)});
  }
  return out;
}

struct CompiledModePolicy {
  bool has_controller = false;
  std::vector<CompiledPoly> controller;  // state layout
  std::vector<std::vector<double>> inputs;
  bool affine = false;
  std::vector<CompiledPoly> directions;   // state+internal layout
  std::vector<CompiledExpr> margins;      // fallback, state+internal layout
};

struct CompiledIncoming {
  int source;
  int offset;  // into the internal input block
  std::vector<CompiledPoly> components;  // over the source state layout
};

struct CompiledSubsystem {
  int state_dim, input_dim, internal_dim, brownian_dim, poisson_dim, modes;
  int state_offset;
  std::vector<std::vector<CompiledPoly>> drift;               // [mode][k], all vars
  std::vector<std::vector<std::vector<CompiledPoly>>> diffusion;  // state layout
  std::vector<std::vector<std::vector<CompiledPoly>>> reset;
  std::vector<std::vector<CompiledPoly>> rates;               // state layout
  std::vector<CompiledIncoming> incoming;
  std::vector<double> poisson_limits;  // exp(-rate*dt), per channel
  std::vector<std::vector<CompiledModePolicy>> policies;  // [partition][mode]
  Box state_box;
};

double max_total_exit_rate(const Network& net, int grid_points) {
  double worst = 0.0;
  for (const auto& sub : net.subsystems) {
    auto sv = sub.state_vars();
    for (int p = 0; p < sub.mode_count(); ++p) {
      Polynomial diag = sub.transition_rates[p][p].embed(sv);
      for_each_grid_point(sub.state_box, grid_points,
                          [&](std::span<const double> x) {
                            worst = std::max(worst, -diag.eval(x));
                          });
    }
  }
  return worst;
}

struct StartSampler {
  std::vector<Box> boxes;
  std::vector<double> cumulative;

  explicit StartSampler(const Region& region) {
    if (region.empty()) throw InputError("start region is empty");
    boxes = region.boxes;
    double acc = 0.0;
    for (const auto& b : boxes) {
      double vol = 1.0;
      for (const auto& iv : b.dims) vol *= std::max(iv.width(), 1e-300);
      acc += vol;
      cumulative.push_back(acc);
    }
  }

  void sample(Rng& rng, std::vector<double>& x) const {
    double u = rng.uniform01() * cumulative.back();
    std::size_t k = 0;
    while (k + 1 < cumulative.size() && u > cumulative[k]) ++k;
    const Box& b = boxes[k];
    x.resize(b.dims.size());
    for (std::size_t d = 0; d < b.dims.size(); ++d) {
      x[d] = b.dims[d].lo + rng.uniform01() * b.dims[d].width();
    }
  }
};

}  // namespace

int HybridPolicy::index_of(const std::string& key) const {
  auto it = partition_index.find(key);
  return it == partition_index.end() ? -1 : it->second;
}

SubsystemPolicy make_subsystem_policy(const Subsystem& sub,
                                      const PseudoCertificate& cert) {
  cert.check(sub);
  SubsystemPolicy out;
  std::vector<Polynomial> barriers;
  for (const auto& mc : cert.modes) barriers.push_back(mc.barrier);

  std::vector<std::string> eval_vars = sub.state_vars();
  auto wv = sub.internal_vars();
  eval_vars.insert(eval_vars.end(), wv.begin(), wv.end());
  auto uv = sub.input_vars();
  const auto av = sub.all_vars();

  for (int p = 0; p < sub.mode_count(); ++p) {
    const ModeCertificate& mc = cert.modes[p];
    ModePolicy mp;
    const std::optional<std::vector<Polynomial>>& ctrl =
        mc.controller ? mc.controller : sub.modes[p].controller;
    if (ctrl) {
      mp.controller = *ctrl;
    } else if (sub.finite_inputs()) {
      mp.inputs = std::get<std::vector<std::vector<double>>>(sub.external_input);
      ConditionExpr cond = assemble_drift_condition(
          sub, p, barriers, mc.kappa, mc.rho_int, mc.psi, std::nullopt);

      bool affine = true;
      for (const auto& u : uv) {
        if (cond.poly.degree_in(u) > 1) affine = false;
      }
      for (const auto& pen : cond.penalties) {
        if (!pen.inner.uses_only(eval_vars)) affine = false;
      }
      if (affine) {
        // Input selection only needs the input-direction part of the margin:
        // score(nu) = sum_j -d(cond)/d(u_j) * nu_j.
        mp.affine_in_inputs = true;
        for (const auto& u : uv) {
          Polynomial d = -cond.poly.partial(u);
          if (!d.uses_only(eval_vars)) {
            mp.affine_in_inputs = false;
            break;
          }
          mp.input_directions.push_back(d.shrink(eval_vars));
        }
      }
      if (!mp.affine_in_inputs) {
        for (const auto& nu : mp.inputs) {
          std::map<std::string, Polynomial> fix;
          for (std::size_t j = 0; j < uv.size(); ++j) {
            fix.emplace(uv[j], Polynomial::constant(av, nu[j]));
          }
          ConditionExpr margin;
          margin.poly = -cond.poly.substitute(fix, av).shrink(eval_vars);
          for (const auto& pen : cond.penalties) {
            margin.penalties.push_back(
                {-pen.sign, pen.fn, pen.inner.substitute(fix, av).shrink(eval_vars)});
          }
          mp.margins.push_back(std::move(margin));
        }
      }
    } else if (sub.input_dim() != 0) {
      throw InputError("subsystem '" + sub.id +
                       "' has no controller and no finite input set");
    }
    out.modes.push_back(std::move(mp));
  }
  return out;
}

WilsonInterval wilson_interval(int successes, int trials, double z) {
  WilsonInterval out;
  if (trials <= 0) return out;
  double n = trials;
  double p = static_cast<double>(successes) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2 * n)) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  out.lo = std::max(0.0, center - half);
  out.hi = std::min(1.0, center + half);
  return out;
}

TraceReport simulate(const Network& net, const HybridPolicy& policy,
                     const Labeling& labeling, const Dfa& complement,
                     const Region& start_region, const SimConfig& cfg) {
  if (!(cfg.dt > 0)) throw ConfigError("time step must be positive");
  if (cfg.trajectories <= 0) throw ConfigError("need at least one trajectory");
  double exit_rate = max_total_exit_rate(net, 11);
  if (cfg.dt * exit_rate > cfg.max_rate_dt + kRateProbeTolerance) {
    throw ConfigError(
        "dt too large for the sampled switching rates: dt * rate = " +
        std::to_string(cfg.dt * exit_rate));
  }
  if (cfg.switch_method == SimConfig::SwitchMethod::thinning) {
    if (!(cfg.rate_upper_bound >= exit_rate)) {
      throw ConfigError(
          "thinning needs a rate upper bound covering the sampled rates");
    }
    if (cfg.dt * cfg.rate_upper_bound > 1.0) {
      throw ConfigError("thinning step probability exceeds one");
    }
  }

  const int N = net.size();
  // Compile every polynomial once; the step loop only evaluates.
  std::vector<CompiledSubsystem> cs(N);
  int total_dim = 0;
  for (int i = 0; i < N; ++i) {
    const Subsystem& sub = net.subsystems[i];
    if (sub.state_dim + sub.internal_dim() > 64 || sub.input_dim() > 8 ||
        sub.brownian_dim() > 8 || sub.poisson_dim() > 8) {
      throw CapacityError("subsystem '" + sub.id +
                          "' exceeds the simulator's per-subsystem buffers");
    }
    CompiledSubsystem& c = cs[i];
    c.state_dim = sub.state_dim;
    c.input_dim = sub.input_dim();
    c.internal_dim = sub.internal_dim();
    c.brownian_dim = sub.brownian_dim();
    c.poisson_dim = sub.poisson_dim();
    c.modes = sub.mode_count();
    c.state_offset = total_dim;
    c.state_box = sub.state_box;
    total_dim += sub.state_dim;
    auto sv = sub.state_vars();
    auto av = sub.all_vars();
    c.drift.resize(c.modes);
    c.diffusion.resize(c.modes);
    c.reset.resize(c.modes);
    c.rates.resize(c.modes);
    for (int p = 0; p < c.modes; ++p) {
      for (int k = 0; k < c.state_dim; ++k) {
        c.drift[p].push_back(CompiledPoly::from(sub.modes[p].drift[k], av));
      }
      c.diffusion[p].resize(c.state_dim);
      c.reset[p].resize(c.state_dim);
      for (int k = 0; k < c.state_dim; ++k) {
        for (int b = 0; b < c.brownian_dim; ++b) {
          c.diffusion[p][k].push_back(
              CompiledPoly::from(sub.modes[p].diffusion[k][b], sv));
        }
        for (int r = 0; r < c.poisson_dim; ++r) {
          c.reset[p][k].push_back(CompiledPoly::from(sub.modes[p].reset[k][r], sv));
        }
      }
      for (int q = 0; q < c.modes; ++q) {
        c.rates[p].push_back(CompiledPoly::from(sub.transition_rates[p][q], sv));
      }
    }
    for (int src : net.incoming(i)) {
      auto [off, width] = net.internal_slice(i, src);
      CompiledIncoming inc;
      inc.source = src;
      inc.offset = off;
      const auto& h = net.subsystems[src].outputs.at(sub.id);
      for (const auto& comp : h) {
        inc.components.push_back(
            CompiledPoly::from(comp, net.subsystems[src].state_vars()));
      }
      cs[i].incoming.push_back(std::move(inc));
    }
    for (double rate : sub.poisson_rates) {
      c.poisson_limits.push_back(std::exp(-rate * cfg.dt));
    }
    std::vector<std::string> xw = sv;
    auto wv = sub.internal_vars();
    xw.insert(xw.end(), wv.begin(), wv.end());
    c.policies.resize(policy.partitions.size());
    for (std::size_t pp = 0; pp < policy.partitions.size(); ++pp) {
      const SubsystemPolicy& sp = policy.partitions[pp].subsystems.at(i);
      for (int p = 0; p < c.modes; ++p) {
        const ModePolicy& mp = sp.modes[p];
        CompiledModePolicy cmp;
        if (mp.controller) {
          cmp.has_controller = true;
          for (const auto& poly : *mp.controller) {
            cmp.controller.push_back(CompiledPoly::from(poly, sv));
          }
        }
        cmp.inputs = mp.inputs;
        cmp.affine = mp.affine_in_inputs;
        for (const auto& d : mp.input_directions) {
          cmp.directions.push_back(CompiledPoly::from(d, xw));
        }
        for (const auto& m : mp.margins) {
          cmp.margins.push_back(compile_expr(m, xw));
        }
        c.policies[pp].push_back(std::move(cmp));
      }
    }
  }

  StartSampler sampler(start_region);
  const long long steps = std::llround(cfg.horizon / cfg.dt);
  const double sqrt_dt = std::sqrt(cfg.dt);

  TraceReport report;
  report.trajectories.resize(cfg.trajectories);

  auto poisson_fast = [](Rng& rng, double limit) {
    // Knuth product method with the threshold precomputed.
    int k = 0;
    double p = rng.uniform01();
    while (p > limit) {
      ++k;
      p *= rng.uniform01();
    }
    return k;
  };

  auto run_one = [&](int idx) {
    Rng rng = Rng::stream(cfg.seed, static_cast<std::uint64_t>(idx));
    TrajectoryOutcome& out = report.trajectories[idx];

    std::vector<double> x;
    sampler.sample(rng, x);
    if (static_cast<int>(x.size()) != total_dim) {
      throw InputError("start region dimension does not match the composite state");
    }
    std::vector<double> x_next = x;
    std::vector<int> mode(N, 0);
    for (int i = 0; i < N; ++i) {
      mode[i] = std::min(static_cast<int>(rng.uniform01() * cs[i].modes),
                         cs[i].modes - 1);
    }

    std::string label = labeling.label_of(x);
    out.word.push_back(label);
    std::string dfa_loc = complement.next(complement.initial, label);
    out.violated = complement.is_accepting(dfa_loc);
    int sw_loc = policy.automaton.step(policy.automaton.initial_location, label);
    if (sw_loc < 0) sw_loc = policy.automaton.initial_location;
    auto partition_of = [&](int loc) {
      if (loc >= 0 &&
          policy.automaton.locations[loc].kind ==
              SwitchingAutomaton::Kind::partition) {
        return policy.index_of(policy.automaton.locations[loc].name);
      }
      return -1;
    };
    int active = partition_of(sw_loc);

    auto maybe_store = [&](long long step, double t) {
      if (!cfg.store_paths) return;
      if (step % cfg.decimation != 0 && step != steps) return;
      out.times.push_back(t);
      out.states.push_back(x);
      out.modes.push_back(mode);
      out.automaton_locations.push_back(sw_loc);
    };
    maybe_store(0, 0.0);

    std::vector<double> zbuf;
    for (long long step = 0; step < steps; ++step) {
      for (int i = 0; i < N; ++i) {
        const CompiledSubsystem& c = cs[i];
        const double* xi = x.data() + c.state_offset;

        // Evaluation buffer layout: [state, inputs, internal inputs].
        zbuf.assign(c.state_dim + c.input_dim + c.internal_dim, 0.0);
        std::copy(xi, xi + c.state_dim, zbuf.begin());
        const int wbase = c.state_dim + c.input_dim;
        for (const auto& inc : c.incoming) {
          const double* xs = x.data() + cs[inc.source].state_offset;
          for (std::size_t k = 0; k < inc.components.size(); ++k) {
            zbuf[wbase + inc.offset + k] = inc.components[k].eval(xs);
          }
        }

        if (c.input_dim > 0 && active >= 0) {
          const CompiledModePolicy& mp = c.policies[active][mode[i]];
          if (mp.has_controller) {
            for (int j = 0; j < c.input_dim; ++j) {
              zbuf[c.state_dim + j] = mp.controller[j].eval(xi);
            }
          } else if (!mp.inputs.empty()) {
            // xw view: state then internal inputs.
            double xw[64];
            std::copy(zbuf.begin(), zbuf.begin() + c.state_dim, xw);
            std::copy(zbuf.begin() + wbase, zbuf.end(), xw + c.state_dim);
            int best = 0;
            if (mp.affine) {
              double dir[8];
              for (int j = 0; j < c.input_dim; ++j) {
                dir[j] = mp.directions[j].eval(xw);
              }
              double best_score = -std::numeric_limits<double>::infinity();
              for (std::size_t a = 0; a < mp.inputs.size(); ++a) {
                double score = 0.0;
                for (int j = 0; j < c.input_dim; ++j) {
                  score += dir[j] * mp.inputs[a][j];
                }
                if (score > best_score) {
                  best_score = score;
                  best = static_cast<int>(a);
                }
              }
            } else {
              double best_margin = mp.margins[0].eval(xw);
              for (std::size_t a = 1; a < mp.margins.size(); ++a) {
                double m = mp.margins[a].eval(xw);
                if (m > best_margin) {
                  best_margin = m;
                  best = static_cast<int>(a);
                }
              }
            }
            for (int j = 0; j < c.input_dim; ++j) {
              zbuf[c.state_dim + j] = mp.inputs[best][j];
            }
          }
        }

        const int p = mode[i];
        double dw[8];
        for (int b = 0; b < c.brownian_dim; ++b) dw[b] = rng.normal() * sqrt_dt;
        int dn[8];
        for (int r = 0; r < c.poisson_dim; ++r) {
          dn[r] = poisson_fast(rng, c.poisson_limits[r]);
        }
        double uswitch = rng.uniform01();

        for (int k = 0; k < c.state_dim; ++k) {
          double dx = c.drift[p][k].eval(zbuf.data()) * cfg.dt;
          for (int b = 0; b < c.brownian_dim; ++b) {
            dx += c.diffusion[p][k][b].eval(xi) * dw[b];
          }
          for (int r = 0; r < c.poisson_dim; ++r) {
            if (dn[r] != 0) dx += c.reset[p][k][r].eval(xi) * dn[r];
          }
          double v = xi[k] + dx;
          // Stopped-process convention: freeze at the state-set boundary.
          v = std::clamp(v, c.state_box.dims[k].lo, c.state_box.dims[k].hi);
          x_next[c.state_offset + k] = v;
        }

        if (c.modes > 1) {
          if (cfg.switch_method == SimConfig::SwitchMethod::per_step) {
            double stay = 1.0 + c.rates[p][p].eval(xi) * cfg.dt;
            if (stay < 0) {
              throw NumericError(
                  "negative stay probability; reduce dt (subsystem " +
                  std::to_string(i) + ")");
            }
            double acc = 0.0;
            for (int q = 0; q < c.modes; ++q) {
              if (q == p) continue;
              acc += c.rates[p][q].eval(xi) * cfg.dt;
              if (uswitch < acc) {
                mode[i] = q;
                break;
              }
            }
          } else {
            double candidate = cfg.rate_upper_bound * cfg.dt;
            if (uswitch < candidate) {
              double u = uswitch / candidate;
              double acc = 0.0;
              for (int q = 0; q < c.modes; ++q) {
                if (q == p) continue;
                acc += c.rates[p][q].eval(xi) / cfg.rate_upper_bound;
                if (u < acc) {
                  mode[i] = q;
                  break;
                }
              }
            }
          }
        }
      }

      std::swap(x, x_next);

      const std::string& lab = labeling.label_of(x);
      if (lab != out.word.back()) {
        out.word.push_back(lab);
        dfa_loc = complement.next(dfa_loc, lab);
        if (complement.is_accepting(dfa_loc)) out.violated = true;
        int tgt = policy.automaton.step(sw_loc, lab);
        if (tgt >= 0) {
          sw_loc = tgt;
          int pt = partition_of(tgt);
          if (pt >= 0) active = pt;
        }
      }
      if (active >= 0 &&
          policy.partitions[active].unsafe_symbols.count(out.word.back())) {
        out.reached_unsafe = true;
      }
      maybe_store(step + 1, (step + 1) * cfg.dt);
    }
  };

  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (int idx = 0; idx < cfg.trajectories; ++idx) run_one(idx);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (int t = 0; t < jobs; ++t) {
      pool.emplace_back([&, t]() {
        try {
          for (int idx = t; idx < cfg.trajectories; idx += jobs) run_one(idx);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  for (const auto& tr : report.trajectories) {
    if (tr.violated) ++report.violations;
  }
  report.empirical_violation =
      static_cast<double>(report.violations) / cfg.trajectories;
  report.interval = wilson_interval(report.violations, cfg.trajectories);
  return report;
}

SatisfactionEstimate estimate_satisfaction(const TraceReport& report,
                                           const Dfa& complement) {
  SatisfactionEstimate out;
  int accepted = 0;
  for (const auto& tr : report.trajectories) {
    if (complement.accepts(tr.word)) ++accepted;
  }
  int n = static_cast<int>(report.trajectories.size());
  out.empirical_violation = n > 0 ? static_cast<double>(accepted) / n : 0.0;
  out.empirical_satisfaction = 1.0 - out.empirical_violation;
  out.violation_interval = wilson_interval(accepted, n);
  return out;
}

}  // namespace shs
