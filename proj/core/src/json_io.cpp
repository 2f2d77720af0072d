#include "shsbarrier/json_io.hpp"

#include <algorithm>

#include "shsbarrier/errors.hpp"

namespace shs {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw InputError("model file: " + what);
}

std::vector<std::string> string_list(const Json& j) {
  std::vector<std::string> out;
  for (const auto& v : j) out.push_back(v.get<std::string>());
  return out;
}

std::vector<Polynomial> poly_list(const Json& j) {
  std::vector<Polynomial> out;
  for (const auto& v : j) out.push_back(poly_from_json(v));
  return out;
}

std::vector<std::vector<Polynomial>> poly_matrix(const Json& j) {
  std::vector<std::vector<Polynomial>> out;
  for (const auto& row : j) out.push_back(poly_list(row));
  return out;
}

Mode mode_from_json(const Json& j) {
  Mode m;
  m.drift = poly_list(j.at("drift"));
  if (j.contains("diffusion")) m.diffusion = poly_matrix(j.at("diffusion"));
  if (j.contains("reset")) m.reset = poly_matrix(j.at("reset"));
  if (j.contains("controller")) m.controller = poly_list(j.at("controller"));
  return m;
}

Json mode_to_json(const Mode& m) {
  Json j;
  Json drift = Json::array();
  for (const auto& p : m.drift) drift.push_back(to_json(p));
  j["drift"] = drift;
  Json diff = Json::array();
  for (const auto& row : m.diffusion) {
    Json r = Json::array();
    for (const auto& p : row) r.push_back(to_json(p));
    diff.push_back(r);
  }
  j["diffusion"] = diff;
  Json reset = Json::array();
  for (const auto& row : m.reset) {
    Json r = Json::array();
    for (const auto& p : row) r.push_back(to_json(p));
    reset.push_back(r);
  }
  j["reset"] = reset;
  if (m.controller) {
    Json c = Json::array();
    for (const auto& p : *m.controller) c.push_back(to_json(p));
    j["controller"] = c;
  }
  return j;
}

Subsystem subsystem_from_json(const Json& j) {
  Subsystem s;
  s.id = j.at("id").get<std::string>();
  s.state_dim = j.at("state_dim").get<int>();
  s.state_box = box_from_json(j.at("state_box"));
  if (j.contains("external_input")) {
    const Json& u = j.at("external_input");
    if (u.contains("box")) {
      s.external_input = box_from_json(u.at("box"));
    } else if (u.contains("finite")) {
      std::vector<std::vector<double>> set;
      for (const auto& v : u.at("finite")) {
        set.push_back(v.get<std::vector<double>>());
      }
      s.external_input = std::move(set);
    } else {
      throw InputError("external_input needs 'box' or 'finite'");
    }
  } else {
    s.external_input = Box{};
  }
  if (j.contains("internal_input_box")) {
    s.internal_input_box = box_from_json(j.at("internal_input_box"));
  }
  for (const auto& m : j.at("modes")) s.modes.push_back(mode_from_json(m));
  s.transition_rates = poly_matrix(j.at("transition_rates"));
  if (j.contains("poisson_rates")) {
    s.poisson_rates = j.at("poisson_rates").get<std::vector<double>>();
  }
  if (j.contains("outputs")) {
    for (const auto& [target, polys] : j.at("outputs").items()) {
      s.outputs.emplace(target, poly_list(polys));
    }
  }
  s.initial_box = box_from_json(j.at("initial_box"));
  if (j.contains("unsafe_region")) {
    s.unsafe_region = region_from_json(j.at("unsafe_region"));
  }
  return s;
}

Json subsystem_to_json(const Subsystem& s) {
  Json j;
  j["id"] = s.id;
  j["state_dim"] = s.state_dim;
  j["state_box"] = to_json(s.state_box);
  if (s.finite_inputs()) {
    Json set = Json::array();
    for (const auto& v :
         std::get<std::vector<std::vector<double>>>(s.external_input)) {
      set.push_back(v);
    }
    j["external_input"] = Json{{"finite", set}};
  } else {
    j["external_input"] = Json{{"box", to_json(std::get<Box>(s.external_input))}};
  }
  j["internal_input_box"] = to_json(s.internal_input_box);
  Json modes = Json::array();
  for (const auto& m : s.modes) modes.push_back(mode_to_json(m));
  j["modes"] = modes;
  Json rates = Json::array();
  for (const auto& row : s.transition_rates) {
    Json r = Json::array();
    for (const auto& p : row) r.push_back(to_json(p));
    rates.push_back(r);
  }
  j["transition_rates"] = rates;
  j["poisson_rates"] = s.poisson_rates;
  Json outputs = Json::object();
  for (const auto& [target, polys] : s.outputs) {
    Json arr = Json::array();
    for (const auto& p : polys) arr.push_back(to_json(p));
    outputs[target] = arr;
  }
  j["outputs"] = outputs;
  j["initial_box"] = to_json(s.initial_box);
  j["unsafe_region"] = to_json(s.unsafe_region);
  return j;
}

// Expands the homogeneous shorthand: `count` copies of the template wired
// all-to-all, with "wsum" in drift polynomials replaced by the sum of the
// internal input coordinates.
Network expand_template(const Json& j) {
  const Json& t = j.at("template");
  const int count = j.at("count").get<int>();
  require(count >= 1, "template count must be at least 1");
  const std::string prefix =
      j.contains("id_prefix") ? j.at("id_prefix").get<std::string>() : "sub";
  const Json& coupling = j.at("coupling");
  std::vector<Polynomial> output = poly_list(coupling.at("output"));
  const int per_neighbor = static_cast<int>(output.size());
  Interval wiv{coupling.at("internal_interval").at("lo").get<double>(),
               coupling.at("internal_interval").at("hi").get<double>()};

  Subsystem base = subsystem_from_json(
      [&] {
        Json tj = t;
        tj["id"] = prefix + "0";
        return tj;
      }());

  const int wdim = (count - 1) * per_neighbor;
  base.internal_input_box.dims.assign(wdim, wiv);

  // Rewrite "wsum" in the drift polynomials over the expanded inputs.
  auto wv = base.internal_vars();
  auto av = base.all_vars();
  Polynomial wsum(av);
  for (const auto& name : wv) wsum += Polynomial::variable(av, name);
  for (auto& mode : base.modes) {
    for (auto& d : mode.drift) {
      bool has_wsum =
          std::find(d.variables().begin(), d.variables().end(), "wsum") !=
          d.variables().end();
      if (has_wsum) {
        std::vector<std::string> from = d.variables();
        std::map<std::string, Polynomial> subs;
        subs.emplace("wsum", wsum);
        std::vector<std::string> target = av;
        d = d.substitute(subs, target);
      } else {
        d = d.embed(av);
      }
    }
  }

  Network net;
  for (int i = 0; i < count; ++i) {
    Subsystem s = base;
    s.id = prefix + std::to_string(i);
    s.outputs.clear();
    for (int k = 0; k < count; ++k) {
      if (k == i) continue;
      s.outputs.emplace(prefix + std::to_string(k), output);
    }
    net.subsystems.push_back(std::move(s));
  }
  return net;
}

}  // namespace

Json to_json(const Polynomial& p) {
  Json terms = Json::array();
  for (const auto& [exps, coeff] : p.terms()) {
    terms.push_back(Json{{"coeff", coeff}, {"exps", exps}});
  }
  return Json{{"vars", p.variables()}, {"terms", terms}};
}

Polynomial poly_from_json(const Json& j) {
  Polynomial p(string_list(j.at("vars")));
  for (const auto& t : j.at("terms")) {
    p.add_term(t.at("exps").get<std::vector<int>>(), t.at("coeff").get<double>());
  }
  return p;
}

Json to_json(const ScalarGainFunction& g) {
  switch (g.kind) {
    case ScalarGainFunction::Kind::zero:
      return Json{{"kind", "zero"}};
    case ScalarGainFunction::Kind::linear:
      return Json{{"kind", "linear"}, {"scale", g.scale}};
    case ScalarGainFunction::Kind::power:
      return Json{{"kind", "power"}, {"scale", g.scale}, {"exponent", g.exponent}};
  }
  return {};
}

ScalarGainFunction gain_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "zero") return ScalarGainFunction::zero();
  if (kind == "linear") {
    return ScalarGainFunction::linear(j.at("scale").get<double>());
  }
  if (kind == "power") {
    return ScalarGainFunction::power(j.at("scale").get<double>(),
                                     j.at("exponent").get<double>());
  }
  throw InputError("unknown gain kind '" + kind + "'");
}

Json to_json(const Box& b) {
  Json lo = Json::array(), hi = Json::array();
  for (const auto& iv : b.dims) {
    lo.push_back(iv.lo);
    hi.push_back(iv.hi);
  }
  return Json{{"lo", lo}, {"hi", hi}};
}

Box box_from_json(const Json& j) {
  auto lo = j.at("lo").get<std::vector<double>>();
  auto hi = j.at("hi").get<std::vector<double>>();
  require(lo.size() == hi.size(), "box lo/hi lengths differ");
  Box b;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    require(lo[i] <= hi[i], "box has lo > hi");
    b.dims.push_back({lo[i], hi[i]});
  }
  return b;
}

Json to_json(const Region& r) {
  Json out = Json::array();
  for (const auto& b : r.boxes) out.push_back(to_json(b));
  return out;
}

Region region_from_json(const Json& j) {
  Region r;
  for (const auto& b : j) r.boxes.push_back(box_from_json(b));
  return r;
}

Network network_from_json(const Json& j) {
  if (j.contains("template")) return expand_template(j);
  Network net;
  for (const auto& s : j.at("subsystems")) {
    net.subsystems.push_back(subsystem_from_json(s));
  }
  require(!net.subsystems.empty(), "network has no subsystems");
  return net;
}

Json to_json(const Network& net) {
  Json subs = Json::array();
  for (const auto& s : net.subsystems) subs.push_back(subsystem_to_json(s));
  return Json{{"subsystems", subs}};
}

Dfa dfa_from_json(const Json& j) {
  Dfa d;
  d.locations = string_list(j.at("locations"));
  d.initial = j.at("initial").get<std::string>();
  d.alphabet = string_list(j.at("alphabet"));
  for (const auto& a : j.at("accepting")) d.accepting.insert(a.get<std::string>());
  for (const auto& t : j.at("transitions")) {
    const std::string from = t.at("from").get<std::string>();
    const std::string to = t.at("to").get<std::string>();
    for (const auto& s : t.at("symbols")) {
      d.transitions[{from, s.get<std::string>()}] = to;
    }
  }
  if (j.contains("complement_of_property") &&
      j.at("complement_of_property").get<bool>() == false) {
    d = d.complement();
  }
  d.check();
  return d;
}

Json to_json(const Dfa& d) {
  Json j;
  j["locations"] = d.locations;
  j["initial"] = d.initial;
  j["alphabet"] = d.alphabet;
  j["accepting"] = std::vector<std::string>(d.accepting.begin(), d.accepting.end());
  Json trans = Json::array();
  for (const auto& from : d.locations) {
    std::map<std::string, std::vector<std::string>> grouped;
    for (const auto& s : d.alphabet) grouped[d.next(from, s)].push_back(s);
    for (const auto& [to, symbols] : grouped) {
      trans.push_back(Json{{"from", from}, {"symbols", symbols}, {"to", to}});
    }
  }
  j["transitions"] = trans;
  j["complement_of_property"] = true;
  return j;
}

Labeling labeling_from_json(const Json& j, const Network& net) {
  Labeling lab;
  lab.remainder_symbol = j.at("remainder").get<std::string>();
  for (const auto& [symbol, spec] : j.at("regions").items()) {
    Region region;
    if (spec.is_array()) {
      region = region_from_json(spec);
    } else if (spec.contains("per_subsystem_box")) {
      Box unit = box_from_json(spec.at("per_subsystem_box"));
      Box full;
      for (const auto& sub : net.subsystems) {
        require(unit.dim() == sub.state_dim,
                "per-subsystem label box dimension mismatch");
        full.dims.insert(full.dims.end(), unit.dims.begin(), unit.dims.end());
      }
      region.boxes.push_back(std::move(full));
    } else {
      throw InputError("label region needs a box list or per_subsystem_box");
    }
    lab.regions.emplace(symbol, std::move(region));
  }
  return lab;
}

PseudoCertificate certificate_from_json(const Json& j) {
  PseudoCertificate cert;
  for (const auto& m : j.at("modes")) {
    ModeCertificate mc;
    mc.barrier = poly_from_json(m.at("barrier"));
    mc.alpha = gain_from_json(m.at("alpha"));
    mc.kappa = gain_from_json(m.at("kappa"));
    mc.rho_int = gain_from_json(m.at("rho_int"));
    mc.gamma = m.at("gamma").get<double>();
    mc.lambda = m.at("lambda").get<double>();
    mc.psi = m.at("psi").get<double>();
    if (m.contains("controller")) mc.controller = poly_list(m.at("controller"));
    cert.modes.push_back(std::move(mc));
  }
  return cert;
}

Json to_json(const PseudoCertificate& c) {
  Json modes = Json::array();
  for (const auto& mc : c.modes) {
    Json m;
    m["barrier"] = to_json(mc.barrier);
    m["alpha"] = to_json(mc.alpha);
    m["kappa"] = to_json(mc.kappa);
    m["rho_int"] = to_json(mc.rho_int);
    m["gamma"] = mc.gamma;
    m["lambda"] = mc.lambda;
    m["psi"] = mc.psi;
    if (mc.controller) {
      Json ctrl = Json::array();
      for (const auto& p : *mc.controller) ctrl.push_back(to_json(p));
      m["controller"] = ctrl;
    }
    modes.push_back(std::move(m));
  }
  return Json{{"modes", modes}};
}

Json to_json(const ConditionReport& r) {
  Json j;
  j["name"] = r.name;
  j["mode"] = r.mode;
  j["status"] = to_string(r.status);
  if (std::isfinite(r.min_margin)) j["min_margin"] = r.min_margin;
  if (!r.witness.empty()) j["witness"] = r.witness;
  j["grid_points"] = r.stats.points;
  j["cell_half_diagonal"] = r.stats.cell_half_diagonal;
  j["lipschitz_estimate"] = r.stats.lipschitz;
  return j;
}

Json to_json(const VerificationReport& r) {
  Json conditions = Json::array();
  for (const auto& c : r.conditions) conditions.push_back(to_json(c));
  return Json{{"conditions", conditions},
              {"falsified", r.any_falsified()},
              {"all_verified", r.all_verified()}};
}

Json to_json(const WilsonInterval& w) {
  return Json{{"lo", w.lo}, {"hi", w.hi}};
}

Json to_json(const TraceReport& r) {
  return Json{{"trajectories", r.trajectories.size()},
              {"violations", r.violations},
              {"empirical_violation", r.empirical_violation},
              {"wilson_95", to_json(r.interval)}};
}

}  // namespace shs
