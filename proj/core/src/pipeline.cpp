#include "shsbarrier/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "shsbarrier/errors.hpp"

namespace shs {

namespace {

GridConfig grid_from_json(const Json& j) {
  GridConfig g;
  if (j.contains("state_points_per_dim")) {
    g.state_points_per_dim = j.at("state_points_per_dim").get<int>();
  }
  if (j.contains("input_points_per_dim")) {
    g.input_points_per_dim = j.at("input_points_per_dim").get<int>();
  }
  if (j.contains("refine_factor")) g.refine_factor = j.at("refine_factor").get<int>();
  if (j.contains("strict")) g.strict = j.at("strict").get<bool>();
  if (j.contains("lipschitz_bound")) {
    g.lipschitz_bound = j.at("lipschitz_bound").get<double>();
  }
  if (j.contains("lipschitz_points_per_dim")) {
    g.lipschitz_points_per_dim = j.at("lipschitz_points_per_dim").get<int>();
  }
  return g;
}

SynthesisConfig synthesis_from_json(const Json& j) {
  SynthesisConfig c;
  auto& t = c.tmpl;
  if (j.contains("barrier_degree")) t.barrier_degree = j.at("barrier_degree").get<int>();
  if (j.contains("controller_degree")) {
    t.controller_degree = j.at("controller_degree").get<int>();
  }
  if (j.contains("kappa_hat")) t.kappa_hat = j.at("kappa_hat").get<double>();
  if (j.contains("alpha_exponent")) t.alpha_exponent = j.at("alpha_exponent").get<double>();
  if (j.contains("rho_int_exponent")) {
    t.rho_int_exponent = j.at("rho_int_exponent").get<double>();
  }
  if (j.contains("lambda_pin")) t.lambda_pin = j.at("lambda_pin").get<double>();
  if (j.contains("gamma_floor")) t.gamma_floor = j.at("gamma_floor").get<double>();
  if (j.contains("margin_slack")) t.margin_slack = j.at("margin_slack").get<double>();
  if (j.contains("max_iterations")) c.max_iterations = j.at("max_iterations").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("kappa_lo")) c.kappa_lo = j.at("kappa_lo").get<double>();
  if (j.contains("kappa_hi")) c.kappa_hi = j.at("kappa_hi").get<double>();
  if (j.contains("kappa_bisection_steps")) {
    c.kappa_bisection_steps = j.at("kappa_bisection_steps").get<int>();
  }
  if (j.contains("seed_grid_points")) {
    c.seed_grid_points = j.at("seed_grid_points").get<int>();
  }
  if (j.contains("falsifier")) {
    const Json& f = j.at("falsifier");
    if (f.contains("grid_points_per_dim")) {
      c.effort.grid_points_per_dim = f.at("grid_points_per_dim").get<int>();
    }
    if (f.contains("multistarts")) c.effort.multistarts = f.at("multistarts").get<int>();
    if (f.contains("descent_steps")) {
      c.effort.descent_steps = f.at("descent_steps").get<int>();
    }
  }
  if (j.contains("verify_grid")) c.verify_grid = grid_from_json(j.at("verify_grid"));
  return c;
}

SimConfig sim_from_json(const Json& j) {
  SimConfig c;
  if (j.contains("dt")) c.dt = j.at("dt").get<double>();
  if (j.contains("trajectories")) c.trajectories = j.at("trajectories").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("method")) {
    const std::string m = j.at("method").get<std::string>();
    if (m == "per_step") {
      c.switch_method = SimConfig::SwitchMethod::per_step;
    } else if (m == "thinning") {
      c.switch_method = SimConfig::SwitchMethod::thinning;
    } else {
      throw InputError("unknown mode-switch method '" + m + "'");
    }
  }
  if (j.contains("rate_upper_bound")) {
    c.rate_upper_bound = j.at("rate_upper_bound").get<double>();
  }
  if (j.contains("decimation")) c.decimation = j.at("decimation").get<int>();
  if (j.contains("jobs")) c.jobs = j.at("jobs").get<int>();
  if (j.contains("store_paths")) c.store_paths = j.at("store_paths").get<bool>();
  return c;
}

Box region_bounding_single_box(const Region& region, const std::string& what) {
  if (region.boxes.size() != 1) {
    throw InputError(what + ": expected exactly one region box, got " +
                     std::to_string(region.boxes.size()));
  }
  return region.boxes.front();
}

Box slice_box(const Box& composite, int offset, int width) {
  Box out;
  for (int k = 0; k < width; ++k) out.dims.push_back(composite.dims[offset + k]);
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
}

void export_traces_csv(const std::string& path, const Network& net,
                       const Labeling& labeling, const TraceReport& report) {
  std::ostringstream os;
  os << "trajectory,t";
  for (int i = 0; i < net.size(); ++i) {
    for (const auto& v : net.subsystems[i].state_vars()) {
      os << ",s" << i << "." << v;
    }
  }
  os << ",modes,label,automaton_location\n";
  for (std::size_t tr = 0; tr < report.trajectories.size(); ++tr) {
    const auto& t = report.trajectories[tr];
    for (std::size_t k = 0; k < t.times.size(); ++k) {
      os << tr << "," << t.times[k];
      for (double v : t.states[k]) os << "," << v;
      os << ",\"";
      for (std::size_t i = 0; i < t.modes[k].size(); ++i) {
        if (i) os << "|";
        os << t.modes[k][i];
      }
      os << "\"," << labeling.label_of(t.states[k]) << ","
         << t.automaton_locations[k] << "\n";
    }
  }
  write_file(path, os.str());
}

}  // namespace

PipelineStage stage_from_string(const std::string& name) {
  if (name == "validate") return PipelineStage::validate;
  if (name == "decompose") return PipelineStage::decompose;
  if (name == "certificates") return PipelineStage::certificates;
  if (name == "compose") return PipelineStage::compose;
  if (name == "bound") return PipelineStage::bound;
  if (name == "simulate") return PipelineStage::simulate;
  if (name == "full") return PipelineStage::full;
  throw InputError("unknown stage '" + name + "'");
}

ProjectFile project_from_json(const Json& j) {
  if (!j.contains("shsbarrier_schema") ||
      j.at("shsbarrier_schema").get<int>() != 1) {
    throw InputError("project file must declare \"shsbarrier_schema\": 1");
  }
  ProjectFile p;
  p.network = network_from_json(j.at("network"));
  p.labeling = labeling_from_json(j.at("labeling"), p.network);
  p.complement = dfa_from_json(j.at("automaton"));
  if (j.contains("horizon")) p.horizon = j.at("horizon").get<double>();
  if (j.contains("target_satisfaction")) {
    p.target_satisfaction = j.at("target_satisfaction").get<double>();
  }
  if (j.contains("assume_certificates")) {
    p.assume_certificates = j.at("assume_certificates").get<bool>();
  }
  if (j.contains("verification_only")) {
    p.verification_only = j.at("verification_only").get<bool>();
  }
  if (j.contains("certificates")) {
    for (const auto& entry : j.at("certificates")) {
      const std::string key = entry.at("partition").get<std::string>();
      const std::string sub = entry.contains("subsystem")
                                  ? entry.at("subsystem").get<std::string>()
                                  : "all";
      p.certificates[key][sub] = certificate_from_json(entry);
    }
  }
  if (j.contains("synthesis")) {
    p.synthesis = synthesis_from_json(j.at("synthesis"));
  }
  if (j.contains("simulation")) {
    p.simulation = sim_from_json(j.at("simulation"));
    if (j.at("simulation").contains("start_labels")) {
      for (const auto& s : j.at("simulation").at("start_labels")) {
        p.simulate_from_labels.push_back(s.get<std::string>());
      }
    }
  }
  if (j.contains("grid")) p.grid = grid_from_json(j.at("grid"));
  if (j.contains("runs")) {
    const Json& r = j.at("runs");
    if (r.contains("max_len")) p.runs.max_len = r.at("max_len").get<int>();
    if (r.contains("simple_paths_only")) {
      p.runs.simple_paths_only = r.at("simple_paths_only").get<bool>();
    }
  }
  if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

ProjectFile load_project(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open project file '" + path + "'");
  Json j;
  in >> j;
  return project_from_json(j);
}

TaskRegions task_regions_for(const Network& net, const Labeling& labeling,
                             const PartitionTask& task) {
  TaskRegions out;
  out.partition_key = task.key();

  Region initial;
  for (const auto& sym : task.initial_symbols) {
    auto it = labeling.regions.find(sym);
    if (it == labeling.regions.end()) {
      throw InputError("task " + task.key() + ": start label '" + sym +
                       "' has no declared region");
    }
    for (const auto& b : it->second.boxes) initial.boxes.push_back(b);
  }
  out.composite_initial =
      region_bounding_single_box(initial, "task " + task.key() + " start region");

  for (const auto& sym : task.unsafe_symbols) {
    auto it = labeling.regions.find(sym);
    if (it == labeling.regions.end()) {
      throw InputError("task " + task.key() + ": unsafe label '" + sym +
                       "' has no declared region (remainder labels cannot be "
                       "unsafe targets)");
    }
    for (const auto& b : it->second.boxes) out.composite_unsafe.boxes.push_back(b);
  }

  int offset = 0;
  for (int i = 0; i < net.size(); ++i) {
    const int n = net.subsystems[i].state_dim;
    out.per_subsystem_initial.push_back(slice_box(out.composite_initial, offset, n));
    Region ri;
    for (const auto& b : out.composite_unsafe.boxes) {
      ri.boxes.push_back(slice_box(b, offset, n));
    }
    out.per_subsystem_unsafe.push_back(std::move(ri));
    offset += n;
  }
  return out;
}

PipelineResult run_pipeline(const ProjectFile& project,
                            const PipelineOptions& options) {
  PipelineResult result;
  Json& report = result.report;
  report["shsbarrier_schema"] = 1;
  report["seed"] = options.seed.value_or(project.seed);
  const std::uint64_t seed = options.seed.value_or(project.seed);

  auto finalize = [&]() -> PipelineResult& {
    if (!options.out_dir.empty()) {
      write_file(options.out_dir + "/report.json", report.dump(2) + "\n");
    }
    return result;
  };
  auto fail = [&](int code, const std::string& stage, const std::string& msg) {
    result.exit_code = code;
    result.failure_stage = stage;
    result.message = msg;
    report["failure"] = Json{{"stage", stage}, {"message", msg}};
    return finalize();
  };

  try {
    // ---- validate ----------------------------------------------------
    {
      auto violations = validate(project.network);
      Box composite;
      for (const auto& sub : project.network.subsystems) {
        composite.dims.insert(composite.dims.end(), sub.state_box.dims.begin(),
                              sub.state_box.dims.end());
      }
      auto label_violations = project.labeling.check(composite, 5);
      Json v = Json::array();
      for (const auto& x : violations) {
        v.push_back(Json{{"subject", x.subject}, {"what", x.what}});
      }
      for (const auto& x : label_violations) {
        v.push_back(Json{{"subject", x.subject}, {"what", x.what}});
      }
      report["validate"] = Json{{"violations", v}};
      if (!violations.empty() || !label_violations.empty()) {
        return fail(2, "validate", "model or labeling violations");
      }
    }
    if (options.stage == PipelineStage::validate) return finalize();

    // ---- decompose ----------------------------------------------------
    Decomposition dec = decompose(project.complement, project.runs);
    std::vector<PartitionTask> partitions =
        partition_elements(project.complement, dec.all_triples);
    SwitchingAutomaton automaton = build_switching_automaton(project.complement);
    {
      Json runs = Json::array();
      for (const auto& r : dec.run_set.runs) runs.push_back(r.locations);
      Json parts = Json::array();
      for (const auto& t : partitions) {
        Json triples = Json::array();
        for (const auto& tr : t.triples) triples.push_back(tr.to_string());
        parts.push_back(Json{{"key", t.key()},
                             {"triples", triples},
                             {"initial_symbols", t.initial_symbols},
                             {"unsafe_symbols", t.unsafe_symbols}});
      }
      Json sw_locations = Json::array();
      for (const auto& loc : automaton.locations) {
        Json entry{{"name", loc.name}};
        switch (loc.kind) {
          case SwitchingAutomaton::Kind::initial:
            entry["kind"] = "initial";
            break;
          case SwitchingAutomaton::Kind::partition:
            entry["kind"] = "task";
            entry["controller"] = loc.name;  // the task whose controller runs
            break;
          case SwitchingAutomaton::Kind::accepting:
            entry["kind"] = "accepting";
            break;
        }
        sw_locations.push_back(std::move(entry));
      }
      Json sw_table = Json::array();
      for (const auto& [key, target] : automaton.transitions) {
        sw_table.push_back(Json{{"from", automaton.locations[key.first].name},
                                {"symbol", key.second},
                                {"to", automaton.locations[target].name}});
      }
      report["decompose"] =
          Json{{"runs", runs},
               {"truncated", dec.run_set.truncated},
               {"partitions", parts},
               {"switching_locations", sw_locations},
               {"switching_table", sw_table},
               {"switching_transitions", automaton.transition_count()}};
    }
    if (options.stage == PipelineStage::decompose) return finalize();

    // ---- certificates (supplied or synthesized) -----------------------
    const int N = project.network.size();
    std::map<std::string, std::vector<PseudoCertificate>> certs_by_partition;
    std::map<std::string, TaskRegions> regions_by_partition;
    Json cert_stage = Json::object();
    // Identical subsystems (up to naming and wiring targets) can share one
    // synthesized certificate and one verification pass.
    auto structural_view = [](const Subsystem& sub) {
      Network one;
      one.subsystems.push_back(sub);
      Json j = to_json(one);
      j["subsystems"][0].erase("id");
      j["subsystems"][0].erase("outputs");
      return j;
    };
    bool homogeneous = true;
    const Json reference_view = structural_view(project.network.subsystems[0]);
    for (const auto& sub : project.network.subsystems) {
      if (structural_view(sub) != reference_view) homogeneous = false;
    }
    GridConfig grid = project.grid;
    grid.strict = options.strict || grid.strict;

    for (const auto& task : partitions) {
      TaskRegions regions =
          task_regions_for(project.network, project.labeling, task);
      regions_by_partition[task.key()] = regions;

      std::vector<PseudoCertificate> certs;
      auto supplied = project.certificates.find(task.key());
      if (supplied != project.certificates.end()) {
        for (int i = 0; i < N; ++i) {
          const auto& by_sub = supplied->second;
          auto it = by_sub.find(project.network.subsystems[i].id);
          if (it == by_sub.end()) it = by_sub.find("all");
          if (it == by_sub.end()) {
            return fail(2, "certificates",
                        "task " + task.key() + ": no certificate for subsystem '" +
                            project.network.subsystems[i].id + "'");
          }
          certs.push_back(it->second);
        }
        Json ver = Json::array();
        if (!project.assume_certificates) {
          // Identical subsystems with identical certificates need only one
          // verification pass.
          const int verify_count = homogeneous ? 1 : N;
          for (int i = 0; i < verify_count; ++i) {
            Subsystem task_sub = project.network.subsystems[i];
            task_sub.initial_box = regions.per_subsystem_initial[i];
            task_sub.unsafe_region = regions.per_subsystem_unsafe[i];
            VerificationReport rep = verify_cpbf(task_sub, certs[i], grid);
            ver.push_back(to_json(rep));
            if (rep.any_falsified()) {
              cert_stage[task.key()] =
                  Json{{"source", "supplied"}, {"verification", ver}};
              report["certificates"] = cert_stage;
              return fail(2, "certificates",
                          "task " + task.key() + ": supplied certificate falsified");
            }
          }
        }
        cert_stage[task.key()] = Json{
            {"source", project.assume_certificates ? "supplied-assumed"
                                                   : "supplied-verified"},
            {"verification", ver}};
      } else {
        if (project.verification_only) {
          return fail(2, "certificates",
                      "verification-only project lacks certificates for task " +
                          task.key());
        }
        if (!project.synthesis) {
          return fail(3, "certificates",
                      "no certificates supplied and no synthesis section for task " +
                          task.key());
        }
        SynthesisConfig scfg = *project.synthesis;
        scfg.seed = seed;
        scfg.verify_grid = grid;
        if (homogeneous) {
          SynthesisResult sr = synthesize_cpbf(
              project.network.subsystems[0], regions.per_subsystem_initial[0],
              regions.per_subsystem_unsafe[0], scfg);
          if (!sr.success) {
            return fail(3, "certificates",
                        "synthesis failed for task " + task.key() + ": " +
                            sr.failure_reason);
          }
          certs.assign(N, sr.certificate);
          cert_stage[task.key()] =
              Json{{"source", "synthesized"},
                   {"kappa_hat", sr.kappa_hat},
                   {"iterations", sr.iterations},
                   {"replicated", true},
                   {"certificate", to_json(sr.certificate)}};
        } else {
          Json per_sub = Json::array();
          for (int i = 0; i < N; ++i) {
            SynthesisResult sr = synthesize_cpbf(
                project.network.subsystems[i], regions.per_subsystem_initial[i],
                regions.per_subsystem_unsafe[i], scfg);
            if (!sr.success) {
              return fail(3, "certificates",
                          "synthesis failed for task " + task.key() +
                              ", subsystem " + project.network.subsystems[i].id +
                              ": " + sr.failure_reason);
            }
            certs.push_back(sr.certificate);
            per_sub.push_back(Json{{"kappa_hat", sr.kappa_hat},
                                   {"iterations", sr.iterations},
                                   {"certificate", to_json(sr.certificate)}});
          }
          cert_stage[task.key()] =
              Json{{"source", "synthesized"}, {"per_subsystem", per_sub}};
        }
      }
      certs_by_partition[task.key()] = std::move(certs);
    }
    report["certificates"] = cert_stage;
    if (options.stage == PipelineStage::certificates) return finalize();

    // ---- gains, small gain, composition -------------------------------
    std::map<std::string, NetworkCertificate> composed;
    Json compose_stage = Json::object();
    for (const auto& task : partitions) {
      const auto& certs = certs_by_partition.at(task.key());
      SmallGainData sgd = extract_gains(certs, project.network);
      SmallGainResult sg = check_small_gain(sgd);
      Json entry;
      entry["spectral_radius"] = sg.spectral_radius;
      auto lambda_diag = sgd.lambda_diag();
      entry["lambda_hat_min"] =
          *std::min_element(lambda_diag.begin(), lambda_diag.end());
      auto delta = sgd.delta_matrix();
      double delta_max = 0.0;
      for (const auto& row : delta) {
        for (double v : row) delta_max = std::max(delta_max, v);
      }
      entry["delta_hat_max"] = delta_max;
      if (N <= 16) {
        entry["lambda_hat"] = lambda_diag;
        entry["delta_hat"] = delta;
      }
      if (!sg.mu) {
        compose_stage[task.key()] = entry;
        report["compose"] = compose_stage;
        return fail(4, "compose",
                    "small-gain condition failed for task " + task.key() +
                        " (spectral radius " + std::to_string(sg.spectral_radius) +
                        ")");
      }
      entry["mu"] = *sg.mu;
      auto balance = weighted_gain_balance(lambda_diag, delta, *sg.mu);
      entry["gain_balance"] = balance;
      NetworkCertificate ncert;
      try {
        ncert = compose_certificate(certs, sgd, *sg.mu);
      } catch (const CompositionError& e) {
        compose_stage[task.key()] = entry;
        report["compose"] = compose_stage;
        return fail(4, "compose", e.what());
      }
      entry["gamma"] = ncert.gamma;
      entry["lambda"] = ncert.lambda;
      entry["psi"] = ncert.psi;
      entry["kappa_hat"] = ncert.kappa_hat;
      entry["level_slack"] = ncert.lambda - ncert.gamma;
      compose_stage[task.key()] = entry;
      composed[task.key()] = ncert;
    }
    report["compose"] = compose_stage;
    if (options.stage == PipelineStage::compose) return finalize();

    // ---- reachability bounds and run combination ----------------------
    std::map<std::string, double> delta_by_partition;
    Json bound_stage = Json::object();
    for (const auto& task : partitions) {
      const NetworkCertificate& nc = composed.at(task.key());
      BoundInput in{nc.gamma, nc.lambda, nc.psi, nc.kappa_hat, project.horizon};
      ReachBound rb = reach_bound(in);
      delta_by_partition[task.key()] = rb.delta;
      bound_stage[task.key()] =
          Json{{"delta", rb.delta},
               {"branch_supermartingale", rb.branch_supermartingale},
               {"branch_cmartingale", rb.branch_cmartingale},
               {"used_supermartingale_branch", rb.used_supermartingale_branch}};
    }
    report["bound"] = bound_stage;

    Json combine_stage = Json::object();
    std::map<std::string, CombinedBound> combined_by_label;
    // A label with no accepting run cannot violate: the sum over an empty
    // run set is zero and the satisfaction bound is one.
    for (const auto& symbol : project.complement.alphabet) {
      if (dec.runs_by_label.count(symbol)) continue;
      CombinedBound cb;
      cb.violation_bound = 0.0;
      cb.satisfaction_bound = 1.0;
      combined_by_label[symbol] = cb;
      combine_stage[symbol] =
          Json{{"violation_bound", 0.0},
               {"satisfaction_bound", 1.0},
               {"trivial_run_present", false},
               {"note", "no accepting run starts from this label"}};
    }
    for (const auto& [label, run_indices] : dec.runs_by_label) {
      std::vector<RunBound> runs;
      for (int idx : run_indices) {
        RunBound rb;
        rb.locations = dec.run_set.runs[idx].locations;
        for (const auto& t : dec.triples_per_run[idx]) {
          std::string key = "(" + t.a + "," + t.b + ")";
          rb.element_bounds.push_back(delta_by_partition.at(key));
        }
        runs.push_back(std::move(rb));
      }
      CombinedBound cb = combine_runs(runs);
      combined_by_label[label] = cb;
      Json entry;
      entry["violation_bound"] = cb.violation_bound;
      entry["satisfaction_bound"] = cb.satisfaction_bound;
      entry["trivial_run_present"] = cb.has_trivial_run;
      if (cb.has_trivial_run) {
        entry["note"] =
            "a length-2 accepting run admits only the trivial bound; the "
            "specification cannot be certified from this label";
      }
      if (dec.run_set.truncated) {
        entry["truncated"] =
            "run enumeration hit the length cap; the bound covers the "
            "enumerated runs only";
      }
      combine_stage[label] = entry;
    }
    report["combine"] = combine_stage;
    if (options.stage == PipelineStage::bound) return finalize();

    // ---- simulation ----------------------------------------------------
    if (project.simulation) {
      SimConfig scfg = *project.simulation;
      scfg.horizon = project.horizon;
      scfg.seed = seed;
      scfg.jobs = std::max(scfg.jobs, options.jobs);

      HybridPolicy policy;
      policy.automaton = automaton;
      for (const auto& task : partitions) {
        PartitionPolicy pp;
        pp.key = task.key();
        pp.unsafe_symbols.insert(task.unsafe_symbols.begin(),
                                 task.unsafe_symbols.end());
        const auto& certs = certs_by_partition.at(task.key());
        for (int i = 0; i < N; ++i) {
          pp.subsystems.push_back(
              make_subsystem_policy(project.network.subsystems[i], certs[i]));
        }
        policy.partition_index[pp.key] =
            static_cast<int>(policy.partitions.size());
        policy.partitions.push_back(std::move(pp));
      }

      std::vector<std::string> start_labels = project.simulate_from_labels;
      if (start_labels.empty()) {
        for (const auto& [label, cb] : combined_by_label) {
          if (!cb.has_trivial_run) start_labels.push_back(label);
        }
      }
      Json sim_stage = Json::object();
      for (const auto& label : start_labels) {
        auto it = project.labeling.regions.find(label);
        if (it == project.labeling.regions.end()) {
          return fail(2, "simulate", "start label '" + label + "' has no region");
        }
        TraceReport tr = simulate(project.network, policy, project.labeling,
                                  project.complement, it->second, scfg);
        SatisfactionEstimate est = estimate_satisfaction(tr, project.complement);
        Json entry = to_json(tr);
        entry["empirical_satisfaction"] = est.empirical_satisfaction;
        auto cb = combined_by_label.find(label);
        if (cb != combined_by_label.end()) {
          entry["analytic_violation_bound"] = cb->second.violation_bound;
          entry["bound_respected"] =
              tr.empirical_violation - 3.0 * tr.interval.half_width() <=
              cb->second.violation_bound;
        }
        sim_stage[label] = entry;
        if (!options.out_dir.empty() && scfg.store_paths) {
          export_traces_csv(options.out_dir + "/traces_" + label + ".csv",
                            project.network, project.labeling, tr);
        }
      }
      report["simulate"] = sim_stage;
    }

    // ---- declared target ------------------------------------------------
    if (project.target_satisfaction) {
      // The target applies to the start labels the project certifies: the
      // declared simulation labels, or every label without a trivial run.
      std::vector<std::string> checked = project.simulate_from_labels;
      if (checked.empty()) {
        for (const auto& [label, cb] : combined_by_label) {
          if (!cb.has_trivial_run) checked.push_back(label);
        }
      }
      double worst = 1.0;
      for (const auto& label : checked) {
        auto it = combined_by_label.find(label);
        if (it != combined_by_label.end()) {
          worst = std::min(worst, it->second.satisfaction_bound);
        }
      }
      report["target"] = Json{{"declared", *project.target_satisfaction},
                              {"checked_labels", checked},
                              {"worst_satisfaction_bound", worst}};
      if (checked.empty() || worst < *project.target_satisfaction) {
        return fail(1, "target", "satisfaction bound misses the declared target");
      }
    }
  } catch (const CapacityError& e) {
    return fail(5, "capacity", e.what());
  } catch (const NumericError& e) {
    return fail(5, "numeric", e.what());
  } catch (const CompositionError& e) {
    return fail(4, "compose", e.what());
  } catch (const SynthesisError& e) {
    return fail(3, "synthesis", e.what());
  } catch (const ConfigError& e) {
    return fail(2, "config", e.what());
  } catch (const InputError& e) {
    return fail(2, "input", e.what());
  }

  return finalize();
}

}  // namespace shs
