#include <doctest.h>

#include <fstream>

#include "helpers.hpp"
#include "shsbarrier/errors.hpp"
#include "shsbarrier/pipeline.hpp"

using namespace shs;
using namespace shstest;

namespace {

Json load_json(const std::string& name) {
  std::ifstream in(std::string(SHS_TEST_DATA_DIR) + "/" + name);
  REQUIRE(in.good());
  Json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("reference project reproduces the published analysis numbers") {
  ProjectFile project =
      project_from_json(load_json("kuramoto100_reference.json"));
  PipelineOptions options;
  options.stage = PipelineStage::bound;
  PipelineResult r = run_pipeline(project, options);
  REQUIRE(r.exit_code == 0);

  const Json& compose = r.report.at("compose");
  for (const char* key : {"(q0,q1)", "(q0,q2)"}) {
    CHECK(std::abs(compose.at(key).at("spectral_radius").get<double>() - 0.99) <=
          1e-6);
    CHECK(compose.at(key).at("kappa_hat").get<double>() ==
          doctest::Approx(5e-7).epsilon(1e-9));
  }
  CHECK(compose.at("(q0,q1)").at("gamma").get<double>() == doctest::Approx(320.0));
  CHECK(compose.at("(q0,q1)").at("lambda").get<double>() ==
        doctest::Approx(430000.0));
  CHECK(compose.at("(q0,q1)").at("psi").get<double>() == doctest::Approx(5200.0));
  CHECK(compose.at("(q0,q2)").at("gamma").get<double>() ==
        doctest::Approx(34000.0));
  CHECK(compose.at("(q0,q2)").at("lambda").get<double>() ==
        doctest::Approx(450000.0));
  // mode-wise maximum of {64, 66} summed over the hundred subsystems
  CHECK(compose.at("(q0,q2)").at("psi").get<double>() == doctest::Approx(6600.0));

  const Json& combine = r.report.at("combine");
  double sat1 = combine.at("p1").at("satisfaction_bound").get<double>();
  double sat4 = combine.at("p4").at("satisfaction_bound").get<double>();
  CHECK(sat1 >= 0.935);
  CHECK(sat1 <= 0.945);
  CHECK(sat4 >= 0.850);
  CHECK(sat4 <= 0.860);

  // labels with a direct accepting edge surface the trivial-run note
  CHECK(combine.at("p0").at("trivial_run_present").get<bool>());
  CHECK(combine.at("p0").at("violation_bound").get<double>() == 1.0);
}

TEST_CASE("decomposition stage reports runs and switching structure") {
  ProjectFile project =
      project_from_json(load_json("kuramoto100_reference.json"));
  PipelineOptions options;
  options.stage = PipelineStage::decompose;
  PipelineResult r = run_pipeline(project, options);
  REQUIRE(r.exit_code == 0);
  const Json& dec = r.report.at("decompose");
  CHECK(dec.at("runs").size() == 3);
  CHECK(dec.at("partitions").size() == 2);
  CHECK(dec.at("switching_locations").size() == 4);
  CHECK(dec.at("switching_table").size() == 11);
  bool task_seen = false;
  for (const auto& loc : dec.at("switching_locations")) {
    if (loc.at("kind") == "task" && loc.at("name") == "(q0,q1)") {
      CHECK(loc.at("controller") == "(q0,q1)");
      task_seen = true;
    }
  }
  CHECK(task_seen);
  CHECK_FALSE(dec.at("truncated").get<bool>());
}

TEST_CASE("verification-only project without certificates exits with code 2") {
  Json j = load_json("kuramoto100_reference.json");
  j.erase("certificates");
  ProjectFile project = project_from_json(j);
  PipelineResult r = run_pipeline(project);
  CHECK(r.exit_code == 2);
  CHECK(r.failure_stage == "certificates");
}

TEST_CASE("supplied certificates fail verification when not assumed") {
  Json j = load_json("kuramoto100_reference.json");
  j["assume_certificates"] = false;
  j["grid"] = Json{{"state_points_per_dim", 201},
                   {"lipschitz_points_per_dim", 5}};
  ProjectFile project = project_from_json(j);
  PipelineResult r = run_pipeline(project);
  CHECK(r.exit_code == 2);
  CHECK(r.failure_stage == "certificates");
  CHECK(r.message.find("falsified") != std::string::npos);
}

TEST_CASE("verification-only mode never mutates the supplied certificates") {
  Json j = load_json("kuramoto100_reference.json");
  Json before = j.at("certificates");
  ProjectFile project = project_from_json(j);
  PipelineOptions options;
  options.stage = PipelineStage::bound;
  PipelineResult r = run_pipeline(project, options);
  REQUIRE(r.exit_code == 0);
  // the project JSON is untouched and the parsed certificates still carry
  // the published constants
  CHECK(j.at("certificates") == before);
  CHECK(project.certificates.at("(q0,q1)").at("all").modes[0].gamma == 3.0);
  CHECK(project.certificates.at("(q0,q2)").at("all").modes[1].psi == 66.0);
}

TEST_CASE("report bytes are identical across repeated runs") {
  ProjectFile project =
      project_from_json(load_json("kuramoto100_reference.json"));
  PipelineOptions options;
  options.stage = PipelineStage::bound;
  PipelineResult a = run_pipeline(project, options);
  PipelineResult b = run_pipeline(project, options);
  REQUIRE(a.exit_code == 0);
  CHECK(a.report.dump() == b.report.dump());
}

TEST_CASE("composition failure surfaces as exit code 4") {
  Json j = load_json("kuramoto100_reference.json");
  for (auto& cert : j.at("certificates")) {
    for (auto& mode : cert.at("modes")) {
      mode["gamma"] = 1e7;  // above every unsafe level
    }
  }
  ProjectFile project = project_from_json(j);
  PipelineResult r = run_pipeline(project);
  CHECK(r.exit_code == 4);
  CHECK(r.failure_stage == "compose");
}

TEST_CASE("declared target gates the exit code") {
  Json j = load_json("kuramoto100_reference.json");
  j["target_satisfaction"] = 0.95;  // above the p1 bound of about 0.939
  ProjectFile project = project_from_json(j);
  PipelineOptions options;
  PipelineResult r = run_pipeline(project, options);
  CHECK(r.exit_code == 1);
  CHECK(r.failure_stage == "target");

  j["target_satisfaction"] = 0.80;
  ProjectFile ok = project_from_json(j);
  PipelineResult r2 = run_pipeline(ok, options);
  CHECK(r2.exit_code == 0);
}

TEST_CASE("task regions are sliced per subsystem from the labeling") {
  ProjectFile project =
      project_from_json(load_json("kuramoto100_reference.json"));
  Decomposition dec = decompose(project.complement, project.runs);
  auto tasks = partition_elements(project.complement, dec.all_triples);
  REQUIRE(tasks.size() == 2);
  TaskRegions regions =
      task_regions_for(project.network, project.labeling, tasks[0]);
  CHECK(regions.per_subsystem_initial.size() == 100);
  CHECK(regions.per_subsystem_initial[0].dims[0].lo ==
        doctest::Approx(band1().lo));
  REQUIRE(regions.per_subsystem_unsafe[0].boxes.size() == 2);
  CHECK(regions.per_subsystem_unsafe[0].boxes[1].dims[0].hi ==
        doctest::Approx(band2().hi));
}

TEST_CASE("schema violations are rejected up front") {
  Json j = load_json("kuramoto100_reference.json");
  j.erase("shsbarrier_schema");
  CHECK_THROWS_AS(project_from_json(j), InputError);
}

TEST_CASE("desk project runs the synthesis stage") {
  Json j = load_json("kuramoto_desk10.json");
  j.erase("simulation");  // synthesis only here; the closed loop runs in the
                          // acceptance suite
  ProjectFile project = project_from_json(j);
  PipelineOptions options;
  options.stage = PipelineStage::bound;
  PipelineResult r = run_pipeline(project, options);
  REQUIRE(r.exit_code == 0);
  const Json& certs = r.report.at("certificates");
  for (const char* key : {"(q0,q1)", "(q0,q2)"}) {
    CHECK(certs.at(key).at("source").get<std::string>() == "synthesized");
    CHECK(certs.at(key).at("replicated").get<bool>());
  }
  const Json& combine = r.report.at("combine");
  CHECK(combine.at("p1").at("satisfaction_bound").get<double>() > 0.5);
  CHECK(combine.at("p4").at("satisfaction_bound").get<double>() > 0.5);
}

TEST_CASE("unreachable accepting location certifies every label") {
  Json j = load_json("kuramoto100_reference.json");
  // reroute every edge into q3 back to its source: q3 becomes unreachable
  for (auto& t : j.at("automaton").at("transitions")) {
    if (t.at("to") == "q3" && t.at("from") != "q3") {
      t["to"] = t.at("from");
    }
  }
  j.erase("certificates");  // no tasks remain, so none are needed
  ProjectFile project = project_from_json(j);
  PipelineOptions options;
  options.stage = PipelineStage::bound;
  PipelineResult r = run_pipeline(project, options);
  REQUIRE(r.exit_code == 0);
  CHECK(r.report.at("decompose").at("runs").size() == 0);
  const Json& combine = r.report.at("combine");
  for (const char* label : {"p0", "p1", "p4", "p6"}) {
    CHECK(combine.at(label).at("satisfaction_bound").get<double>() == 1.0);
  }
}

TEST_CASE("heterogeneous networks synthesize per subsystem") {
  Json j = load_json("kuramoto_desk10.json");
  j.erase("simulation");
  ProjectFile project = project_from_json(j);
  // perturb one oscillator's natural frequency: replication must not happen
  Network& net = project.network;
  Polynomial& drift = net.subsystems[3].modes[0].drift[0];
  drift += Polynomial::constant(drift.variables(), 0.005);
  PipelineOptions options;
  options.stage = PipelineStage::certificates;
  PipelineResult r = run_pipeline(project, options);
  REQUIRE(r.exit_code == 0);
  const Json& certs = r.report.at("certificates");
  CHECK(certs.at("(q0,q1)").contains("per_subsystem"));
  CHECK(certs.at("(q0,q1)").at("per_subsystem").size() == 10);
}
