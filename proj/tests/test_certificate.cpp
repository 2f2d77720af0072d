#include <doctest.h>

#include "helpers.hpp"
#include "shsbarrier/certificate.hpp"
#include "shsbarrier/errors.hpp"
#include "shsbarrier/generator.hpp"

using namespace shs;
using namespace shstest;

namespace {

// Static scalar system certifiable by a parabola barrier.
Subsystem static_system() {
  Subsystem s;
  s.id = "static";
  s.state_dim = 1;
  s.state_box = Box::cube(0.0, 1.0, 1);
  s.external_input = Box{};
  s.internal_input_box = Box{};
  Mode m;
  m.drift = {Polynomial::constant({"x0"}, 0.0)};
  m.diffusion = {{}};
  m.reset = {{}};
  s.modes = {m};
  s.transition_rates = {{Polynomial::constant({"x0"}, 0.0)}};
  s.initial_box = Box::cube(0.4, 0.6, 1);
  s.unsafe_region.boxes = {Box::cube(0.0, 0.1, 1), Box::cube(0.9, 1.0, 1)};
  return s;
}

PseudoCertificate parabola_certificate() {
  PseudoCertificate c;
  ModeCertificate mc;
  mc.barrier = uni("x0", {25.0, -100.0, 100.0});  // 100 (x - 1/2)^2
  mc.alpha = ScalarGainFunction::zero();
  mc.kappa = ScalarGainFunction::linear(1e-6);
  mc.rho_int = ScalarGainFunction::zero();
  mc.gamma = 1.0;
  mc.lambda = 16.0;
  mc.psi = 1e-4;
  c.modes = {mc};
  return c;
}

const GridConfig kFastGrid = [] {
  GridConfig g;
  g.state_points_per_dim = 201;
  g.lipschitz_points_per_dim = 11;
  return g;
}();

}  // namespace

TEST_CASE("degenerate all-zero certificate verifies at equality") {
  Subsystem s = static_system();
  s.unsafe_region = Region{};
  PseudoCertificate c;
  ModeCertificate mc;
  mc.barrier = Polynomial(std::vector<std::string>{"x0"});  // identically zero
  mc.alpha = ScalarGainFunction::zero();
  mc.kappa = ScalarGainFunction::zero();
  mc.rho_int = ScalarGainFunction::zero();
  c.modes = {mc};
  VerificationReport rep = verify_cpbf(s, c, kFastGrid);
  CHECK(rep.all_verified());
  CHECK_FALSE(rep.any_falsified());
}

TEST_CASE("parabola certificate verifies on the static system") {
  Subsystem s = static_system();
  PseudoCertificate c = parabola_certificate();
  VerificationReport rep = verify_cpbf(s, c, kFastGrid);
  CHECK_FALSE(rep.any_falsified());
  CHECK(rep.non_falsified_with_nonnegative_margins());
}

TEST_CASE("raising the unsafe level falsifies with a genuine witness") {
  Subsystem s = static_system();
  PseudoCertificate c = parabola_certificate();
  c.modes[0].lambda = 1e6;
  VerificationReport rep = verify_cpbf(s, c, kFastGrid);
  REQUIRE(rep.any_falsified());
  bool checked = false;
  for (const auto& cond : rep.conditions) {
    if (cond.status != ConditionStatus::falsified) continue;
    CHECK(cond.name == "unsafe_level");
    REQUIRE(!cond.witness.empty());
    CHECK(s.unsafe_region.contains(cond.witness));
    double b = c.modes[0].barrier.eval(std::span(cond.witness).first(1));
    CHECK(c.modes[0].lambda - b > 1e-12);  // exact re-evaluation violates
    checked = true;
  }
  CHECK(checked);
}

TEST_CASE("monotone slack changes never flip verified into falsified") {
  Subsystem s = static_system();
  PseudoCertificate base = parabola_certificate();
  VerificationReport before = verify_cpbf(s, base, kFastGrid);
  REQUIRE_FALSE(before.any_falsified());
  PseudoCertificate looser = base;
  looser.modes[0].gamma += 1.0;
  looser.modes[0].psi += 1.0;
  looser.modes[0].lambda -= 1.0;
  VerificationReport after = verify_cpbf(s, looser, kFastGrid);
  CHECK_FALSE(after.any_falsified());
}

TEST_CASE("strict mode demands a supplied Lipschitz bound") {
  Subsystem s = static_system();
  GridConfig g = kFastGrid;
  g.strict = true;
  CHECK_THROWS_AS(verify_cpbf(s, parabola_certificate(), g), ConfigError);
  g.lipschitz_bound = 250.0;
  // the parabola touches its levels exactly at the box edges, which strict
  // mode counts as falsified
  VerificationReport rep = verify_cpbf(s, parabola_certificate(), g);
  CHECK(rep.any_falsified());
  PseudoCertificate slack = parabola_certificate();
  slack.modes[0].barrier = uni("x0", {25.01, -100.0, 100.0});  // + 0.01 floor
  slack.modes[0].gamma = 1.5;
  slack.modes[0].lambda = 15.0;
  VerificationReport rep2 = verify_cpbf(s, slack, g);
  CHECK_FALSE(rep2.any_falsified());
}

TEST_CASE("published reference certificate is falsified on its own regions") {
  // The printed coefficients do not satisfy the initial-level condition:
  // the barrier evaluates in the tens of thousands on the start band while
  // the declared level is 3. The report must say so with a concrete witness.
  Subsystem s = kuramoto_subsystem(2, false, -30000.0, 25000.0);
  PseudoCertificate c = reference_certificate_task1();
  VerificationReport rep = verify_cpbf(s, c, kFastGrid);
  REQUIRE(rep.any_falsified());
  bool initial_falsified = false;
  for (const auto& cond : rep.conditions) {
    if (cond.name == "initial_level" &&
        cond.status == ConditionStatus::falsified) {
      initial_falsified = true;
      REQUIRE(!cond.witness.empty());
      double b = c.modes[cond.mode].barrier.eval(std::span(cond.witness).first(1));
      CHECK(b - c.modes[cond.mode].gamma > 1e-12);
      CHECK(b > 1e4);  // the mismatch is four orders of magnitude
    }
    if (cond.name == "unsafe_level") {
      CHECK(cond.status != ConditionStatus::falsified);
    }
  }
  CHECK(initial_falsified);
}

TEST_CASE("high-dimensional internal inputs use the sound affine bound") {
  Subsystem s = kuramoto_subsystem(100, false, -30000.0, 25000.0);  // 99 internal inputs
  PseudoCertificate c = reference_certificate_task1();
  GridConfig g = kFastGrid;
  g.state_points_per_dim = 101;
  VerificationReport rep = verify_cpbf(s, c, g);
  bool saw_decay = false;
  for (const auto& cond : rep.conditions) {
    if (cond.name == "decay") saw_decay = true;
  }
  CHECK(saw_decay);
  // the level conditions are input-free and must match the two-node run
  Subsystem s2 = kuramoto_subsystem(2, false, -30000.0, 25000.0);
  VerificationReport rep2 = verify_cpbf(s2, c, g);
  for (std::size_t i = 0; i < rep.conditions.size(); ++i) {
    if (rep.conditions[i].name == "initial_level") {
      CHECK(rep.conditions[i].min_margin ==
            doctest::Approx(rep2.conditions[i].min_margin));
    }
  }
}

TEST_CASE("certificate invariants are enforced") {
  Subsystem s = static_system();
  PseudoCertificate c = parabola_certificate();
  c.modes[0].lambda = 0.0;  // unsafe region nonempty: lambda must be positive
  CHECK_THROWS_AS(verify_cpbf(s, c, kFastGrid), InputError);
  PseudoCertificate c2 = parabola_certificate();
  c2.modes[0].kappa = ScalarGainFunction::power(1.0, 2.0);
  CHECK_THROWS_AS(verify_cpbf(s, c2, kFastGrid), InputError);
}

TEST_CASE("network certificate invariant rejects gamma >= lambda") {
  NetworkCertificate nc;
  nc.mu = {1.0};
  nc.gamma = 5.0;
  nc.lambda = 5.0;
  nc.psi = 0.0;
  nc.kappa_hat = 1.0;
  CHECK_THROWS_AS(nc.check(), InputError);
}

TEST_CASE("singleton network verification matches the subsystem check") {
  Network net;
  net.subsystems.push_back(static_system());
  net.subsystems[0].internal_input_box = Box{};
  PseudoCertificate c = parabola_certificate();
  NetworkCertificate nc;
  nc.mu = {1.0};
  nc.gamma = c.modes[0].gamma;
  nc.lambda = c.modes[0].lambda;
  nc.psi = c.modes[0].psi;
  nc.kappa_hat = 1e-6;
  VerificationReport rep = verify_cbf(net, {c}, nc, kFastGrid);
  CHECK_FALSE(rep.any_falsified());
  for (const auto& cond : rep.conditions) {
    CHECK(cond.status != ConditionStatus::falsified);
  }
}

TEST_CASE("sos expressions reduce to the bare conditions at zero multipliers") {
  Subsystem s = static_system();
  PseudoCertificate c = parabola_certificate();
  auto exprs = assemble_sos_expressions(s, 0, c);
  REQUIRE(exprs.size() == 5);  // bound, initial, one per unsafe box, decay

  // (first) with a zero-kind alpha the expression is the barrier itself
  auto av = s.all_vars();
  CHECK(exprs[0].poly.approx_equal(c.modes[0].barrier.embed(av), 1e-12));

  // (second) -B + gamma, the initial-level margin
  Polynomial want = Polynomial::constant(av, c.modes[0].gamma) -
                    c.modes[0].barrier.embed(av);
  CHECK(exprs[1].poly.approx_equal(want, 1e-12));

  // decay expression equals the negated drift condition
  std::vector<Polynomial> barriers{c.modes[0].barrier};
  auto cond = assemble_drift_condition(s, 0, barriers, c.modes[0].kappa,
                                       c.modes[0].rho_int, c.modes[0].psi,
                                       std::nullopt);
  CHECK(exprs[4].poly.approx_equal(-cond.poly, 1e-12));
}

TEST_CASE("sos expressions with zero multipliers match the margins pointwise") {
  Subsystem s = kuramoto_subsystem(2, false, -30000.0, 25000.0);
  PseudoCertificate c = reference_certificate_task1();
  for (int mode = 0; mode < 2; ++mode) {
    auto exprs = assemble_sos_expressions(s, mode, c, {});
    auto m32 = build_output_bound_margin(s, c.modes[mode]);
    auto av = s.all_vars();
    for (double x : {0.3, 1.0, 2.2, 4.4, 6.1}) {
      std::vector<double> z(av.size(), 0.0);
      z[0] = x;
      std::vector<double> zx{x};
      CHECK(exprs[0].eval(z) == doctest::Approx(m32.eval(zx)).epsilon(1e-9));
      double m33 = c.modes[mode].gamma - c.modes[mode].barrier.eval(zx);
      CHECK(exprs[1].eval(z) == doctest::Approx(m33).epsilon(1e-9));
      double m34 = c.modes[mode].barrier.eval(zx) - c.modes[mode].lambda;
      CHECK(exprs[2].eval(z) == doctest::Approx(m34).epsilon(1e-9));
    }
  }
}

TEST_CASE("sos decay expression with substituted controller matches the margin") {
  Subsystem s = kuramoto_subsystem(2, false, -30000.0, 25000.0);
  PseudoCertificate c = reference_certificate_task1();
  SosMultipliers mult;
  mult.controller = c.modes[0].controller;
  auto exprs = assemble_sos_expressions(s, 0, c, mult);
  std::vector<std::string> xw{"x0", "w0"};
  auto branches = build_decay_margin_branches(s, 0, c, xw);
  REQUIRE(branches.size() == 1);
  auto av = s.all_vars();
  for (double x : {0.5, 1.5, 3.0, 5.0}) {
    std::vector<double> z(av.size(), 0.0);
    z[0] = x;
    z[2] = 1.0;
    std::vector<double> zxw{x, 1.0};
    CHECK(exprs[4].eval(z) ==
          doctest::Approx(branches[0].eval(zxw)).epsilon(1e-9));
  }
}

TEST_CASE("multiplier dimension mismatch is rejected") {
  Subsystem s = static_system();
  PseudoCertificate c = parabola_certificate();
  SosMultipliers mult;
  mult.state = {Polynomial::constant({"x0"}, 1.0)};  // needs 2 rows
  CHECK_THROWS_AS(assemble_sos_expressions(s, 0, c, mult), InputError);
}

TEST_CASE("grids beyond the point cap are rejected") {
  Subsystem s = static_system();
  s.state_dim = 3;
  s.state_box = Box::cube(0.0, 1.0, 3);
  s.initial_box = Box::cube(0.4, 0.6, 3);
  s.unsafe_region = Region{};
  s.modes[0].drift = {Polynomial(std::vector<std::string>{"x0"}),
                      Polynomial(std::vector<std::string>{"x0"}),
                      Polynomial(std::vector<std::string>{"x0"})};
  s.modes[0].diffusion = {{}, {}, {}};
  s.modes[0].reset = {{}, {}, {}};
  PseudoCertificate c;
  ModeCertificate mc;
  mc.barrier = Polynomial(std::vector<std::string>{"x0", "x1", "x2"});
  mc.alpha = ScalarGainFunction::zero();
  mc.kappa = ScalarGainFunction::zero();
  mc.rho_int = ScalarGainFunction::zero();
  c.modes = {mc};
  GridConfig g;
  g.state_points_per_dim = 2001;  // 2001^3 far beyond the cap
  g.max_grid_points = 1'000'000;
  CHECK_THROWS_AS(verify_cpbf(s, c, g), CapacityError);
}

TEST_CASE("decay check needs a controller or a finite input set") {
  Subsystem s = kuramoto_subsystem(2, false, -30000.0, 25000.0);
  PseudoCertificate c = reference_certificate_task1();
  for (auto& mc : c.modes) mc.controller.reset();  // box inputs, no feedback
  CHECK_THROWS_AS(verify_cpbf(s, c, kFastGrid), InputError);
}
