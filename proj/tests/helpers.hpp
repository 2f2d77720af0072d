#pragma once

// Shared builders for the Kuramoto-style benchmark network, its reference
// certificates, and the two automata used across the suites.

#include <cmath>
#include <string>
#include <vector>

#include "shsbarrier/certificate.hpp"
#include "shsbarrier/dfa.hpp"
#include "shsbarrier/model.hpp"

namespace shstest {

inline constexpr double kPi = 3.141592653589793;
inline constexpr double kTau = 2.0 * kPi;

// Phase bands of interest, one box per label.
inline shs::Interval band0() { return {0.0, kPi / 16.0}; }
inline shs::Interval band1() { return {5.8 * kPi / 12.0, 6.2 * kPi / 12.0}; }
inline shs::Interval band2() { return {5.7 * kPi / 6.0, kPi}; }
inline shs::Interval band3() { return {kPi, 6.2 * kPi / 6.0}; }
inline shs::Interval band4() { return {17.8 * kPi / 12.0, 18.2 * kPi / 12.0}; }
inline shs::Interval band5() { return {11.8 * kPi / 6.0, kTau}; }

inline shs::Polynomial uni(const std::string& var, std::vector<double> coeffs) {
  return shs::Polynomial::univariate(var, coeffs);
}

// One oscillator with linear phase-difference coupling: each neighbor sends
// its phase; the drift aggregates (K/N) * sum_j (w_j - x). The input span
// defaults to a range a forward-Euler closed loop can take at millisecond
// steps; the full-scale analysis model widens it to cover the reference
// controllers.
inline shs::Subsystem kuramoto_subsystem(int n_total, bool finite_inputs,
                                         double u_lo = -50.0,
                                         double u_hi = 50.0) {
  using namespace shs;
  Subsystem s;
  s.id = "osc0";
  s.state_dim = 1;
  s.state_box = Box::cube(0.0, kTau, 1);
  if (finite_inputs) {
    std::vector<std::vector<double>> set;
    for (double u : {-50.0, -20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0, 50.0}) {
      set.push_back({u});
    }
    s.external_input = set;
  } else {
    s.external_input = Box{{shs::Interval{u_lo, u_hi}}};
  }
  const int neighbors = n_total - 1;
  s.internal_input_box = Box::cube(0.0, kTau, neighbors);

  const double coupling = 0.001 / n_total;
  auto make_mode = [&](double omega, double g, double r) {
    Mode m;
    std::vector<std::string> av = {"x0", "u0"};
    for (int k = 0; k < neighbors; ++k) av.push_back("w" + std::to_string(k));
    Polynomial drift(av);
    drift.add_term(std::vector<int>(av.size(), 0), omega);
    {
      std::vector<int> e(av.size(), 0);
      e[1] = 1;
      drift.add_term(e, 1.0);  // + u
    }
    {
      std::vector<int> e(av.size(), 0);
      e[0] = 1;
      drift.add_term(e, -coupling * neighbors);  // - (K/N)(N-1) x
    }
    for (int k = 0; k < neighbors; ++k) {
      std::vector<int> e(av.size(), 0);
      e[2 + k] = 1;
      drift.add_term(e, coupling);  // + (K/N) w_k
    }
    m.drift = {drift};
    m.diffusion = {{Polynomial::constant({"x0"}, g)}};
    m.reset = {{Polynomial::constant({"x0"}, r)}};
    return m;
  };
  s.modes = {make_mode(0.1, 0.1, 0.1), make_mode(0.12, 0.12, 0.12)};
  s.transition_rates = {
      {Polynomial::constant({"x0"}, -0.9), Polynomial::constant({"x0"}, 0.9)},
      {Polynomial::constant({"x0"}, 0.8), Polynomial::constant({"x0"}, -0.8)}};
  s.poisson_rates = {0.1};
  s.initial_box = Box{{band1()}};
  s.unsafe_region.boxes = {Box{{band0()}}, Box{{band2()}}};
  return s;
}

inline shs::Network kuramoto_network(int n_total, bool finite_inputs,
                                     double u_lo = -50.0, double u_hi = 50.0) {
  using namespace shs;
  Network net;
  for (int i = 0; i < n_total; ++i) {
    Subsystem s = kuramoto_subsystem(n_total, finite_inputs, u_lo, u_hi);
    s.id = "osc" + std::to_string(i);
    for (int j = 0; j < n_total; ++j) {
      if (j == i) continue;
      s.outputs.emplace("osc" + std::to_string(j),
                        std::vector<Polynomial>{uni("x0", {0.0, 1.0})});
    }
    net.subsystems.push_back(std::move(s));
  }
  return net;
}

// Reference certificates of the two reach-avoid tasks (phase band 1 avoiding
// bands 0 and 2; phase band 4 avoiding bands 3 and 5).
inline shs::PseudoCertificate reference_certificate_task1() {
  using namespace shs;
  PseudoCertificate c;
  ModeCertificate m1;
  m1.barrier = uni("x0", {6245, -1038, 4791, -36, 8.9, -310, 85});
  m1.controller = {uni("x0", {7000, -5356})};
  m1.alpha = ScalarGainFunction::power(0.8, 0.5);
  m1.kappa = ScalarGainFunction::linear(5e-5);
  m1.rho_int = ScalarGainFunction::power(4e-7, 0.5);
  m1.gamma = 3;
  m1.lambda = 4300;
  m1.psi = 50;
  ModeCertificate m2;
  m2.barrier = uni("x0", {6286, -1040, 4756, -9.5, 2.8, -308, 84});
  m2.controller = {uni("x0", {5000, -4229})};
  m2.alpha = ScalarGainFunction::power(0.85, 0.5);
  m2.kappa = ScalarGainFunction::linear(5.3e-5);
  m2.rho_int = ScalarGainFunction::power(4.2e-7, 0.5);
  m2.gamma = 3.2;
  m2.lambda = 4400;
  m2.psi = 52;
  c.modes = {m1, m2};
  return c;
}

inline shs::PseudoCertificate reference_certificate_task2() {
  using namespace shs;
  PseudoCertificate c;
  ModeCertificate m1;
  m1.barrier = uni("x0", {24559, -6365, 20, -1.1, 6.7, -0.028, 0.2});
  m1.controller = {uni("x0", {6900, -1733})};
  m1.alpha = ScalarGainFunction::power(0.8, 0.5);
  m1.kappa = ScalarGainFunction::linear(5e-5);
  m1.rho_int = ScalarGainFunction::power(4e-7, 0.5);
  m1.gamma = 300;
  m1.lambda = 5000;
  m1.psi = 64;
  ModeCertificate m2;
  m2.barrier = uni("x0", {22215, -5801, 21, -5.5, 8.7, -0.038, 0.11});
  m2.controller = {uni("x0", {21870, -1678})};
  m2.alpha = ScalarGainFunction::power(0.82, 0.5);
  m2.kappa = ScalarGainFunction::linear(5.1e-5);
  m2.rho_int = ScalarGainFunction::power(4.1e-7, 0.5);
  m2.gamma = 340;
  m2.lambda = 4500;
  m2.psi = 66;
  c.modes = {m1, m2};
  return c;
}

// Complement automaton of the two-band stay-away property over labels
// p0..p6 (p6 is the remainder).
inline shs::Dfa kuramoto_complement() {
  shs::Dfa d;
  d.locations = {"q0", "q1", "q2", "q3"};
  d.initial = "q0";
  d.alphabet = {"p0", "p1", "p2", "p3", "p4", "p5", "p6"};
  d.accepting = {"q3"};
  auto t = [&](const std::string& from, const std::string& sym,
               const std::string& to) { d.transitions[{from, sym}] = to; };
  t("q0", "p1", "q1");
  t("q0", "p4", "q2");
  for (const std::string s : {"p0", "p2", "p3", "p5", "p6"}) t("q0", s, "q3");
  t("q1", "p0", "q3");
  t("q1", "p2", "q3");
  for (const std::string s : {"p1", "p3", "p4", "p5", "p6"}) t("q1", s, "q1");
  t("q2", "p3", "q3");
  t("q2", "p5", "q3");
  for (const std::string s : {"p0", "p1", "p2", "p4", "p6"}) t("q2", s, "q2");
  for (const auto& s : d.alphabet) t("q3", s, "q3");
  return d;
}

// Six-location complement automaton exercising multi-run decomposition:
// five accepting runs, a two-symbol direct edge, and a shared partition.
inline shs::Dfa running_example_complement() {
  shs::Dfa d;
  d.locations = {"q0", "q1", "q2", "q3", "q4", "q5"};
  d.initial = "q0";
  d.alphabet = {"p0", "p1", "p2", "p3"};
  d.accepting = {"q3"};
  auto t = [&](const std::string& from, const std::string& sym,
               const std::string& to) { d.transitions[{from, sym}] = to; };
  t("q0", "p0", "q1");
  t("q0", "p1", "q3");
  t("q0", "p2", "q4");
  t("q0", "p3", "q3");
  t("q1", "p1", "q2");
  t("q1", "p2", "q5");
  t("q1", "p0", "q1");
  t("q1", "p3", "q1");
  t("q2", "p2", "q3");
  for (const std::string s : {"p0", "p1", "p3"}) t("q2", s, "q2");
  t("q4", "p3", "q3");
  t("q4", "p0", "q5");
  t("q4", "p1", "q4");
  t("q4", "p2", "q4");
  t("q5", "p1", "q3");
  for (const std::string s : {"p0", "p2", "p3"}) t("q5", s, "q5");
  for (const auto& s : d.alphabet) t("q3", s, "q3");
  return d;
}

inline shs::Labeling kuramoto_labeling(const shs::Network& net) {
  shs::Labeling lab;
  lab.remainder_symbol = "p6";
  auto add = [&](const std::string& sym, shs::Interval iv) {
    shs::Box full;
    for (const auto& sub : net.subsystems) {
      (void)sub;
      full.dims.push_back(iv);
    }
    shs::Region r;
    r.boxes.push_back(full);
    lab.regions.emplace(sym, std::move(r));
  };
  add("p0", band0());
  add("p1", band1());
  add("p2", band2());
  add("p3", band3());
  add("p4", band4());
  add("p5", band5());
  return lab;
}

}  // namespace shstest
