#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "shsbarrier/certificate.hpp"
#include "shsbarrier/dfa.hpp"
#include "shsbarrier/model.hpp"

namespace shs {

struct SimConfig {
  double dt = 1e-3;
  double horizon = 5.0;
  int trajectories = 1000;
  std::uint64_t seed = 1;
  enum class SwitchMethod { per_step, thinning } switch_method =
      SwitchMethod::per_step;
  double rate_upper_bound = 0.0;  // required by the thinning method
  int decimation = 10;
  int jobs = 1;
  bool store_paths = false;
  /// Enforced bound on dt times the largest sampled total exit rate.
  double max_rate_dt = 0.1;
};

/// Per-mode control rule of one subsystem inside one reach-avoid task:
/// either an explicit feedback polynomial or a pointwise selection among
/// the declared finite inputs (the alternative with the best decay margin
/// wins).
struct ModePolicy {
  std::optional<std::vector<Polynomial>> controller;  // over state vars
  std::vector<std::vector<double>> inputs;            // finite alternatives
  std::vector<ConditionExpr> margins;  // aligned with inputs, over state+internal
  /// Fast path for drift affine in the inputs: the selection score of input
  /// k is sum_j input_directions[j] * nu_k[j], over state+internal variables.
  bool affine_in_inputs = false;
  std::vector<Polynomial> input_directions;
};

struct SubsystemPolicy {
  std::vector<ModePolicy> modes;
};

struct PartitionPolicy {
  std::string key;
  std::vector<SubsystemPolicy> subsystems;
  std::set<std::string> unsafe_symbols;
};

/// Hybrid switching controller: the automaton location selects which
/// partition's controllers are active.
struct HybridPolicy {
  SwitchingAutomaton automaton;
  std::vector<PartitionPolicy> partitions;
  std::map<std::string, int> partition_index;  // by key

  int index_of(const std::string& key) const;
};

/// Builds the mode policies of one subsystem from a certificate (explicit
/// controllers when present, otherwise the finite-input selection margins).
SubsystemPolicy make_subsystem_policy(const Subsystem& sub,
                                      const PseudoCertificate& cert);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 0.0;
  double half_width() const { return 0.5 * (hi - lo); }
};
WilsonInterval wilson_interval(int successes, int trials,
                               double z = 1.959963984540054);

struct TrajectoryOutcome {
  bool violated = false;        // complement automaton accepted the trace
  bool reached_unsafe = false;  // label entered the active task's unsafe set
  std::vector<std::string> word;  // run-length encoded label sequence
  std::vector<double> times;                  // only when store_paths
  std::vector<std::vector<double>> states;    // decimated composite states
  std::vector<std::vector<int>> modes;        // decimated mode tuples
  std::vector<int> automaton_locations;       // decimated switching states
};

struct TraceReport {
  std::vector<TrajectoryOutcome> trajectories;
  int violations = 0;
  double empirical_violation = 0.0;
  WilsonInterval interval;
};

/// Euler-Maruyama closed-loop simulation of the network under the hybrid
/// switching policy. Per-trajectory random streams are derived from
/// (seed, index), so the result does not depend on scheduling, and two runs
/// with the same configuration are bit-identical.
TraceReport simulate(const Network& net, const HybridPolicy& policy,
                     const Labeling& labeling, const Dfa& complement,
                     const Region& start_region, const SimConfig& cfg);

struct SatisfactionEstimate {
  double empirical_violation = 0.0;
  double empirical_satisfaction = 0.0;
  WilsonInterval violation_interval;
};

/// Runs every stored trace word through the complement automaton.
SatisfactionEstimate estimate_satisfaction(const TraceReport& report,
                                           const Dfa& complement);

}  // namespace shs
