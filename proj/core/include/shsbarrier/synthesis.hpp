#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shsbarrier/certificate.hpp"
#include "shsbarrier/model.hpp"

namespace shs {

/// Shape of the certificate searched for: monomial bases for barriers and
/// controllers, gain shapes with unknown scales, and the barrier scale pin.
struct SynthesisTemplate {
  int barrier_degree = 6;
  int controller_degree = 1;  // affine feedback for box input sets
  /// Fixed linear decay rate; 0 requests the outer bisection.
  double kappa_hat = 0.0;
  double alpha_exponent = 0.5;  // alpha(s) = a * s^exponent, scale unknown
  double rho_int_exponent = 0.5;
  /// Pinned unsafe level; fixes the barrier scaling, which is otherwise free.
  double lambda_pin = 4300.0;
  /// Lower bound on the start level, keeping its minimization clear of the
  /// output lower-bound rows. Zero picks one permille of the unsafe level.
  double gamma_floor = 0.0;
  double coefficient_bound = 1e7;
  double psi_bound = 1e6;
  double gain_scale_bound = 1e6;
  /// Absolute cushion demanded of every sampled condition, so candidates
  /// stay satisfiable between the sampled points.
  double margin_slack = 0.05;
};

struct FalsifyEffort {
  int grid_points_per_dim = 201;
  int multistarts = 16;
  int descent_steps = 80;
  std::uint64_t seed = 1;
};

struct SynthesisConfig {
  SynthesisTemplate tmpl;
  int max_iterations = 50;
  std::uint64_t seed = 1;
  double kappa_lo = 1e-8;
  double kappa_hi = 1.0;
  int kappa_bisection_steps = 20;
  int seed_grid_points = 13;
  FalsifyEffort effort;
  GridConfig verify_grid;
};

struct SynthesisResult {
  bool success = false;
  PseudoCertificate certificate;
  double kappa_hat = 0.0;
  int iterations = 0;
  std::string failure_reason;
  double worst_margin = 0.0;
  VerificationReport report;
};

/// Counterexample-guided synthesis of a pseudo-barrier certificate for one
/// reach-avoid task. Candidates come from a linear feasibility program over
/// the template coefficients (all conditions are affine in them once the
/// decay rate is fixed and, for finite input sets, an input is assigned per
/// counterexample in declared order). The falsifier combines a grid scan
/// with seeded multi-start coordinate descent. A returned certificate has
/// already passed the final grid verification.
SynthesisResult synthesize_cpbf(const Subsystem& sub, const Box& task_initial,
                                const Region& task_unsafe,
                                const SynthesisConfig& cfg);

/// Most-violating point of one certificate condition, or nothing when the
/// search finds no violation. Condition names match the verification report
/// ("output_lower_bound", "initial_level", "unsafe_level", "decay").
std::optional<std::vector<double>> falsify(const Subsystem& sub,
                                           const PseudoCertificate& cert,
                                           const std::string& condition,
                                           int mode, const FalsifyEffort& effort);

/// Grid + multi-start coordinate-descent minimizer of a margin function;
/// returns a point with a strictly negative value if one is found.
std::optional<std::vector<double>> falsify_margin(
    const std::function<double(std::span<const double>)>& margin,
    const Box& domain, const FalsifyEffort& effort);

}  // namespace shs
