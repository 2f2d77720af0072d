#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "shsbarrier/generator.hpp"
#include "shsbarrier/model.hpp"

namespace shs {

/// Barrier data for one mode of a subsystem.
struct ModeCertificate {
  Polynomial barrier;  // over the subsystem state variables
  ScalarGainFunction alpha;
  ScalarGainFunction kappa;
  ScalarGainFunction rho_int;
  double gamma = 0.0;
  double lambda = 0.0;
  double psi = 0.0;
  /// Explicit feedback controller. Absent for finite input sets, where the
  /// input is selected pointwise among the declared alternatives.
  std::optional<std::vector<Polynomial>> controller;
};

struct PseudoCertificate {
  std::vector<ModeCertificate> modes;
  void check(const Subsystem& sub) const;
};

/// Weighted-sum certificate for an interconnected network.
struct NetworkCertificate {
  std::vector<double> mu;
  double gamma = 0.0;
  double lambda = 0.0;
  double psi = 0.0;
  double kappa_hat = 0.0;
  void check() const;  // mu > 0 entrywise and lambda > gamma
};

enum class ConditionStatus { verified, falsified, inconclusive };
std::string to_string(ConditionStatus);

struct GridStats {
  std::size_t points = 0;
  double cell_half_diagonal = 0.0;
  double lipschitz = 0.0;
};

struct ConditionReport {
  std::string name;
  int mode = -1;
  ConditionStatus status = ConditionStatus::inconclusive;
  double min_margin = std::numeric_limits<double>::infinity();
  std::vector<double> witness;
  GridStats stats;
};

struct VerificationReport {
  std::vector<ConditionReport> conditions;
  bool any_falsified() const;
  bool all_verified() const;
  /// True when nothing is falsified and every min margin is nonnegative.
  bool non_falsified_with_nonnegative_margins() const;
  double worst_margin() const;
};

struct GridConfig {
  int state_points_per_dim = 101;
  int input_points_per_dim = 11;
  int refine_factor = 4;
  bool strict = false;
  std::optional<double> lipschitz_bound;  // required in strict mode
  double lipschitz_safety = 1.5;
  int lipschitz_points_per_dim = 21;
  std::size_t max_grid_points = 4'000'000;
  /// Internal input dimensions above this use the sound corner bound for
  /// conditions affine in the internal inputs instead of a product grid.
  int internal_grid_dim_limit = 3;
};

/// Scans a margin function over a box grid with one refinement pass around
/// the worst point. Returns the minimum and its location.
struct MarginScan {
  double min_margin = std::numeric_limits<double>::infinity();
  std::vector<double> argmin;
  std::size_t points = 0;
};
MarginScan scan_margin(const std::function<double(std::span<const double>)>& m,
                       const Box& domain, int points_per_dim, int refine_factor,
                       std::size_t max_points);

/// Checks the four pseudo-barrier conditions for every mode of a subsystem
/// on deterministic grids. Statuses are sound up to the reported Lipschitz
/// margin: `verified` requires clearing it, a strictly negative sample gives
/// `falsified`, anything else is `inconclusive`.
VerificationReport verify_cpbf(const Subsystem& sub,
                               const PseudoCertificate& cert,
                               const GridConfig& cfg = {});

/// Checks the network-level barrier conditions for the composed certificate.
/// The mode-coupling sum is evaluated through the per-subsystem rate
/// matrices, so the joint mode space is never materialized; internal inputs
/// are substituted by the interconnection wiring.
VerificationReport verify_cbf(const Network& net,
                              const std::vector<PseudoCertificate>& certs,
                              const NetworkCertificate& ncert,
                              const GridConfig& cfg = {});

/// Sum-of-squares multiplier bundle for assemble_sos_expressions. Every
/// vector may be left empty, which stands for zero multipliers.
struct SosMultipliers {
  std::vector<Polynomial> state;        // against the state-set rows g
  std::vector<Polynomial> initial;      // against g_0
  std::vector<Polynomial> unsafe;       // against g_u (first unsafe box)
  std::vector<Polynomial> state_decay;  // against g in the decay expression
  std::vector<Polynomial> input;        // against g_nu
  std::vector<Polynomial> internal;     // against g_w
  std::optional<std::vector<Polynomial>> controller;  // substitutes nu_j
};

/// One affine row per box face: (x_k - lo_k) and (hi_k - x_k).
std::vector<Polynomial> box_face_polys(const Box& box,
                                       const std::vector<std::string>& vars);

/// Margin of the output lower-bound condition, B - alpha(|h|^2), over the
/// state variables. Nonnegative iff the condition holds.
ConditionExpr build_output_bound_margin(const Subsystem& sub,
                                        const ModeCertificate& mc);

/// Margin branches of the decay condition for one mode over `eval_vars`
/// (state, or state plus internal inputs): a single branch when a controller
/// is available, one branch per declared input vector for finite input sets.
/// The pointwise margin is the maximum over branches.
std::vector<ConditionExpr> build_decay_margin_branches(
    const Subsystem& sub, int mode, const PseudoCertificate& cert,
    const std::vector<std::string>& eval_vars);

/// Assembles the four certificate expressions whose nonnegativity over the
/// respective regions restates the pseudo-barrier conditions, given external
/// multipliers (zero multipliers reduce them to the bare conditions). The
/// result order is: output bound, initial level, one entry per unsafe box,
/// decay. Nonnegativity is checked numerically by the caller.
std::vector<ConditionExpr> assemble_sos_expressions(
    const Subsystem& sub, int mode, const PseudoCertificate& cert,
    const SosMultipliers& mult = {});

}  // namespace shs
