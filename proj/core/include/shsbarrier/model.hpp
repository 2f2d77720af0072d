#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "shsbarrier/poly.hpp"

namespace shs {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  double center() const { return 0.5 * (lo + hi); }
  bool contains(double v, double tol = 0.0) const {
    return v >= lo - tol && v <= hi + tol;
  }
};

struct Box {
  std::vector<Interval> dims;

  Box() = default;
  explicit Box(std::vector<Interval> d) : dims(std::move(d)) {}
  static Box cube(double lo, double hi, int dim);

  int dim() const { return static_cast<int>(dims.size()); }
  bool empty() const { return dims.empty(); }
  bool contains(std::span<const double> x, double tol = 0.0) const;
  bool contains_box(const Box& inner, double tol = 0.0) const;
  std::vector<double> center() const;
  double half_diagonal(int points_per_dim) const;
};

/// Finite union of axis-aligned boxes.
struct Region {
  std::vector<Box> boxes;
  bool empty() const { return boxes.empty(); }
  bool contains(std::span<const double> x, double tol = 0.0) const;
};

/// Evenly spaced samples including both endpoints (a single midpoint when
/// n == 1 or the interval is degenerate).
std::vector<double> linspace(const Interval& iv, int n);

/// Visits the product grid of a box with `points_per_dim` samples per axis.
/// Throws CapacityError beyond `max_points` total grid points.
void for_each_grid_point(const Box& box, int points_per_dim,
                         const std::function<void(std::span<const double>)>& fn,
                         std::size_t max_points = 2'000'000);

/// One dynamical mode of a subsystem.
struct Mode {
  std::vector<Polynomial> drift;                   // over state+input+internal
  std::vector<std::vector<Polynomial>> diffusion;  // n x b, over state
  std::vector<std::vector<Polynomial>> reset;      // n x r, over state
  std::optional<std::vector<Polynomial>> controller;  // over state, len = input dim
};

/// External input set: a box or a finite list of input vectors.
using ExternalInput = std::variant<Box, std::vector<std::vector<double>>>;

struct Subsystem {
  std::string id;
  int state_dim = 0;
  Box state_box;
  ExternalInput external_input;
  Box internal_input_box;
  std::vector<Mode> modes;
  std::vector<std::vector<Polynomial>> transition_rates;  // m x m, over state
  std::vector<double> poisson_rates;
  std::map<std::string, std::vector<Polynomial>> outputs;  // target id -> h_ij
  Box initial_box;
  Region unsafe_region;

  int mode_count() const { return static_cast<int>(modes.size()); }
  int input_dim() const;
  int internal_dim() const { return internal_input_box.dim(); }
  int brownian_dim() const;
  int poisson_dim() const { return static_cast<int>(poisson_rates.size()); }
  bool finite_inputs() const {
    return std::holds_alternative<std::vector<std::vector<double>>>(
        external_input);
  }

  std::vector<std::string> state_vars() const;
  std::vector<std::string> input_vars() const;
  std::vector<std::string> internal_vars() const;
  std::vector<std::string> all_vars() const;

  /// Output map including the implicit identity component h_ii, as the
  /// polynomial sum of squares of all output coordinates.
  Polynomial output_norm_sq() const;

  /// Structural checks: dimensions, variable usage, polynomial spaces.
  void check_shape() const;
};

struct Network {
  std::vector<Subsystem> subsystems;

  int size() const { return static_cast<int>(subsystems.size()); }
  int index_of(const std::string& id) const;

  /// Sources feeding subsystem `j`, ascending by subsystem index. The
  /// internal input vector of `j` concatenates their outputs in this order.
  std::vector<int> incoming(int j) const;

  /// Offset and width of source i's block inside subsystem j's internal
  /// input vector.
  std::pair<int, int> internal_slice(int j, int source) const;
};

struct Violation {
  std::string subject;
  std::string what;
};

struct ValidationConfig {
  int grid_points_per_dim = 11;
  double rate_tolerance = 1e-9;
  double containment_tolerance = 1e-9;
};

/// Checks the model invariants on deterministic grids and returns the list
/// of violations (empty means the network validated).
std::vector<Violation> validate(const Network& net,
                                const ValidationConfig& cfg = {});

/// Joint-mode rate matrix over global state variables ("s<i>.x<k>").
/// Entry (P,P') is nonzero only when the joint modes differ in at most one
/// subsystem coordinate; diagonal entries are negated row sums. Materializing
/// this matrix is a debugging aid; the cap keeps it from exploding.
std::vector<std::vector<Polynomial>> build_interconnection_generator_matrix(
    const Network& net, int max_joint_modes = 4096);

/// Global variable names of the composite state, subsystem by subsystem.
std::vector<std::string> global_state_vars(const Network& net);

/// Joint mode tuple <-> flat index, lexicographic with subsystem 0 slowest.
std::vector<int> joint_mode_tuple(const Network& net, int index);
int joint_mode_index(const Network& net, std::span<const int> tuple);

}  // namespace shs
