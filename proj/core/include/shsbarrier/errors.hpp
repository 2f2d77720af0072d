#pragma once

#include <stdexcept>
#include <string>

namespace shs {

/// Bad user-supplied data: dimension mismatches, unknown variables,
/// invariant violations detected at construction time.
struct InputError : std::runtime_error {
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// A request exceeds a documented size cap (joint mode count, run count).
struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& what) : std::runtime_error(what) {}
};

/// Missing or inconsistent configuration (e.g. strict verification without
/// a Lipschitz bound).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// An iterative numeric routine failed to converge or produced NaN/Inf.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Small-gain or certificate composition could not be completed.
struct CompositionError : std::runtime_error {
  explicit CompositionError(const std::string& what) : std::runtime_error(what) {}
};

/// Certificate synthesis failed (bad template, exhausted budget).
struct SynthesisError : std::runtime_error {
  explicit SynthesisError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace shs
