#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "shsbarrier/compose.hpp"
#include "shsbarrier/dfa.hpp"
#include "shsbarrier/json_io.hpp"
#include "shsbarrier/probability.hpp"
#include "shsbarrier/sim.hpp"
#include "shsbarrier/synthesis.hpp"

namespace shs {

/// Parsed project file: the network, labeling, complement automaton and the
/// optional certificate, synthesis and simulation sections.
struct ProjectFile {
  Network network;
  Labeling labeling;
  Dfa complement;
  double horizon = 5.0;
  std::optional<double> target_satisfaction;
  /// Skip certificate verification and treat supplied certificates as given.
  bool assume_certificates = false;
  /// Never synthesize; supplied certificates are required for every task.
  bool verification_only = false;
  /// partition key -> subsystem id (or "all") -> certificate
  std::map<std::string, std::map<std::string, PseudoCertificate>> certificates;
  std::optional<SynthesisConfig> synthesis;
  std::optional<SimConfig> simulation;
  std::vector<std::string> simulate_from_labels;
  GridConfig grid;
  RunEnumerationConfig runs;
  std::uint64_t seed = 1;
};

ProjectFile project_from_json(const Json& j);
ProjectFile load_project(const std::string& path);

/// Pipeline stages in execution order. A run can be cut short after any of
/// them; `full` runs everything the project configures.
enum class PipelineStage {
  validate,
  decompose,
  certificates,
  compose,
  bound,
  simulate,
  full
};
PipelineStage stage_from_string(const std::string& name);

struct PipelineOptions {
  PipelineStage stage = PipelineStage::full;
  std::optional<std::uint64_t> seed;
  bool strict = false;
  int jobs = 1;
  std::string out_dir;  // when set: report.json and trace CSVs are written
};

/// Exit codes: 0 success, 1 declared target missed, 2 validation error,
/// 3 synthesis failure, 4 composition failure, 5 numeric error.
struct PipelineResult {
  int exit_code = 0;
  std::string failure_stage;
  std::string message;
  Json report;
};

PipelineResult run_pipeline(const ProjectFile& project,
                            const PipelineOptions& options = {});

/// Per-partition task regions sliced out of the composite label regions.
struct TaskRegions {
  std::string partition_key;
  Box composite_initial;
  Region composite_unsafe;
  std::vector<Box> per_subsystem_initial;
  std::vector<Region> per_subsystem_unsafe;
};
TaskRegions task_regions_for(const Network& net, const Labeling& labeling,
                             const PartitionTask& task);

}  // namespace shs
