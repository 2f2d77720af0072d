#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "shsbarrier/model.hpp"

namespace shs {

/// Deterministic finite automaton with a total transition function. Symbols
/// are atomic propositions; an edge between two locations may carry several
/// symbols (a disjunction).
struct Dfa {
  std::vector<std::string> locations;
  std::string initial;
  std::vector<std::string> alphabet;
  std::set<std::string> accepting;
  std::map<std::pair<std::string, std::string>, std::string> transitions;

  void check() const;  // totality, membership
  bool is_accepting(const std::string& loc) const {
    return accepting.count(loc) > 0;
  }
  const std::string& next(const std::string& loc, const std::string& sym) const;
  int location_index(const std::string& loc) const;

  /// Same automaton with accepting and non-accepting locations swapped.
  Dfa complement() const;

  /// All successor locations of q, including self-loop targets.
  std::set<std::string> successors(const std::string& q) const;

  /// Symbols labeling the edge q -> q' (q' != q), in alphabet order.
  std::vector<std::string> edge_symbols(const std::string& q,
                                        const std::string& q2) const;

  /// Runs a word; returns true iff it ends in an accepting location.
  bool accepts(const std::vector<std::string>& word) const;
};

struct Run {
  std::vector<std::string> locations;
  int length() const { return static_cast<int>(locations.size()); }
};

struct RunEnumerationConfig {
  int max_len = 0;               // 0 means 2 * location count
  bool simple_paths_only = false;
  std::size_t max_runs = 1'000'000;
};

struct RunSet {
  std::vector<Run> runs;
  bool truncated = false;  // some path hit the length cap before accepting
};

/// Depth-first enumeration of accepting state runs without self-loops,
/// deterministic in declaration order of the locations.
RunSet accepting_runs(const Dfa& d, const RunEnumerationConfig& cfg = {});

struct Triple {
  std::string a, b, c;
  auto operator<=>(const Triple&) const = default;
  std::string to_string() const { return "(" + a + "," + b + "," + c + ")"; }
};

/// Sequential reachability decomposition of the complement automaton.
struct Decomposition {
  RunSet run_set;
  /// Label -> indices of runs whose first edge carries that label.
  std::map<std::string, std::vector<int>> runs_by_label;
  /// Aligned with run_set.runs: the length-3 elements of each run.
  std::vector<std::vector<Triple>> triples_per_run;
  /// Union of all elements, deduplicated and sorted.
  std::vector<Triple> all_triples;
};

Decomposition decompose(const Dfa& complement,
                        const RunEnumerationConfig& cfg = {});

/// Reachability elements sharing the leading pair (q, q') merged into one
/// task; the merged unsafe labels are the symbols of all outgoing non-self
/// edges of q'.
struct PartitionTask {
  std::string from, via;
  std::vector<std::string> successors_of_via;
  std::vector<Triple> triples;
  std::vector<std::string> initial_symbols;
  std::vector<std::string> unsafe_symbols;
  std::string key() const { return "(" + from + "," + via + ")"; }
};

std::vector<PartitionTask> partition_elements(const Dfa& complement,
                                              const std::vector<Triple>& triples);

/// Automaton scheduling which reach-avoid controller is active. Partition
/// locations carry the key of the task whose controller runs while the
/// automaton sits there.
struct SwitchingAutomaton {
  enum class Kind { initial, partition, accepting };
  struct Location {
    Kind kind;
    std::string name;       // "(q,q')" for partition locations
    std::string from, via;  // filled for partition locations
  };
  std::vector<Location> locations;
  int initial_location = 0;
  std::map<std::pair<int, std::string>, int> transitions;

  int step(int loc, const std::string& symbol) const;  // -1 when absent
  std::size_t transition_count() const { return transitions.size(); }
  bool is_accepting(int loc) const {
    return locations[loc].kind == Kind::accepting;
  }
};

SwitchingAutomaton build_switching_automaton(const Dfa& complement);

/// Measurable labeling: symbol -> region of the composite state space, plus
/// a remainder symbol for everything not covered.
struct Labeling {
  std::map<std::string, Region> regions;
  std::string remainder_symbol;

  const std::string& label_of(std::span<const double> x) const;
  /// Pairwise disjointness of the declared regions, grid-checked.
  std::vector<Violation> check(const Box& domain, int grid_points_per_dim) const;
};

}  // namespace shs
