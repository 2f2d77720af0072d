#include "shsbarrier/dfa.hpp"

#include <algorithm>

#include "shsbarrier/errors.hpp"

namespace shs {

void Dfa::check() const {
  if (locations.empty()) throw InputError("automaton has no locations");
  if (std::find(locations.begin(), locations.end(), initial) == locations.end()) {
    throw InputError("initial location is not declared");
  }
  for (const auto& a : accepting) {
    if (std::find(locations.begin(), locations.end(), a) == locations.end()) {
      throw InputError("accepting location '" + a + "' is not declared");
    }
  }
  for (const auto& q : locations) {
    for (const auto& s : alphabet) {
      auto it = transitions.find({q, s});
      if (it == transitions.end()) {
        throw InputError("transition function is not total: missing (" + q +
                         ", " + s + ")");
      }
      if (std::find(locations.begin(), locations.end(), it->second) ==
          locations.end()) {
        throw InputError("transition target '" + it->second + "' is not declared");
      }
    }
  }
}

const std::string& Dfa::next(const std::string& loc,
                             const std::string& sym) const {
  auto it = transitions.find({loc, sym});
  if (it == transitions.end()) {
    throw InputError("no transition for (" + loc + ", " + sym + ")");
  }
  return it->second;
}

int Dfa::location_index(const std::string& loc) const {
  for (std::size_t i = 0; i < locations.size(); ++i) {
    if (locations[i] == loc) return static_cast<int>(i);
  }
  throw InputError("unknown location '" + loc + "'");
}

Dfa Dfa::complement() const {
  Dfa out = *this;
  out.accepting.clear();
  for (const auto& q : locations) {
    if (!accepting.count(q)) out.accepting.insert(q);
  }
  return out;
}

std::set<std::string> Dfa::successors(const std::string& q) const {
  std::set<std::string> out;
  for (const auto& s : alphabet) out.insert(next(q, s));
  return out;
}

std::vector<std::string> Dfa::edge_symbols(const std::string& q,
                                           const std::string& q2) const {
  std::vector<std::string> out;
  if (q == q2) return out;
  for (const auto& s : alphabet) {
    if (next(q, s) == q2) out.push_back(s);
  }
  return out;
}

bool Dfa::accepts(const std::vector<std::string>& word) const {
  std::string loc = initial;
  for (const auto& s : word) loc = next(loc, s);
  return is_accepting(loc);
}

RunSet accepting_runs(const Dfa& d, const RunEnumerationConfig& cfg) {
  d.check();
  const int cap = cfg.max_len > 0 ? cfg.max_len
                                  : 2 * static_cast<int>(d.locations.size());
  if (cap < 2) throw InputError("run length cap must be at least 2");
  RunSet out;

  // Graph successors in declaration order, self-loops excluded.
  auto graph_successors = [&](const std::string& q) {
    std::vector<std::string> succ;
    for (const auto& target : d.locations) {
      if (target == q) continue;
      if (!d.edge_symbols(q, target).empty()) succ.push_back(target);
    }
    return succ;
  };

  std::vector<std::string> path{d.initial};
  auto dfs = [&](auto&& self) -> void {
    const std::string& here = path.back();
    if (path.size() >= 2 && d.is_accepting(here)) {
      if (out.runs.size() >= cfg.max_runs) {
        throw CapacityError("accepting run enumeration exceeded the cap");
      }
      out.runs.push_back({path});
    }
    if (static_cast<int>(path.size()) >= cap) {
      if (!d.is_accepting(here)) out.truncated = true;
      return;
    }
    for (const auto& nxt : graph_successors(here)) {
      if (cfg.simple_paths_only &&
          std::find(path.begin(), path.end(), nxt) != path.end()) {
        continue;
      }
      path.push_back(nxt);
      self(self);
      path.pop_back();
    }
  };
  dfs(dfs);
  return out;
}

Decomposition decompose(const Dfa& complement, const RunEnumerationConfig& cfg) {
  Decomposition out;
  out.run_set = accepting_runs(complement, cfg);
  std::set<Triple> triple_set;
  for (std::size_t r = 0; r < out.run_set.runs.size(); ++r) {
    const auto& locs = out.run_set.runs[r].locations;
    for (const auto& sym :
         complement.edge_symbols(locs[0], locs[1])) {
      out.runs_by_label[sym].push_back(static_cast<int>(r));
    }
    std::vector<Triple> triples;
    for (std::size_t i = 0; i + 2 < locs.size(); ++i) {
      Triple t{locs[i], locs[i + 1], locs[i + 2]};
      triples.push_back(t);
      triple_set.insert(t);
    }
    out.triples_per_run.push_back(std::move(triples));
  }
  out.all_triples.assign(triple_set.begin(), triple_set.end());
  return out;
}

std::vector<PartitionTask> partition_elements(const Dfa& complement,
                                              const std::vector<Triple>& triples) {
  std::map<std::pair<std::string, std::string>, PartitionTask> grouped;
  for (const auto& t : triples) {
    auto key = std::make_pair(t.a, t.b);
    auto [it, fresh] = grouped.try_emplace(key);
    PartitionTask& task = it->second;
    if (fresh) {
      task.from = t.a;
      task.via = t.b;
      task.initial_symbols = complement.edge_symbols(t.a, t.b);
      auto succ = complement.successors(t.b);
      std::set<std::string> unsafe;
      for (const auto& q2 : succ) {
        if (q2 == t.b) continue;
        task.successors_of_via.push_back(q2);
        for (const auto& s : complement.edge_symbols(t.b, q2)) unsafe.insert(s);
      }
      task.unsafe_symbols.assign(unsafe.begin(), unsafe.end());
    }
    task.triples.push_back(t);
  }
  std::vector<PartitionTask> out;
  for (auto& [key, task] : grouped) out.push_back(std::move(task));
  return out;
}

int SwitchingAutomaton::step(int loc, const std::string& symbol) const {
  auto it = transitions.find({loc, symbol});
  return it == transitions.end() ? -1 : it->second;
}

SwitchingAutomaton build_switching_automaton(const Dfa& complement) {
  complement.check();
  SwitchingAutomaton out;
  out.locations.push_back({SwitchingAutomaton::Kind::initial,
                           "(" + complement.initial + ",init)", "", ""});
  out.initial_location = 0;

  std::map<std::string, int> index_of;
  index_of[out.locations[0].name] = 0;

  auto intern_partition = [&](const std::string& from, const std::string& via) {
    std::string name = "(" + from + "," + via + ")";
    auto it = index_of.find(name);
    if (it != index_of.end()) return it->second;
    out.locations.push_back(
        {SwitchingAutomaton::Kind::partition, name, from, via});
    int idx = static_cast<int>(out.locations.size()) - 1;
    index_of[name] = idx;
    return idx;
  };
  auto intern_accepting = [&](const std::string& q) {
    auto it = index_of.find(q);
    if (it != index_of.end()) return it->second;
    out.locations.push_back({SwitchingAutomaton::Kind::accepting, q, "", ""});
    int idx = static_cast<int>(out.locations.size()) - 1;
    index_of[q] = idx;
    return idx;
  };

  // Breadth-first over reachable switching locations. From the initial
  // location the automaton reads the edge symbols of the complement's
  // initial state; from a partition location (q,q') it reads the outgoing
  // edges of q'. Edges into accepting locations collapse to the bare
  // accepting location.
  std::vector<std::pair<int, std::string>> work;  // (switch loc, dfa loc)
  work.push_back({0, complement.initial});
  std::set<int> expanded;
  while (!work.empty()) {
    auto [loc, dfa_loc] = work.front();
    work.erase(work.begin());
    if (expanded.count(loc)) continue;
    expanded.insert(loc);
    for (const auto& target : complement.locations) {
      if (target == dfa_loc) continue;
      auto symbols = complement.edge_symbols(dfa_loc, target);
      if (symbols.empty()) continue;
      int next_loc;
      if (complement.is_accepting(target)) {
        next_loc = intern_accepting(target);
      } else {
        next_loc = intern_partition(dfa_loc, target);
        work.push_back({next_loc, target});
      }
      for (const auto& s : symbols) {
        out.transitions[{loc, s}] = next_loc;
      }
    }
  }
  return out;
}

const std::string& Labeling::label_of(std::span<const double> x) const {
  for (const auto& [sym, region] : regions) {
    if (region.contains(x)) return sym;
  }
  return remainder_symbol;
}

std::vector<Violation> Labeling::check(const Box& domain,
                                       int /*grid_points_per_dim*/) const {
  // Axis-aligned boxes admit an exact disjointness test: two boxes share
  // positive volume iff every coordinate interval overlap does. Shared faces
  // are fine; the first matching region wins at lookup time.
  auto positive_overlap = [](const Box& a, const Box& b) {
    if (a.dims.size() != b.dims.size()) return false;
    for (std::size_t d = 0; d < a.dims.size(); ++d) {
      double lo = std::max(a.dims[d].lo, b.dims[d].lo);
      double hi = std::min(a.dims[d].hi, b.dims[d].hi);
      if (!(lo < hi)) return false;
    }
    return true;
  };
  std::vector<Violation> out;
  for (auto it = regions.begin(); it != regions.end(); ++it) {
    for (auto jt = std::next(it); jt != regions.end(); ++jt) {
      bool overlap = false;
      for (const auto& a : it->second.boxes) {
        for (const auto& b : jt->second.boxes) {
          if (positive_overlap(a, b)) overlap = true;
        }
      }
      if (overlap) {
        out.push_back({it->first, "label region overlaps region '" + jt->first + "'"});
      }
    }
    for (const auto& b : it->second.boxes) {
      if (!domain.contains_box(b, 1e-9)) {
        out.push_back({it->first, "label region leaves the state set"});
      }
    }
  }
  if (regions.count(remainder_symbol)) {
    out.push_back({remainder_symbol, "remainder symbol also names a region"});
  }
  return out;
}

}  // namespace shs
