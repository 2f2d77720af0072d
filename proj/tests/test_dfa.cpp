#include <doctest.h>

#include <algorithm>
#include <set>

#include "helpers.hpp"
#include "shsbarrier/dfa.hpp"
#include "shsbarrier/errors.hpp"
#include "shsbarrier/json_io.hpp"

using namespace shs;
using namespace shstest;

namespace {

std::vector<std::string> locs(std::initializer_list<const char*> xs) {
  return {xs.begin(), xs.end()};
}

bool has_run(const RunSet& rs, std::initializer_list<const char*> path) {
  std::vector<std::string> want(path.begin(), path.end());
  return std::any_of(rs.runs.begin(), rs.runs.end(),
                     [&](const Run& r) { return r.locations == want; });
}

// Independent application of the switching-automaton construction rules:
// counts reachable locations and transition entries directly from the
// complement automaton's edge structure.
std::pair<int, int> switching_counts_oracle(const Dfa& d) {
  std::set<std::string> locations{"init"};
  int transitions = 0;
  std::set<std::pair<std::string, std::string>> partition_seen;
  std::vector<std::pair<std::string, std::string>> frontier;  // (tag, dfa loc)
  frontier.push_back({"init", d.initial});
  std::set<std::string> expanded;
  while (!frontier.empty()) {
    auto [tag, q] = frontier.back();
    frontier.pop_back();
    if (expanded.count(tag)) continue;
    expanded.insert(tag);
    for (const auto& target : d.locations) {
      if (target == q) continue;
      auto symbols = d.edge_symbols(q, target);
      if (symbols.empty()) continue;
      transitions += static_cast<int>(symbols.size());
      if (d.is_accepting(target)) {
        locations.insert("acc:" + target);
      } else {
        std::string name = "(" + q + "," + target + ")";
        locations.insert(name);
        if (!partition_seen.count({q, target})) {
          partition_seen.insert({q, target});
          frontier.push_back({name, target});
        }
      }
    }
  }
  return {static_cast<int>(locations.size()), transitions};
}

}  // namespace

TEST_CASE("complement is an involution") {
  Dfa d = running_example_complement();
  CHECK(d.complement().complement().accepting == d.accepting);
  CHECK(d.complement().complement().transitions == d.transitions);
}

TEST_CASE("complement of an all-accepting automaton has no runs") {
  Dfa d = running_example_complement();
  d.accepting = {d.locations.begin(), d.locations.end()};
  Dfa c = d.complement();
  CHECK(c.accepting.empty());
  CHECK(accepting_runs(c).runs.empty());
}

TEST_CASE("complement swaps acceptance of words") {
  Dfa d = kuramoto_complement();
  std::vector<std::string> violating{"p1", "p0"};
  std::vector<std::string> fine{"p1", "p3"};
  CHECK(d.accepts(violating));
  CHECK_FALSE(d.accepts(fine));
  Dfa c = d.complement();
  CHECK_FALSE(c.accepts(violating));
  CHECK(c.accepts(fine));
}

TEST_CASE("run enumeration of the six-location example") {
  Dfa d = running_example_complement();
  RunSet rs = accepting_runs(d);
  CHECK(rs.runs.size() == 5);
  CHECK_FALSE(rs.truncated);
  CHECK(has_run(rs, {"q0", "q1", "q2", "q3"}));
  CHECK(has_run(rs, {"q0", "q1", "q5", "q3"}));
  CHECK(has_run(rs, {"q0", "q4", "q5", "q3"}));
  CHECK(has_run(rs, {"q0", "q4", "q3"}));
  CHECK(has_run(rs, {"q0", "q3"}));
}

TEST_CASE("run enumeration of the two-band automaton") {
  Dfa d = kuramoto_complement();
  RunSet rs = accepting_runs(d);
  CHECK(rs.runs.size() == 3);
  CHECK(has_run(rs, {"q0", "q3"}));
  CHECK(has_run(rs, {"q0", "q1", "q3"}));
  CHECK(has_run(rs, {"q0", "q2", "q3"}));
}

TEST_CASE("unreachable accepting location yields no runs") {
  Dfa d;
  d.locations = {"a", "b"};
  d.initial = "a";
  d.alphabet = {"s"};
  d.accepting = {"b"};
  d.transitions[{"a", "s"}] = "a";
  d.transitions[{"b", "s"}] = "b";
  CHECK(accepting_runs(d).runs.empty());
}

TEST_CASE("runs have no adjacent repeats and end accepting") {
  for (const Dfa& d : {running_example_complement(), kuramoto_complement()}) {
    RunSet rs = accepting_runs(d);
    for (const auto& r : rs.runs) {
      CHECK(d.is_accepting(r.locations.back()));
      for (std::size_t i = 0; i + 1 < r.locations.size(); ++i) {
        CHECK(r.locations[i] != r.locations[i + 1]);
      }
    }
  }
}

TEST_CASE("decomposition by start label, six-location example") {
  Dfa d = running_example_complement();
  Decomposition dec = decompose(d);
  REQUIRE(dec.runs_by_label.count("p0"));
  CHECK(dec.runs_by_label.at("p0").size() == 2);
  CHECK(dec.runs_by_label.at("p2").size() == 2);
  CHECK(dec.runs_by_label.at("p1").size() == 1);
  CHECK(dec.runs_by_label.at("p3").size() == 1);

  // triples of (q0,q1,q2,q3): {(q0,q1,q2), (q1,q2,q3)}
  for (std::size_t r = 0; r < dec.run_set.runs.size(); ++r) {
    if (dec.run_set.runs[r].locations == locs({"q0", "q1", "q2", "q3"})) {
      REQUIRE(dec.triples_per_run[r].size() == 2);
      CHECK(dec.triples_per_run[r][0] == Triple{"q0", "q1", "q2"});
      CHECK(dec.triples_per_run[r][1] == Triple{"q1", "q2", "q3"});
    }
    if (dec.run_set.runs[r].locations == locs({"q0", "q3"})) {
      CHECK(dec.triples_per_run[r].empty());
    }
  }
  CHECK(dec.all_triples.size() == 7);
}

TEST_CASE("decomposition of the two-band automaton") {
  Dfa d = kuramoto_complement();
  Decomposition dec = decompose(d);
  REQUIRE(dec.runs_by_label.count("p1"));
  REQUIRE(dec.runs_by_label.count("p4"));
  int idx1 = dec.runs_by_label.at("p1").front();
  CHECK(dec.run_set.runs[idx1].locations == locs({"q0", "q1", "q3"}));
  CHECK(dec.triples_per_run[idx1] ==
        std::vector<Triple>{Triple{"q0", "q1", "q3"}});
  CHECK(dec.all_triples.size() == 2);
  // the direct run is reachable from every symbol that jumps straight to q3
  for (const std::string& sym : {"p0", "p2", "p3", "p5", "p6"}) {
    REQUIRE(dec.runs_by_label.count(sym));
    int idx = dec.runs_by_label.at(sym).front();
    CHECK(dec.run_set.runs[idx].locations == locs({"q0", "q3"}));
  }
}

TEST_CASE("union of per-run triples covers the triple set exactly") {
  for (const Dfa& d : {running_example_complement(), kuramoto_complement()}) {
    Decomposition dec = decompose(d);
    std::set<Triple> unioned;
    for (const auto& ts : dec.triples_per_run) {
      unioned.insert(ts.begin(), ts.end());
    }
    CHECK(std::vector<Triple>(unioned.begin(), unioned.end()) == dec.all_triples);
  }
}

TEST_CASE("partitioning groups triples sharing the leading pair") {
  Dfa d = running_example_complement();
  Decomposition dec = decompose(d);
  auto parts = partition_elements(d, dec.all_triples);
  CHECK(parts.size() == 5);
  const PartitionTask* q0q1 = nullptr;
  for (const auto& p : parts) {
    if (p.key() == "(q0,q1)") q0q1 = &p;
  }
  REQUIRE(q0q1 != nullptr);
  CHECK(q0q1->triples.size() == 2);
  CHECK(q0q1->initial_symbols == std::vector<std::string>{"p0"});
  // outgoing edges of q1 carry p1 (to q2) and p2 (to q5)
  CHECK(q0q1->unsafe_symbols == std::vector<std::string>{"p1", "p2"});

  // every triple lands in exactly one partition
  std::set<Triple> covered;
  for (const auto& p : parts) {
    for (const auto& t : p.triples) {
      CHECK_FALSE(covered.count(t));
      covered.insert(t);
    }
  }
  CHECK(covered.size() == dec.all_triples.size());
}

TEST_CASE("singleton triples form their own partitions") {
  Dfa d = kuramoto_complement();
  Decomposition dec = decompose(d);
  auto parts = partition_elements(d, dec.all_triples);
  CHECK(parts.size() == 2);
  CHECK(parts[0].key() == "(q0,q1)");
  CHECK(parts[0].unsafe_symbols == std::vector<std::string>{"p0", "p2"});
  CHECK(parts[1].key() == "(q0,q2)");
  CHECK(parts[1].unsafe_symbols == std::vector<std::string>{"p3", "p5"});
}

TEST_CASE("switching automaton of the six-location example") {
  Dfa d = running_example_complement();
  SwitchingAutomaton a = build_switching_automaton(d);
  auto [want_locs, want_trans] = switching_counts_oracle(d);
  CHECK(static_cast<int>(a.locations.size()) == want_locs);
  CHECK(static_cast<int>(a.transition_count()) == want_trans);
  // derived by applying the construction rules by hand
  CHECK(a.locations.size() == 7);
  CHECK(a.transition_count() == 11);
  // initial on p0 enters the (q0,q1) task
  int tgt = a.step(a.initial_location, "p0");
  REQUIRE(tgt >= 0);
  CHECK(a.locations[tgt].name == "(q0,q1)");
  // direct violation symbols go straight to the accepting location
  int acc = a.step(a.initial_location, "p1");
  REQUIRE(acc >= 0);
  CHECK(a.is_accepting(acc));
}

TEST_CASE("single-edge automaton gives initial and accepting locations only") {
  Dfa d;
  d.locations = {"q0", "qa"};
  d.initial = "q0";
  d.alphabet = {"s"};
  d.accepting = {"qa"};
  d.transitions[{"q0", "s"}] = "qa";
  d.transitions[{"qa", "s"}] = "qa";
  SwitchingAutomaton a = build_switching_automaton(d);
  CHECK(a.locations.size() == 2);
  CHECK(a.transition_count() == 1);
}

TEST_CASE("switching automaton of the two-band automaton feeds two tasks") {
  Dfa d = kuramoto_complement();
  SwitchingAutomaton a = build_switching_automaton(d);
  // init, (q0,q1), (q0,q2), q3
  CHECK(a.locations.size() == 4);
  int t1 = a.step(a.initial_location, "p1");
  int t2 = a.step(a.initial_location, "p4");
  REQUIRE(t1 >= 0);
  REQUIRE(t2 >= 0);
  CHECK(a.locations[t1].name == "(q0,q1)");
  CHECK(a.locations[t2].name == "(q0,q2)");
  // no transition on self-loop symbols: the active task persists
  CHECK(a.step(t1, "p3") == -1);
  // unsafe symbol ends in the accepting location
  int v = a.step(t1, "p0");
  REQUIRE(v >= 0);
  CHECK(a.is_accepting(v));
}

TEST_CASE("automaton json round trip") {
  Dfa d = kuramoto_complement();
  Json j = to_json(d);
  Dfa back = dfa_from_json(j);
  CHECK(back.locations == d.locations);
  CHECK(back.accepting == d.accepting);
  CHECK(back.transitions == d.transitions);
}

TEST_CASE("property automaton with complement flag gets complemented on load") {
  Dfa d = kuramoto_complement();
  Json j = to_json(d.complement());
  j["complement_of_property"] = false;
  Dfa loaded = dfa_from_json(j);
  CHECK(loaded.accepting == d.accepting);
}

TEST_CASE("run length cap reports truncation") {
  // two-state cycle a <-> b with accepting c reachable only via long paths
  Dfa d;
  d.locations = {"a", "b", "c"};
  d.initial = "a";
  d.alphabet = {"s", "t"};
  d.accepting = {"c"};
  d.transitions[{"a", "s"}] = "b";
  d.transitions[{"a", "t"}] = "a";
  d.transitions[{"b", "s"}] = "a";
  d.transitions[{"b", "t"}] = "c";
  d.transitions[{"c", "s"}] = "c";
  d.transitions[{"c", "t"}] = "c";
  RunEnumerationConfig cfg;
  cfg.max_len = 3;
  RunSet rs = accepting_runs(d, cfg);
  CHECK(rs.truncated);  // a-b-a-b-... paths hit the cap
  CHECK(has_run(rs, {"a", "b", "c"}));
  // simple-paths-only enumeration terminates without the cap
  RunEnumerationConfig simple;
  simple.simple_paths_only = true;
  RunSet rs2 = accepting_runs(d, simple);
  CHECK(rs2.runs.size() == 1);
}

TEST_CASE("labeling lookup and disjointness") {
  Network net = kuramoto_network(2, false);
  Labeling lab = kuramoto_labeling(net);
  Box domain;
  for (const auto& sub : net.subsystems) {
    domain.dims.insert(domain.dims.end(), sub.state_box.dims.begin(),
                       sub.state_box.dims.end());
  }
  CHECK(lab.check(domain, 5).empty());
  std::vector<double> x{band1().center(), band1().center()};
  CHECK(lab.label_of(x) == "p1");
  std::vector<double> mixed{band1().center(), band4().center()};
  CHECK(lab.label_of(mixed) == "p6");

  Labeling bad = lab;
  Region r;
  r.boxes.push_back(Box::cube(0.0, 1.0, 2));  // overlaps p0 x p0 corner
  bad.regions.emplace("px", r);
  CHECK_FALSE(bad.check(domain, 5).empty());
}

TEST_CASE("run enumeration respects the run-count cap") {
  // diamond ladder: 2^10 distinct accepting runs
  Dfa d;
  const int layers = 10;
  d.alphabet = {"a", "b"};
  d.locations.push_back("n0");
  for (int i = 0; i < layers; ++i) {
    d.locations.push_back("l" + std::to_string(i));
    d.locations.push_back("r" + std::to_string(i));
    d.locations.push_back("n" + std::to_string(i + 1));
  }
  d.initial = "n0";
  d.accepting = {"n" + std::to_string(layers)};
  for (int i = 0; i < layers; ++i) {
    std::string n = "n" + std::to_string(i);
    std::string l = "l" + std::to_string(i);
    std::string r = "r" + std::to_string(i);
    std::string next = "n" + std::to_string(i + 1);
    d.transitions[{n, "a"}] = l;
    d.transitions[{n, "b"}] = r;
    d.transitions[{l, "a"}] = next;
    d.transitions[{l, "b"}] = next;
    d.transitions[{r, "a"}] = next;
    d.transitions[{r, "b"}] = next;
  }
  for (const auto& s : d.alphabet) {
    d.transitions[{d.accepting.begin()->c_str(), s}] = *d.accepting.begin();
  }
  RunEnumerationConfig cfg;
  cfg.max_runs = 100;
  CHECK_THROWS_AS(accepting_runs(d, cfg), CapacityError);
  cfg.max_runs = 2000;
  RunSet rs = accepting_runs(d, cfg);
  CHECK(rs.runs.size() == 1024);
}
