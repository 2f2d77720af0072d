#include <doctest.h>

#include <cmath>

#include "shsbarrier/lp.hpp"

using namespace shs;

TEST_CASE("simple bounded minimum") {
  // min x + y  s.t.  x >= 1, y >= 2, x + y <= 10
  LinearProgram lp(2);
  lp.add_ge(std::vector<double>{1, 0}, 1.0);
  lp.add_ge(std::vector<double>{0, 1}, 2.0);
  lp.add_le(std::vector<double>{1, 1}, 10.0);
  auto r = solve_lp(lp, std::vector<double>{1, 1});
  REQUIRE(r.ok());
  CHECK(r.objective == doctest::Approx(3.0));
  CHECK(r.x[0] == doctest::Approx(1.0));
  CHECK(r.x[1] == doctest::Approx(2.0));
}

TEST_CASE("free variables can go negative") {
  // min x  s.t.  x >= -5
  LinearProgram lp(1);
  lp.add_ge(std::vector<double>{1}, -5.0);
  auto r = solve_lp(lp, std::vector<double>{1});
  REQUIRE(r.ok());
  CHECK(r.x[0] == doctest::Approx(-5.0));
}

TEST_CASE("infeasible system is reported") {
  LinearProgram lp(1);
  lp.add_ge(std::vector<double>{1}, 3.0);
  lp.add_le(std::vector<double>{1}, 2.0);
  auto r = solve_lp(lp, std::vector<double>{1});
  CHECK(r.status == LpResult::Status::infeasible);
}

TEST_CASE("unbounded direction is reported") {
  LinearProgram lp(1);
  lp.add_le(std::vector<double>{1}, 4.0);
  auto r = solve_lp(lp, std::vector<double>{1});  // min x, x unbounded below
  CHECK(r.status == LpResult::Status::unbounded);
}

TEST_CASE("equality constraints") {
  // min -x - y  s.t.  x + y = 4, x <= 3, y <= 3
  LinearProgram lp(2);
  lp.add_eq(std::vector<double>{1, 1}, 4.0);
  lp.add_le(std::vector<double>{1, 0}, 3.0);
  lp.add_le(std::vector<double>{0, 1}, 3.0);
  auto r = solve_lp(lp, std::vector<double>{-1, -1});
  REQUIRE(r.ok());
  CHECK(r.x[0] + r.x[1] == doctest::Approx(4.0));
}

TEST_CASE("degenerate ties resolve deterministically") {
  LinearProgram lp(2);
  lp.add_le(std::vector<double>{1, 1}, 1.0);
  lp.add_le(std::vector<double>{1, 1}, 1.0);  // duplicate row
  lp.add_ge(std::vector<double>{1, 0}, 0.0);
  lp.add_ge(std::vector<double>{0, 1}, 0.0);
  auto a = solve_lp(lp, std::vector<double>{-1, 0});
  auto b = solve_lp(lp, std::vector<double>{-1, 0});
  REQUIRE(a.ok());
  REQUIRE(b.ok());
  CHECK(a.x == b.x);
  CHECK(a.objective == doctest::Approx(-1.0));
}

TEST_CASE("lexicographic staging pins earlier optima") {
  // Stage 1 minimizes x, stage 2 minimizes y under x + y >= 2, x >= 0, y >= 0.
  LinearProgram lp(2);
  lp.add_ge(std::vector<double>{1, 1}, 2.0);
  lp.add_ge(std::vector<double>{1, 0}, 0.0);
  lp.add_ge(std::vector<double>{0, 1}, 0.0);
  lp.add_le(std::vector<double>{0, 1}, 10.0);
  auto r = solve_lexicographic(lp, {{1, 0}, {0, 1}});
  REQUIRE(r.ok());
  // pins leave room at the solver-tolerance scale
  CHECK(r.x[0] == doctest::Approx(0.0).epsilon(1e-3));
  CHECK(std::abs(r.x[0]) < 1e-3);
  // with x pinned near 0, y carries the constraint
  CHECK(r.x[1] == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("feasibility monotonicity: extra rows never enlarge the set") {
  LinearProgram small(2);
  small.add_ge(std::vector<double>{1, 0}, 1.0);
  small.add_le(std::vector<double>{1, 0}, 5.0);
  small.add_le(std::vector<double>{0, 1}, 5.0);
  small.add_ge(std::vector<double>{0, 1}, -5.0);
  auto base = solve_lp(small, std::vector<double>{1, 1});
  REQUIRE(base.ok());

  LinearProgram larger = small;
  larger.add_ge(std::vector<double>{1, 0}, 6.0);  // conflicts with x <= 5
  auto r = solve_lp(larger, std::vector<double>{1, 1});
  CHECK(r.status == LpResult::Status::infeasible);
}
