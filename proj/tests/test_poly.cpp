#include <doctest.h>

#include <cmath>
#include <random>

#include "shsbarrier/errors.hpp"
#include "shsbarrier/gains.hpp"
#include "shsbarrier/json_io.hpp"
#include "shsbarrier/poly.hpp"

using namespace shs;

namespace {

// Degree-6 univariate used across the suite (also the shape of the case
// study's barriers).
Polynomial degree6() {
  const double c[] = {6245, -1038, 4791, -36, 8.9, -310, 85};
  return Polynomial::univariate("x", c);
}

// Independent evaluation oracle: per-term std::pow in reverse term order,
// long double accumulation. Deliberately different from Polynomial::eval.
long double eval_oracle(const Polynomial& p, const std::vector<double>& x) {
  long double sum = 0.0L;
  const auto& terms = p.terms();
  for (auto it = terms.rbegin(); it != terms.rend(); ++it) {
    long double t = it->second;
    for (std::size_t i = 0; i < it->first.size(); ++i) {
      t *= std::pow(static_cast<long double>(x[i]),
                    static_cast<long double>(it->first[i]));
    }
    sum += t;
  }
  return sum;
}

Polynomial random_poly(std::mt19937& gen, const std::vector<std::string>& vars,
                       int max_degree, int terms) {
  std::uniform_int_distribution<int> deg(0, max_degree);
  std::uniform_real_distribution<double> coeff(-3.0, 3.0);
  Polynomial p(vars);
  for (int t = 0; t < terms; ++t) {
    Polynomial::Exponents e(vars.size());
    for (auto& v : e) v = deg(gen);
    p.add_term(e, coeff(gen));
  }
  return p;
}

}  // namespace

TEST_CASE("monomial evaluation") {
  Polynomial p(std::vector<std::string>{"x"});
  p.add_term({2}, 1.0);
  CHECK(p.eval(std::vector<double>{3.0}) == 9.0);
}

TEST_CASE("zero polynomial evaluates to zero anywhere") {
  Polynomial p(std::vector<std::string>{"x", "y"});
  CHECK(p.eval(std::vector<double>{7.0, -2.0}) == 0.0);
  CHECK(p.is_zero());
}

TEST_CASE("degree-6 evaluation matches the independent term oracle") {
  Polynomial p = degree6();
  std::vector<double> x{std::acos(-1.0) / 2.0};
  double got = p.eval(x);
  long double want = eval_oracle(p, x);
  CHECK(std::abs(got - static_cast<double>(want)) <=
        1e-9 * std::abs(static_cast<double>(want)));
}

TEST_CASE("evaluation rejects dimension mismatch") {
  Polynomial p = degree6();
  CHECK_THROWS_AS(p.eval(std::vector<double>{1.0, 2.0}), InputError);
}

TEST_CASE("partial derivative power rule") {
  Polynomial p(std::vector<std::string>{"x", "y"});
  p.add_term({2, 1}, 1.0);  // x^2 y
  Polynomial d = p.partial("x");
  Polynomial want(std::vector<std::string>{"x", "y"});
  want.add_term({1, 1}, 2.0);
  CHECK(d == want);
}

TEST_CASE("partial of a constant is zero") {
  auto p = Polynomial::constant({"x"}, 5.0);
  CHECK(p.partial("x").is_zero());
  CHECK_THROWS_AS(p.partial("zz"), InputError);
}

TEST_CASE("partial of the degree-6 barrier matches central differences") {
  Polynomial p = degree6();
  Polynomial d = p.partial("x");
  CHECK(d.total_degree() == 5);
  std::mt19937 gen(7);
  std::uniform_real_distribution<double> dist(0.0, 6.28);
  const double h = 1e-5;
  for (int i = 0; i < 10; ++i) {
    double x = dist(gen);
    double fd = (p.eval(std::vector<double>{x + h}) -
                 p.eval(std::vector<double>{x - h})) /
                (2 * h);
    double sym = d.eval(std::vector<double>{x});
    CHECK(std::abs(fd - sym) <= 1e-6 * std::max(1.0, std::abs(sym)));
  }
}

TEST_CASE("mixed partials commute exactly") {
  std::mt19937 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    Polynomial p = random_poly(gen, {"x", "y", "z"}, 4, 8);
    CHECK(p.partial("x").partial("y") == p.partial("y").partial("x"));
  }
}

TEST_CASE("binomial shift") {
  Polynomial p(std::vector<std::string>{"x"});
  p.add_term({2}, 1.0);
  std::map<std::string, Polynomial> subs;
  subs.emplace("x", Polynomial::univariate("x", std::vector<double>{1.0, 1.0}));
  Polynomial q = p.compose_shift(subs);
  Polynomial want = Polynomial::univariate("x", std::vector<double>{1.0, 2.0, 1.0});
  CHECK(q == want);
}

TEST_CASE("identity substitution is the identity") {
  std::mt19937 gen(3);
  for (int rep = 0; rep < 10; ++rep) {
    Polynomial p = random_poly(gen, {"x", "y"}, 5, 6);
    CHECK(p.compose_shift({}) == p);
    std::map<std::string, Polynomial> subs;
    subs.emplace("x", Polynomial::variable({"x", "y"}, "x"));
    CHECK(p.compose_shift(subs) == p);
  }
}

TEST_CASE("small reset shift and evaluation commute") {
  Polynomial p(std::vector<std::string>{"x"});
  p.add_term({2}, 1.0);
  std::map<std::string, Polynomial> subs;
  subs.emplace("x", Polynomial::univariate("x", std::vector<double>{0.1, 1.0}));
  Polynomial q = p.compose_shift(subs);
  Polynomial want = Polynomial::univariate("x", std::vector<double>{0.01, 0.2, 1.0});
  CHECK(q.approx_equal(want, 1e-15));
  std::mt19937 gen(17);
  std::uniform_real_distribution<double> dist(-4.0, 4.0);
  for (int i = 0; i < 20; ++i) {
    double x = dist(gen);
    double composed = q.eval(std::vector<double>{x});
    double direct = p.eval(std::vector<double>{x + 0.1});
    CHECK(composed == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("ring homomorphism under evaluation") {
  std::mt19937 gen(23);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  for (int rep = 0; rep < 25; ++rep) {
    Polynomial a = random_poly(gen, {"x", "y"}, 3, 5);
    Polynomial b = random_poly(gen, {"x", "y"}, 3, 5);
    std::vector<double> pt{dist(gen), dist(gen)};
    double va = a.eval(pt), vb = b.eval(pt);
    double scale = std::max({1.0, std::abs(va + vb), std::abs(va * vb)});
    CHECK(std::abs((a + b).eval(pt) - (va + vb)) <= 1e-9 * scale);
    CHECK(std::abs((a * b).eval(pt) - (va * vb)) <= 1e-9 * scale);
  }
}

TEST_CASE("normalization drops exact zeros") {
  Polynomial p(std::vector<std::string>{"x"});
  p.add_term({1}, 2.5);
  p.add_term({1}, -2.5);
  CHECK(p.is_zero());
}

TEST_CASE("json round trip preserves polynomials exactly") {
  std::mt19937 gen(31);
  for (int rep = 0; rep < 10; ++rep) {
    Polynomial p = random_poly(gen, {"x0", "u0", "w0"}, 4, 7);
    Json j = to_json(p);
    CHECK(poly_from_json(j) == p);
  }
}

TEST_CASE("gain functions: class-K-infinity behavior by sampling") {
  auto lin = ScalarGainFunction::linear(5e-5);
  auto pow = ScalarGainFunction::power(0.8, 0.5);
  CHECK(lin(0.0) == 0.0);
  CHECK(pow(0.0) == 0.0);
  double prev_l = -1, prev_p = -1;
  for (double s : {1e-6, 1e-3, 0.1, 1.0, 10.0, 1e4}) {
    CHECK(lin(s) > prev_l);
    CHECK(pow(s) > prev_p);
    prev_l = lin(s);
    prev_p = pow(s);
  }
  CHECK(lin.is_class_k_infinity());
  CHECK(pow.is_class_k_infinity());
  CHECK_FALSE(ScalarGainFunction::zero().is_class_k_infinity());
}

TEST_CASE("gain inversion") {
  auto pow = ScalarGainFunction::power(0.8, 0.5);
  CHECK(pow.inverse(0.8) == doctest::Approx(1.0));
  // inverse of 0.8*sqrt(s) is (s/0.8)^2
  CHECK(pow.inverse(2.0) == doctest::Approx(6.25));
  CHECK_THROWS_AS(pow.inverse(-1.0), InputError);
  CHECK_THROWS_AS(ScalarGainFunction::zero().inverse(1.0), InputError);
}

TEST_CASE("linear lower bounds of gains") {
  CHECK(ScalarGainFunction::linear(5e-5).linear_lower_bound(1e6) == 5e-5);
  // a * s^b with b < 1 dips lowest at the right end of the interval
  auto root = ScalarGainFunction::power(2.0, 0.5);
  CHECK(root.linear_lower_bound(4.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(ScalarGainFunction::power(1.0, 2.0).linear_lower_bound(1.0),
                  InputError);
}
