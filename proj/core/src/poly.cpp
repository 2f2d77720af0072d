#include "shsbarrier/poly.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shsbarrier/errors.hpp"

namespace shs {

namespace {

int var_index(const std::vector<std::string>& vars, const std::string& name) {
  for (std::size_t i = 0; i < vars.size(); ++i) {
    if (vars[i] == name) return static_cast<int>(i);
  }
  return -1;
}

}  // namespace

Polynomial::Polynomial(std::vector<std::string> variables)
    : vars_(std::move(variables)) {}

Polynomial Polynomial::constant(std::vector<std::string> variables,
                                double value) {
  Polynomial p(std::move(variables));
  p.add_term(Exponents(p.vars_.size(), 0), value);
  return p;
}

Polynomial Polynomial::variable(std::vector<std::string> variables,
                                const std::string& name) {
  Polynomial p(std::move(variables));
  int idx = var_index(p.vars_, name);
  if (idx < 0) throw InputError("unknown variable '" + name + "'");
  Exponents e(p.vars_.size(), 0);
  e[idx] = 1;
  p.add_term(e, 1.0);
  return p;
}

Polynomial Polynomial::univariate(const std::string& var,
                                  std::span<const double> coeffs) {
  Polynomial p(std::vector<std::string>{var});
  for (std::size_t d = 0; d < coeffs.size(); ++d) {
    p.add_term({static_cast<int>(d)}, coeffs[d]);
  }
  return p;
}

void Polynomial::add_term(const Exponents& exps, double coeff) {
  if (exps.size() != vars_.size()) {
    throw InputError("exponent vector length does not match variable count");
  }
  for (int e : exps) {
    if (e < 0) throw InputError("negative exponent");
  }
  auto it = terms_.find(exps);
  if (it == terms_.end()) {
    if (coeff != 0.0) terms_.emplace(exps, coeff);
  } else {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
}

int Polynomial::total_degree() const {
  int deg = 0;
  for (const auto& [e, c] : terms_) {
    int d = 0;
    for (int x : e) d += x;
    deg = std::max(deg, d);
  }
  return deg;
}

int Polynomial::degree_in(const std::string& var) const {
  int idx = var_index(vars_, var);
  if (idx < 0) throw InputError("unknown variable '" + var + "'");
  int deg = 0;
  for (const auto& [e, c] : terms_) deg = std::max(deg, e[idx]);
  return deg;
}

double Polynomial::eval(std::span<const double> point) const {
  if (point.size() != vars_.size()) {
    throw InputError("evaluation point has wrong dimension");
  }
  double sum = 0.0;
  for (const auto& [exps, coeff] : terms_) {
    double term = coeff;
    for (std::size_t i = 0; i < exps.size(); ++i) {
      for (int k = 0; k < exps[i]; ++k) term *= point[i];
    }
    sum += term;
  }
  return sum;
}

Polynomial Polynomial::partial(const std::string& var) const {
  int idx = var_index(vars_, var);
  if (idx < 0) throw InputError("unknown variable '" + var + "'");
  Polynomial out(vars_);
  for (const auto& [exps, coeff] : terms_) {
    if (exps[idx] == 0) continue;
    Exponents e = exps;
    double c = coeff * e[idx];
    e[idx] -= 1;
    out.add_term(e, c);
  }
  return out;
}

Polynomial Polynomial::substitute(const std::map<std::string, Polynomial>& subs,
                                  const std::vector<std::string>& target_vars)
    const {
  // Resolve the replacement for every source variable up front.
  std::vector<Polynomial> repl;
  repl.reserve(vars_.size());
  for (const auto& v : vars_) {
    auto it = subs.find(v);
    if (it != subs.end()) {
      repl.push_back(it->second.embed(target_vars));
    } else {
      repl.push_back(Polynomial::variable(target_vars, v));
    }
  }
  // Cache powers of each replacement up to the needed degree.
  std::vector<std::vector<Polynomial>> powers(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    powers[i].push_back(Polynomial::constant(target_vars, 1.0));
  }
  Polynomial out(target_vars);
  for (const auto& [exps, coeff] : terms_) {
    Polynomial term = Polynomial::constant(target_vars, coeff);
    for (std::size_t i = 0; i < exps.size(); ++i) {
      while (static_cast<int>(powers[i].size()) <= exps[i]) {
        powers[i].push_back(powers[i].back() * repl[i]);
      }
      if (exps[i] > 0) term *= powers[i][exps[i]];
    }
    out += term;
  }
  return out;
}

Polynomial Polynomial::compose_shift(
    const std::map<std::string, Polynomial>& subs) const {
  for (const auto& [name, p] : subs) {
    if (var_index(vars_, name) < 0) {
      throw InputError("substitution for undeclared variable '" + name + "'");
    }
  }
  return substitute(subs, vars_);
}

Polynomial Polynomial::embed(const std::vector<std::string>& superset) const {
  if (superset == vars_) return *this;
  std::vector<int> where(vars_.size());
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    int idx = var_index(superset, vars_[i]);
    if (idx < 0) {
      throw InputError("variable '" + vars_[i] +
                       "' is missing from the target variable space");
    }
    where[i] = idx;
  }
  Polynomial out(superset);
  for (const auto& [exps, coeff] : terms_) {
    Exponents e(superset.size(), 0);
    for (std::size_t i = 0; i < exps.size(); ++i) e[where[i]] = exps[i];
    out.add_term(e, coeff);
  }
  return out;
}

Polynomial Polynomial::shrink(const std::vector<std::string>& subset) const {
  std::vector<int> where(vars_.size(), -1);
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    where[i] = var_index(subset, vars_[i]);
  }
  Polynomial out(subset);
  for (const auto& [exps, coeff] : terms_) {
    Exponents e(subset.size(), 0);
    for (std::size_t i = 0; i < exps.size(); ++i) {
      if (exps[i] == 0) continue;
      if (where[i] < 0) {
        throw InputError("variable '" + vars_[i] +
                         "' is used but absent from the target subset");
      }
      e[where[i]] = exps[i];
    }
    out.add_term(e, coeff);
  }
  return out;
}

bool Polynomial::uses_only(const std::vector<std::string>& allowed) const {
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (var_index(allowed, vars_[i]) >= 0) continue;
    for (const auto& [exps, coeff] : terms_) {
      if (exps[i] != 0) return false;
    }
  }
  return true;
}

void Polynomial::check_same_space(const Polynomial& rhs) const {
  if (vars_ != rhs.vars_) {
    throw InputError("polynomial variable spaces differ ('" + to_string() +
                     "' vs '" + rhs.to_string() + "')");
  }
}

Polynomial Polynomial::operator-() const {
  Polynomial out(vars_);
  for (const auto& [e, c] : terms_) out.terms_.emplace(e, -c);
  return out;
}

Polynomial& Polynomial::operator+=(const Polynomial& rhs) {
  check_same_space(rhs);
  for (const auto& [e, c] : rhs.terms_) add_term(e, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& rhs) {
  check_same_space(rhs);
  for (const auto& [e, c] : rhs.terms_) add_term(e, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(const Polynomial& rhs) {
  check_same_space(rhs);
  Polynomial out(vars_);
  for (const auto& [ea, ca] : terms_) {
    for (const auto& [eb, cb] : rhs.terms_) {
      Exponents e(ea.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      out.add_term(e, ca * cb);
    }
  }
  *this = std::move(out);
  return *this;
}

Polynomial& Polynomial::operator*=(double scalar) {
  if (scalar == 0.0) {
    terms_.clear();
    return *this;
  }
  for (auto& [e, c] : terms_) c *= scalar;
  return *this;
}

bool Polynomial::approx_equal(const Polynomial& rhs, double tol) const {
  if (vars_ != rhs.vars_) return false;
  Polynomial diff = *this - rhs;
  for (const auto& [e, c] : diff.terms_) {
    if (std::abs(c) > tol) return false;
  }
  return true;
}

std::string Polynomial::to_string() const {
  if (terms_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (const auto& [exps, coeff] : terms_) {
    if (!first) os << " + ";
    first = false;
    os << coeff;
    for (std::size_t i = 0; i < exps.size(); ++i) {
      if (exps[i] == 0) continue;
      os << "*" << vars_[i];
      if (exps[i] > 1) os << "^" << exps[i];
    }
  }
  return os.str();
}

}  // namespace shs
