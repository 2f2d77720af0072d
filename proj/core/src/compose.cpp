#include "shsbarrier/compose.hpp"

#include <algorithm>
#include <cmath>

#include "shsbarrier/errors.hpp"

namespace shs {

namespace {

// Minimal c with rho(split * alpha^{-1}(s)) <= c * s on (0, s_max], for the
// closed-form gain shapes. The composite is C * s^e with
//   e = b_rho / b_alpha,  C = a_rho * split^{b_rho} * a_alpha^{-e}.
double chain_gain_constant(const ScalarGainFunction& rho,
                           const ScalarGainFunction& alpha, double split,
                           double s_max, const std::string& who) {
  if (rho.is_zero()) return 0.0;
  if (!alpha.is_class_k_infinity()) {
    throw CompositionError(who + ": alpha gain must be invertible (class K-infinity)");
  }
  double b_rho = rho.kind == ScalarGainFunction::Kind::power ? rho.exponent : 1.0;
  double b_alpha =
      alpha.kind == ScalarGainFunction::Kind::power ? alpha.exponent : 1.0;
  double e = b_rho / b_alpha;
  double C = rho.scale * std::pow(split, b_rho) * std::pow(alpha.scale, -e);
  if (std::abs(e - 1.0) < 1e-12) return C;
  if (e > 1.0) return C * std::pow(s_max, e - 1.0);
  throw CompositionError(
      who + ": interaction gain grows faster than linearly near zero; no "
            "finite delta-hat exists");
}

bool strongly_connected(const Matrix& delta) {
  const int n = static_cast<int>(delta.size());
  if (n <= 1) return true;
  auto reach = [&](bool transpose) {
    std::vector<bool> seen(n, false);
    std::vector<int> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      for (int u = 0; u < n; ++u) {
        double w = transpose ? delta[u][v] : delta[v][u];
        if (w > 0 && !seen[u]) {
          seen[u] = true;
          stack.push_back(u);
        }
      }
    }
    return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  };
  return reach(false) && reach(true);
}

}  // namespace

std::vector<double> SmallGainData::lambda_diag() const {
  std::vector<double> out;
  for (const auto& per_mode : lambda_hat) {
    out.push_back(*std::min_element(per_mode.begin(), per_mode.end()));
  }
  return out;
}

Matrix SmallGainData::delta_matrix() const {
  const int n = static_cast<int>(delta_hat.size());
  Matrix d(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j || delta_hat[i][j].empty()) continue;
      d[i][j] = *std::max_element(delta_hat[i][j].begin(), delta_hat[i][j].end());
    }
  }
  return d;
}

SmallGainData extract_gains(const std::vector<PseudoCertificate>& certs,
                            const Network& net,
                            const GainExtractionConfig& cfg) {
  const int N = net.size();
  if (static_cast<int>(certs.size()) != N) {
    throw InputError("need one certificate per subsystem");
  }

  SmallGainData sgd;
  sgd.gamma_hat.assign(N, ScalarGainFunction::identity());

  // Barrier range over the state grids bounds the s-interval the linear
  // minorants must cover.
  double b_max = 0.0;
  for (int i = 0; i < N; ++i) {
    const auto& sub = net.subsystems[i];
    for (const auto& mc : certs[i].modes) {
      for_each_grid_point(sub.state_box, cfg.grid_points_per_dim,
                          [&](std::span<const double> x) {
                            b_max = std::max(b_max, mc.barrier.eval(x));
                          });
    }
  }
  sgd.barrier_range_max = std::max(b_max, 1.0);

  sgd.lambda_hat.resize(N);
  for (int i = 0; i < N; ++i) {
    for (const auto& mc : certs[i].modes) {
      double lb;
      try {
        lb = mc.kappa.linear_lower_bound(sgd.barrier_range_max);
      } catch (const InputError& e) {
        throw CompositionError("subsystem '" + net.subsystems[i].id +
                               "': " + e.what());
      }
      if (!(lb > 0)) {
        throw CompositionError("subsystem '" + net.subsystems[i].id +
                               "': kappa admits no positive linear minorant");
      }
      sgd.lambda_hat[i].push_back(lb);
    }
  }

  sgd.delta_hat.assign(N, std::vector<std::vector<double>>(N));
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j < N; ++j) {
      if (i == j) continue;
      // delta_hat[i][j] is zero when j does not feed i (h_ji identically 0).
      bool feeds = net.subsystems[j].outputs.count(net.subsystems[i].id) > 0;
      const int mj = net.subsystems[j].mode_count();
      if (!feeds) {
        sgd.delta_hat[i][j].assign(mj, 0.0);
        continue;
      }
      const int mi = net.subsystems[i].mode_count();
      const bool cross = cfg.cross_mode_pairing || mi != mj;
      for (int pj = 0; pj < mj; ++pj) {
        double worst = 0.0;
        const auto& alpha = certs[j].modes[pj].alpha;
        for (int pi = 0; pi < mi; ++pi) {
          if (!cross && pi != pj) continue;
          const auto& rho = certs[i].modes[pi].rho_int;
          double split = 1.0;
          if (!(cfg.tight_split_for_concave && rho.is_concave())) {
            split = static_cast<double>(N - 1);
          }
          worst = std::max(worst,
                           chain_gain_constant(rho, alpha, split,
                                               sgd.barrier_range_max,
                                               net.subsystems[i].id));
        }
        sgd.delta_hat[i][j].push_back(worst);
      }
    }
  }
  return sgd;
}

double spectral_radius_power_iteration(const Matrix& a, int iterations,
                                       double tolerance) {
  const int n = static_cast<int>(a.size());
  if (n == 0) return 0.0;
  for (const auto& row : a) {
    for (double v : row) {
      if (v < 0) throw InputError("power iteration expects a nonnegative matrix");
    }
  }
  // Shift by the identity: rho(A) = rho(A + I) - 1 for nonnegative A, and the
  // positive diagonal removes periodicity so the iteration settles.
  std::vector<double> v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> w(n, 0.0);
    for (int i = 0; i < n; ++i) {
      double acc = v[i];
      for (int j = 0; j < n; ++j) acc += a[i][j] * v[j];
      w[i] = acc;
    }
    double norm = 0.0;
    for (double x : w) norm = std::max(norm, std::abs(x));
    if (norm == 0.0) return 0.0;
    for (double& x : w) x /= norm;
    double prev = estimate;
    estimate = norm;
    v = std::move(w);
    if (it > 0 && std::abs(estimate - prev) <=
                      tolerance * std::max(1.0, std::abs(estimate))) {
      return estimate - 1.0;
    }
  }
  throw NumericError("power iteration did not converge");
}

std::vector<double> weighted_gain_balance(const std::vector<double>& lambda_diag,
                                          const Matrix& delta,
                                          const std::vector<double>& mu) {
  const int n = static_cast<int>(lambda_diag.size());
  std::vector<double> out(n, 0.0);
  for (int j = 0; j < n; ++j) {
    double acc = -mu[j] * lambda_diag[j];
    for (int i = 0; i < n; ++i) {
      if (i != j) acc += mu[i] * delta[i][j];
    }
    out[j] = acc;
  }
  return out;
}

SmallGainResult check_small_gain_matrices(const std::vector<double>& lambda_diag,
                                          const Matrix& delta) {
  const int n = static_cast<int>(lambda_diag.size());
  for (double l : lambda_diag) {
    if (!(l > 0)) throw InputError("Lambda must have a strictly positive diagonal");
  }
  Matrix scaled(n, std::vector<double>(n, 0.0));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) scaled[i][j] = delta[i][j] / lambda_diag[i];
  }
  SmallGainResult result;
  result.spectral_radius = spectral_radius_power_iteration(scaled);
  if (result.spectral_radius >= 1.0) return result;

  auto balanced = [&](const std::vector<double>& mu) {
    auto vals = weighted_gain_balance(lambda_diag, delta, mu);
    return std::all_of(vals.begin(), vals.end(),
                       [](double v) { return v < 0.0; });
  };

  if (strongly_connected(delta)) {
    // Left Perron eigenvector of (-Lambda + Delta): power-iterate the
    // transpose shifted into the nonnegative cone.
    double shift = *std::max_element(lambda_diag.begin(), lambda_diag.end()) + 1.0;
    std::vector<double> mu(n, 1.0);
    for (int it = 0; it < 500; ++it) {
      std::vector<double> next(n, 0.0);
      for (int j = 0; j < n; ++j) {
        double acc = (shift - lambda_diag[j]) * mu[j];
        for (int i = 0; i < n; ++i) {
          if (i != j) acc += delta[i][j] * mu[i];
        }
        next[j] = acc;
      }
      double norm = *std::max_element(next.begin(), next.end());
      if (norm <= 0) break;
      for (double& x : next) x /= norm;
      double drift = 0.0;
      for (int j = 0; j < n; ++j) drift = std::max(drift, std::abs(next[j] - mu[j]));
      mu = std::move(next);
      if (drift < 1e-14) break;
    }
    double mn = *std::min_element(mu.begin(), mu.end());
    if (mn > 0) {
      for (double& x : mu) x /= mn;
      if (balanced(mu)) {
        result.mu = mu;
        return result;
      }
    }
  }

  std::vector<double> mu(n, 1.0);
  for (int step = 0; step < 10'000; ++step) {
    auto vals = weighted_gain_balance(lambda_diag, delta, mu);
    bool ok = true;
    for (int j = 0; j < n; ++j) {
      if (vals[j] >= 0.0) {
        mu[j] *= 1.1;
        ok = false;
      }
    }
    if (ok) {
      result.mu = mu;
      return result;
    }
  }
  return result;  // spectral radius reported, no usable mu found
}

SmallGainResult check_small_gain(const SmallGainData& sgd) {
  return check_small_gain_matrices(sgd.lambda_diag(), sgd.delta_matrix());
}

NetworkCertificate compose_certificate(
    const std::vector<PseudoCertificate>& certs, const SmallGainData& sgd,
    const std::vector<double>& mu) {
  const int N = static_cast<int>(certs.size());
  if (static_cast<int>(mu.size()) != N) {
    throw InputError("mu length must match the subsystem count");
  }
  for (const auto& g : sgd.gamma_hat) {
    if (!(g.kind == ScalarGainFunction::Kind::linear && g.scale == 1.0)) {
      throw CompositionError("only identity gamma-hat gains are supported");
    }
  }

  NetworkCertificate ncert;
  ncert.mu = mu;
  for (int i = 0; i < N; ++i) {
    double g = 0.0, l = std::numeric_limits<double>::infinity(), s = 0.0;
    for (const auto& mc : certs[i].modes) {
      g = std::max(g, mc.gamma);
      l = std::min(l, mc.lambda);
      s = std::max(s, mc.psi);
    }
    ncert.gamma += mu[i] * g;
    ncert.lambda += mu[i] * l;
    ncert.psi += mu[i] * s;
  }
  if (!(ncert.lambda > ncert.gamma)) {
    throw CompositionError(
        "composed unsafe level does not dominate the initial level "
        "(deficit " +
        std::to_string(ncert.gamma - ncert.lambda) + ")");
  }

  auto vals = weighted_gain_balance(sgd.lambda_diag(), sgd.delta_matrix(), mu);
  double kappa_hat = std::numeric_limits<double>::infinity();
  for (int i = 0; i < N; ++i) {
    kappa_hat = std::min(kappa_hat, -vals[i] / mu[i]);
  }
  if (!(kappa_hat > 0)) {
    throw CompositionError("mu does not balance the gain matrices");
  }
  ncert.kappa_hat = kappa_hat;
  ncert.check();
  return ncert;
}

}  // namespace shs
