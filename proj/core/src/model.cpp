#include "shsbarrier/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "shsbarrier/errors.hpp"

namespace shs {

Box Box::cube(double lo, double hi, int dim) {
  Box b;
  b.dims.assign(dim, Interval{lo, hi});
  return b;
}

bool Box::contains(std::span<const double> x, double tol) const {
  if (x.size() != dims.size()) return false;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (!dims[i].contains(x[i], tol)) return false;
  }
  return true;
}

bool Box::contains_box(const Box& inner, double tol) const {
  if (inner.dims.size() != dims.size()) return false;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (inner.dims[i].lo < dims[i].lo - tol) return false;
    if (inner.dims[i].hi > dims[i].hi + tol) return false;
  }
  return true;
}

std::vector<double> Box::center() const {
  std::vector<double> c(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i) c[i] = dims[i].center();
  return c;
}

double Box::half_diagonal(int points_per_dim) const {
  double sq = 0.0;
  for (const auto& iv : dims) {
    double h = points_per_dim > 1 ? iv.width() / (points_per_dim - 1) : iv.width();
    sq += 0.25 * h * h;
  }
  return std::sqrt(sq);
}

bool Region::contains(std::span<const double> x, double tol) const {
  for (const auto& b : boxes) {
    if (b.contains(x, tol)) return true;
  }
  return false;
}

std::vector<double> linspace(const Interval& iv, int n) {
  if (n <= 1 || iv.width() <= 0) return {iv.center()};
  std::vector<double> out(n);
  double step = iv.width() / (n - 1);
  for (int i = 0; i < n; ++i) out[i] = iv.lo + step * i;
  out.back() = iv.hi;
  return out;
}

void for_each_grid_point(const Box& box, int points_per_dim,
                         const std::function<void(std::span<const double>)>& fn,
                         std::size_t max_points) {
  if (box.empty()) {
    fn(std::span<const double>{});
    return;
  }
  std::vector<std::vector<double>> axes;
  std::size_t total = 1;
  for (const auto& iv : box.dims) {
    axes.push_back(linspace(iv, points_per_dim));
    total *= axes.back().size();
    if (total > max_points) {
      throw CapacityError("grid would exceed " + std::to_string(max_points) +
                          " points");
    }
  }
  std::vector<double> point(box.dims.size());
  std::vector<std::size_t> idx(box.dims.size(), 0);
  for (;;) {
    for (std::size_t d = 0; d < idx.size(); ++d) point[d] = axes[d][idx[d]];
    fn(point);
    std::size_t d = idx.size();
    while (d > 0) {
      --d;
      if (++idx[d] < axes[d].size()) break;
      idx[d] = 0;
      if (d == 0) return;
    }
  }
}

int Subsystem::input_dim() const {
  if (finite_inputs()) {
    const auto& set = std::get<std::vector<std::vector<double>>>(external_input);
    return set.empty() ? 0 : static_cast<int>(set.front().size());
  }
  return std::get<Box>(external_input).dim();
}

int Subsystem::brownian_dim() const {
  if (modes.empty() || modes.front().diffusion.empty()) return 0;
  return static_cast<int>(modes.front().diffusion.front().size());
}

static std::vector<std::string> index_names(const std::string& prefix, int n) {
  std::vector<std::string> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

std::vector<std::string> Subsystem::state_vars() const {
  return index_names("x", state_dim);
}
std::vector<std::string> Subsystem::input_vars() const {
  return index_names("u", input_dim());
}
std::vector<std::string> Subsystem::internal_vars() const {
  return index_names("w", internal_dim());
}
std::vector<std::string> Subsystem::all_vars() const {
  auto v = state_vars();
  auto u = input_vars();
  auto w = internal_vars();
  v.insert(v.end(), u.begin(), u.end());
  v.insert(v.end(), w.begin(), w.end());
  return v;
}

Polynomial Subsystem::output_norm_sq() const {
  auto sv = state_vars();
  Polynomial sum(sv);
  for (const auto& name : sv) {
    Polynomial xi = Polynomial::variable(sv, name);
    sum += xi * xi;  // h_ii is the identity map
  }
  for (const auto& [target, h] : outputs) {
    for (const auto& comp : h) {
      Polynomial c = comp.embed(sv);
      sum += c * c;
    }
  }
  return sum;
}

void Subsystem::check_shape() const {
  if (state_dim <= 0) throw InputError(id + ": state dimension must be positive");
  if (state_box.dim() != state_dim) throw InputError(id + ": state box dimension mismatch");
  if (initial_box.dim() != state_dim) throw InputError(id + ": initial box dimension mismatch");
  if (modes.empty()) throw InputError(id + ": needs at least one mode");
  const int m = mode_count();
  if (static_cast<int>(transition_rates.size()) != m) {
    throw InputError(id + ": transition rate matrix must be " + std::to_string(m) + "x" + std::to_string(m));
  }
  for (const auto& row : transition_rates) {
    if (static_cast<int>(row.size()) != m) {
      throw InputError(id + ": transition rate matrix is not square");
    }
  }
  const int b = brownian_dim();
  const int r = poisson_dim();
  for (const auto& mode : modes) {
    if (static_cast<int>(mode.drift.size()) != state_dim) {
      throw InputError(id + ": drift length must equal the state dimension");
    }
    if (static_cast<int>(mode.diffusion.size()) != state_dim) {
      throw InputError(id + ": diffusion must have one row per state");
    }
    for (const auto& row : mode.diffusion) {
      if (static_cast<int>(row.size()) != b) {
        throw InputError(id + ": diffusion rows must share a column count");
      }
    }
    if (static_cast<int>(mode.reset.size()) != state_dim) {
      throw InputError(id + ": reset must have one row per state");
    }
    for (const auto& row : mode.reset) {
      if (static_cast<int>(row.size()) != r) {
        throw InputError(id + ": reset columns must match the Poisson count");
      }
    }
    if (mode.controller &&
        static_cast<int>(mode.controller->size()) != input_dim()) {
      throw InputError(id + ": controller output dimension mismatch");
    }
  }
  for (double rate : poisson_rates) {
    if (rate < 0) throw InputError(id + ": Poisson rates must be nonnegative");
  }
}

int Network::index_of(const std::string& id) const {
  for (int i = 0; i < size(); ++i) {
    if (subsystems[i].id == id) return i;
  }
  throw InputError("unknown subsystem id '" + id + "'");
}

std::vector<int> Network::incoming(int j) const {
  std::vector<int> sources;
  for (int i = 0; i < size(); ++i) {
    if (i == j) continue;
    if (subsystems[i].outputs.count(subsystems[j].id)) sources.push_back(i);
  }
  return sources;
}

std::pair<int, int> Network::internal_slice(int j, int source) const {
  int offset = 0;
  for (int i : incoming(j)) {
    int width = static_cast<int>(
        subsystems[i].outputs.at(subsystems[j].id).size());
    if (i == source) return {offset, width};
    offset += width;
  }
  throw InputError("subsystem '" + subsystems[source].id +
                   "' does not feed '" + subsystems[j].id + "'");
}

std::vector<Violation> validate(const Network& net, const ValidationConfig& cfg) {
  std::vector<Violation> out;
  for (const auto& sub : net.subsystems) {
    try {
      sub.check_shape();
    } catch (const InputError& e) {
      out.push_back({sub.id, e.what()});
      continue;
    }
    if (!sub.state_box.contains_box(sub.initial_box, cfg.containment_tolerance)) {
      out.push_back({sub.id, "initial box is not contained in the state set"});
    }
    for (const auto& ub : sub.unsafe_region.boxes) {
      if (!sub.state_box.contains_box(ub, cfg.containment_tolerance)) {
        out.push_back({sub.id, "an unsafe box is not contained in the state set"});
      }
    }
    // Rate matrix: nonnegative off-diagonals and zero row sums, on a grid.
    const int m = sub.mode_count();
    bool rate_bad = false;
    for_each_grid_point(sub.state_box, cfg.grid_points_per_dim,
                        [&](std::span<const double> x) {
      if (rate_bad) return;
      for (int p = 0; p < m && !rate_bad; ++p) {
        double row_sum = 0.0;
        for (int q = 0; q < m; ++q) {
          double v = sub.transition_rates[p][q].eval(x);
          row_sum += v;
          if (p != q && v < -cfg.rate_tolerance) {
            out.push_back({sub.id, "negative off-diagonal transition rate at a sampled state"});
            rate_bad = true;
            break;
          }
        }
        if (!rate_bad && std::abs(row_sum) > cfg.rate_tolerance) {
          out.push_back({sub.id, "transition rate row sum is nonzero at a sampled state"});
          rate_bad = true;
        }
      }
    });
  }
  // Interconnection constraint: each output range must fit the receiver's
  // internal input slice (Y_ij within W_ji), sampled over the sender's state.
  for (int i = 0; i < net.size(); ++i) {
    const auto& sender = net.subsystems[i];
    for (const auto& [target_id, h] : sender.outputs) {
      int j = net.index_of(target_id);
      if (j == i) {
        out.push_back({sender.id, "self output must stay implicit"});
        continue;
      }
      auto [offset, width] = net.internal_slice(j, i);
      if (width != static_cast<int>(h.size())) {
        out.push_back({sender.id, "output dimension mismatch toward '" + target_id + "'"});
        continue;
      }
      const auto& wbox = net.subsystems[j].internal_input_box;
      bool reported = false;
      for_each_grid_point(sender.state_box, cfg.grid_points_per_dim,
                          [&](std::span<const double> x) {
        if (reported) return;
        for (int k = 0; k < width; ++k) {
          double y = h[k].embed(sender.state_vars()).eval(x);
          if (!wbox.dims[offset + k].contains(y, cfg.containment_tolerance)) {
            std::ostringstream os;
            os << "output toward '" << target_id
               << "' leaves the receiver internal input box (pair " << sender.id
               << "," << target_id << ")";
            out.push_back({sender.id, os.str()});
            reported = true;
            return;
          }
        }
      });
    }
    // The concatenated incoming width must match the declared internal box.
    int expect = 0;
    for (int s : net.incoming(i)) {
      expect += static_cast<int>(
          net.subsystems[s].outputs.at(net.subsystems[i].id).size());
    }
    if (expect != net.subsystems[i].internal_dim()) {
      out.push_back({net.subsystems[i].id,
                     "internal input dimension does not match incoming outputs"});
    }
  }
  return out;
}

std::vector<std::string> global_state_vars(const Network& net) {
  std::vector<std::string> out;
  for (int i = 0; i < net.size(); ++i) {
    for (const auto& v : net.subsystems[i].state_vars()) {
      out.push_back("s" + std::to_string(i) + "." + v);
    }
  }
  return out;
}

std::vector<int> joint_mode_tuple(const Network& net, int index) {
  std::vector<int> tuple(net.size(), 0);
  for (int i = net.size() - 1; i >= 0; --i) {
    int m = net.subsystems[i].mode_count();
    tuple[i] = index % m;
    index /= m;
  }
  return tuple;
}

int joint_mode_index(const Network& net, std::span<const int> tuple) {
  int index = 0;
  for (int i = 0; i < net.size(); ++i) {
    index = index * net.subsystems[i].mode_count() + tuple[i];
  }
  return index;
}

std::vector<std::vector<Polynomial>> build_interconnection_generator_matrix(
    const Network& net, int max_joint_modes) {
  long long joint = 1;
  for (const auto& sub : net.subsystems) {
    joint *= sub.mode_count();
    if (joint > max_joint_modes) {
      throw CapacityError("joint mode count exceeds the cap of " +
                          std::to_string(max_joint_modes));
    }
  }
  const int M = static_cast<int>(joint);
  auto gvars = global_state_vars(net);

  // Rates of subsystem i over the global variable space.
  std::vector<std::vector<std::vector<Polynomial>>> rates(net.size());
  for (int i = 0; i < net.size(); ++i) {
    const auto& sub = net.subsystems[i];
    auto local = sub.state_vars();
    rates[i].resize(sub.mode_count());
    for (int p = 0; p < sub.mode_count(); ++p) {
      for (int q = 0; q < sub.mode_count(); ++q) {
        Polynomial r = sub.transition_rates[p][q];
        std::map<std::string, Polynomial> renames;
        for (const auto& v : local) {
          renames.emplace(v, Polynomial::variable(
                                 gvars, "s" + std::to_string(i) + "." + v));
        }
        rates[i][p].push_back(r.substitute(renames, gvars));
      }
    }
  }

  std::vector<std::vector<Polynomial>> Q(
      M, std::vector<Polynomial>(M, Polynomial(gvars)));
  for (int a = 0; a < M; ++a) {
    auto pa = joint_mode_tuple(net, a);
    Polynomial diag(gvars);
    for (int b = 0; b < M; ++b) {
      if (a == b) continue;
      auto pb = joint_mode_tuple(net, b);
      int differing = -1;
      int count = 0;
      for (int i = 0; i < net.size(); ++i) {
        if (pa[i] != pb[i]) {
          differing = i;
          ++count;
        }
      }
      if (count == 1) {
        Q[a][b] = rates[differing][pa[differing]][pb[differing]];
        diag -= Q[a][b];
      }
    }
    Q[a][a] = diag;  // rows sum to zero by construction
  }
  return Q;
}

}  // namespace shs
