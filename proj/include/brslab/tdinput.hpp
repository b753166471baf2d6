#pragma once

// Trajectory-dominated inputs: ||u(t)|| <= eta(||phi(t, x, u)||).
//
// Inputs of this kind are generated from disturbances d with ||d|| <= 1 by
// running the closed loop x' = A x + f(x, d eta(||x||)) and reading off
// u(t) = d(t) eta(||phi_CL(t)||). The reverse map divides by eta along the
// open-loop trajectory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "brslab/compfun.hpp"
#include "brslab/integrate.hpp"
#include "brslab/rng.hpp"
#include "brslab/signal.hpp"
#include "brslab/system.hpp"

namespace brslab {

class GrowthMargin {
 public:
  explicit GrowthMargin(ScalarFun eta) : eta_(std::move(eta)) {
    if (!eta_.is(FunClass::Kinf) || !eta_.is(FunClass::Lip1))
      throw std::invalid_argument("GrowthMargin: eta must be tagged Kinf and Lip1");
    if (eta_.max_slope() > 1.0 + kSlopeTol)
      throw std::invalid_argument("GrowthMargin: eta chord slope exceeds 1");
  }

  double operator()(double s) const { return eta_(s); }
  [[nodiscard]] const ScalarFun& fun() const { return eta_; }

 private:
  ScalarFun eta_;
};

class DisturbanceSignal {
 public:
  explicit DisturbanceSignal(InputSignal d) : d_(std::move(d)) {
    for (const auto& v : d_.values())
      if (v.norm() > 1.0 + 1e-12) throw std::invalid_argument("DisturbanceSignal: value norm exceeds 1");
  }

  static DisturbanceSignal zero(int dim) { return DisturbanceSignal(InputSignal::zero(dim)); }

  [[nodiscard]] const InputSignal& signal() const { return d_; }
  const Vec& operator()(double t) const { return d_(t); }
  [[nodiscard]] int dim() const { return d_.dim(); }

 private:
  InputSignal d_;
};

struct MembershipReport {
  bool is_member = false;
  double max_violation = 0.0;
  double worst_time = 0.0;
  std::vector<double> grid;
};

struct TdiConfig {
  IntegratorConfig integrator;
  // Uniform grid points per unit time.
  int grid_density = 1000;
  double tol_membership = 1e-6;
  double eps_div = 1e-9;
  int workers = 1;
};

class DominanceError : public std::runtime_error {
 public:
  DominanceError(const std::string& what, double t) : std::runtime_error(what), time_(t) {}
  [[nodiscard]] double time() const { return time_; }

 private:
  double time_;
};

// x' = A x + f(x, d eta(||x||))
inline SystemDef closed_loop(const SystemDef& sys, const GrowthMargin& eta) {
  const RhsFn f = sys.nonlinearity();
  RhsFn g = [f, eta](const Vec& x, const Vec& d) -> Vec { return f(x, d * eta(x.norm())); };
  return SystemDef(sys.name() + "_closed_loop", sys.state_dim(), sys.input_dim(), std::move(g),
                   sys.linear_part(), sys.lipschitz_hint());
}

// {k / density : k / density < tau} plus extra points in (0, tau), plus tau.
// k / density is formed by one division so grids of density n and 2n nest.
inline std::vector<double> time_grid(double tau, int density, const std::vector<double>& extra = {}) {
  if (!(tau > 0.0) || density < 1) throw std::invalid_argument("time_grid: need tau > 0 and density >= 1");
  std::vector<double> g;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(density);
    if (t >= tau) break;
    g.push_back(t);
  }
  for (double t : extra)
    if (t > 0.0 && t < tau) g.push_back(t);
  g.push_back(tau);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

// Boundary between grid[i] and grid[i+1]: the first jump in (grid[i], grid[i+1]]
// if there is one, else the midpoint.
inline std::vector<double> cell_boundaries(const std::vector<double>& grid, const std::vector<double>& jumps) {
  std::vector<double> b;
  b.reserve(grid.size());
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    auto it = std::upper_bound(jumps.begin(), jumps.end(), grid[i]);
    if (it != jumps.end() && *it <= grid[i + 1])
      b.push_back(*it);
    else
      b.push_back(0.5 * (grid[i] + grid[i + 1]));
  }
  return b;
}

struct LiftResult {
  InputSignal u;
  Trajectory traj;
  std::vector<double> grid;
};

// Closed-loop run from x0 under d, then u(t_i) = d(t_i) eta(||phi_CL(t_i)||)
// held constant on the cell around each grid point t_i.
inline LiftResult lift_disturbance(const SystemDef& sys, const GrowthMargin& eta, const Vec& x0,
                                   const DisturbanceSignal& d, const std::vector<double>& grid,
                                   const TdiConfig& cfg = {}) {
  if (d.dim() != sys.input_dim()) throw std::invalid_argument("lift_disturbance: disturbance dimension mismatch");
  if (grid.size() < 2 || grid.front() != 0.0) throw std::invalid_argument("lift_disturbance: grid must start at 0");
  const double tau = grid.back();
  const SystemDef cl = closed_loop(sys, eta);
  IntegratorConfig ic = cfg.integrator;
  ic.dense_output_grid = grid;
  Trajectory traj = integrate(cl, x0, d.signal(), tau, ic);
  if (traj.blew_up) {
    std::ostringstream msg;
    msg << "lift_disturbance: closed loop blew up at t = " << traj.t_max;
    throw BlowUpError(msg.str(), traj.t_max);
  }
  std::vector<Vec> vals;
  vals.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) vals.push_back(d(traj.times[i]) * eta(traj.states[i].norm()));
  auto bps = cell_boundaries(traj.times, d.signal().breakpoints());
  std::vector<double> used = traj.times;
  return {InputSignal(std::move(bps), std::move(vals)), std::move(traj), std::move(used)};
}

inline LiftResult lift_disturbance(const SystemDef& sys, const GrowthMargin& eta, const Vec& x0,
                                   const DisturbanceSignal& d, double tau, const TdiConfig& cfg = {}) {
  return lift_disturbance(sys, eta, x0, d, time_grid(tau, cfg.grid_density, d.signal().breakpoints()), cfg);
}

inline MembershipReport check_membership(const SystemDef& sys, const GrowthMargin& eta, const Vec& x0,
                                         const InputSignal& u, double tau, std::vector<double> grid = {},
                                         const TdiConfig& cfg = {}) {
  if (grid.empty()) grid = time_grid(tau, cfg.grid_density);
  IntegratorConfig ic = cfg.integrator;
  ic.dense_output_grid = grid;
  const Trajectory traj = integrate(sys, x0, u, tau, ic);
  if (traj.blew_up) {
    std::ostringstream msg;
    msg << "check_membership: open loop blew up at t = " << traj.t_max;
    throw BlowUpError(msg.str(), traj.t_max);
  }
  MembershipReport rep;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double v = u(traj.times[i]).norm() - eta(traj.states[i].norm());
    if (v > rep.max_violation) {
      rep.max_violation = v;
      rep.worst_time = traj.times[i];
    }
  }
  rep.is_member = rep.max_violation <= cfg.tol_membership;
  rep.grid = traj.times;
  return rep;
}

// d(t_i) = u(t_i) / eta(||phi(t_i, x0, u)||) on the cells around t_i.
inline DisturbanceSignal project_input(const SystemDef& sys, const GrowthMargin& eta, const Vec& x0,
                                       const InputSignal& u, std::vector<double> grid,
                                       const TdiConfig& cfg = {}) {
  if (grid.size() < 2 || grid.front() != 0.0) throw std::invalid_argument("project_input: grid must start at 0");
  const double tau = grid.back();
  IntegratorConfig ic = cfg.integrator;
  ic.dense_output_grid = grid;
  const Trajectory traj = integrate(sys, x0, u, tau, ic);
  if (traj.blew_up) {
    std::ostringstream msg;
    msg << "project_input: open loop blew up at t = " << traj.t_max;
    throw BlowUpError(msg.str(), traj.t_max);
  }
  std::vector<Vec> vals;
  vals.reserve(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const double t = traj.times[i];
    const Vec& ui = u(t);
    const double e = eta(traj.states[i].norm());
    if (e <= cfg.eps_div) {
      if (ui.norm() > cfg.tol_membership) {
        std::ostringstream msg;
        msg << "project_input: input not dominated where eta vanishes, t = " << t << ", |u| = " << ui.norm();
        throw DominanceError(msg.str(), t);
      }
      vals.push_back(Vec::Zero(ui.size()));
      continue;
    }
    if (ui.norm() - e > cfg.tol_membership) {
      std::ostringstream msg;
      msg << "project_input: input not trajectory-dominated at t = " << t << " (|u| - eta = " << ui.norm() - e
          << ")";
      throw DominanceError(msg.str(), t);
    }
    Vec di = ui / e;
    const double n = di.norm();
    if (n > 1.0) di /= n;
    vals.push_back(std::move(di));
  }
  auto bps = cell_boundaries(traj.times, u.breakpoints());
  return DisturbanceSignal(InputSignal(std::move(bps), std::move(vals)));
}

inline DisturbanceSignal project_input(const SystemDef& sys, const GrowthMargin& eta, const Vec& x0,
                                       const InputSignal& u, double tau, const TdiConfig& cfg = {}) {
  return project_input(sys, eta, x0, u, time_grid(tau, cfg.grid_density, u.breakpoints()), cfg);
}

// Index 0 is d = 0, then +e_j and -e_j, then random switching signals with
// values on the unit sphere. Sample i depends only on (seed, i).
inline DisturbanceSignal sample_disturbance(int dim, double horizon, std::size_t index, std::uint64_t seed) {
  const auto extremes = static_cast<std::size_t>(2 * dim);
  if (index == 0) return DisturbanceSignal::zero(dim);
  if (index <= extremes) {
    const auto j = static_cast<int>((index - 1) / 2);
    Vec v = Vec::Zero(dim);
    v[j] = (index - 1) % 2 == 0 ? 1.0 : -1.0;
    return DisturbanceSignal(InputSignal::constant(v));
  }
  Rng rng(split_seed(seed, index));
  const int switches = rng.uniform_int(1, 8);
  std::vector<double> bps;
  for (int k = 0; k < switches; ++k) bps.push_back(rng.uniform(0.0, horizon));
  std::sort(bps.begin(), bps.end());
  bps.erase(std::remove_if(bps.begin(), bps.end(), [](double t) { return !(t > 0.0); }), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
  std::vector<Vec> vals;
  for (std::size_t k = 0; k <= bps.size(); ++k) vals.push_back(rng.unit_vector(dim));
  return DisturbanceSignal(InputSignal(std::move(bps), std::move(vals)));
}

inline std::vector<DisturbanceSignal> sample_disturbances(int dim, double horizon, std::size_t n,
                                                          std::uint64_t seed) {
  std::vector<DisturbanceSignal> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(sample_disturbance(dim, horizon, i, seed));
  return out;
}

struct TdiSample {
  DisturbanceSignal d;
  LiftResult lift;
};

inline std::vector<TdiSample> sample_tdi(const SystemDef& sys, const GrowthMargin& eta, const Vec& x0, double tau,
                                         std::size_t n, std::uint64_t seed, const TdiConfig& cfg = {}) {
  if (n < 1) throw std::invalid_argument("sample_tdi: n must be >= 1");
  const auto ds = sample_disturbances(sys.input_dim(), tau, n, seed);
  std::vector<std::optional<TdiSample>> slots(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    slots[i] = TdiSample{ds[i], lift_disturbance(sys, eta, x0, ds[i], tau, cfg)};
  });
  std::vector<TdiSample> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace brslab
