#pragma once

// Sampling-based checks of reachability bounds and Lipschitz-type flow
// estimates.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "brslab/compfun.hpp"
#include "brslab/integrate.hpp"
#include "brslab/rng.hpp"
#include "brslab/signal.hpp"
#include "brslab/system.hpp"
#include "brslab/tdinput.hpp"

namespace brslab {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------- reach sets

struct ReachSample {
  double t = 0.0;
  double norm_x = 0.0;
  double norm_u = 0.0;  // sup of ||u|| over [0, t]
  double norm_phi = 0.0;  // +inf past the blow-up time
};

struct ReachConfig {
  IntegratorConfig integrator;
  int time_points = 20;
  int max_switches = 4;
  int workers = 1;
};

// Random piecewise-constant input with values in the open ball of radius r.
inline InputSignal random_input(Rng& rng, int dim, double radius, double horizon, int max_switches) {
  const int k = rng.uniform_int(0, max_switches);
  std::vector<double> bps;
  for (int i = 0; i < k; ++i) bps.push_back(rng.uniform(0.0, horizon));
  std::sort(bps.begin(), bps.end());
  bps.erase(std::remove_if(bps.begin(), bps.end(), [](double t) { return !(t > 0.0); }), bps.end());
  bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
  std::vector<Vec> vals;
  for (std::size_t i = 0; i <= bps.size(); ++i) vals.push_back(rng.in_ball(dim, radius));
  return InputSignal(std::move(bps), std::move(vals));
}

// Sample 0 starts at x = 0 with u = 0; the others draw x uniformly in the
// C-ball and a random input with sup-norm < C. Each trajectory contributes
// time_points + 1 rows on a uniform grid of [0, tau].
inline std::vector<ReachSample> sample_reach(const SystemDef& sys, double C, double tau, std::size_t n,
                                             std::uint64_t seed, const ReachConfig& cfg = {}) {
  if (!(C > 0.0) || !(tau > 0.0)) throw std::invalid_argument("sample_reach: need C > 0 and tau > 0");
  const auto m = static_cast<std::size_t>(cfg.time_points);
  std::vector<double> grid;
  for (std::size_t k = 0; k <= m; ++k) grid.push_back(tau * static_cast<double>(k) / static_cast<double>(m));
  std::vector<ReachSample> out(n * (m + 1));
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    Rng rng(split_seed(seed, i, 1));
    Vec x0 = Vec::Zero(sys.state_dim());
    InputSignal u = InputSignal::zero(sys.input_dim());
    if (i > 0) {
      x0 = rng.in_ball(sys.state_dim(), C);
      u = random_input(rng, sys.input_dim(), C, tau, cfg.max_switches);
    }
    IntegratorConfig ic = cfg.integrator;
    ic.dense_output_grid = grid;
    const Trajectory tr = integrate(sys, x0, u, tau, ic);
    for (std::size_t k = 0; k <= m; ++k) {
      ReachSample& s = out[i * (m + 1) + k];
      s.t = grid[k];
      s.norm_x = x0.norm();
      s.norm_u = k == 0 ? u.values().front().norm() : u.sup_norm(grid[k]);
      s.norm_phi = (tr.blew_up && grid[k] >= tr.t_max) || k >= tr.size() ? kInf : tr.states[k].norm();
    }
  });
  return out;
}

class NotBrsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ReachBoundFit {
  ScalarFun chi1 = ScalarFun::identity();
  ScalarFun chi2 = ScalarFun::identity();
  ScalarFun chi3 = ScalarFun::identity();
  double c = 0.0;
  double residual = 0.0;

  [[nodiscard]] double bound(double t, double nx, double nu) const { return chi1(t) + chi2(nx) + chi3(nu) + c; }
};

struct FitConfig {
  int bins = 24;
  double inflation = 0.05;
  // Added slope that makes every chi strictly increasing.
  double strict_slope = 1e-6;
  // Fraction of each coordinate range treated as "near the origin".
  double origin_fraction = 0.02;
};

namespace detail {

// Monotone upper envelope of (coord, residual) pairs on bins of [0, max
// coord]: prefix maxima of binned maxima, a knot at each bin's left edge and
// one at the first positive coordinate. Residual mass at coord = 0 is left
// for the constant term.
inline ScalarFun monotone_envelope(const std::vector<double>& coord, const std::vector<double>& resid, int bins,
                                   double strict_slope) {
  double smax = 0.0, smin_pos = kInf;
  for (double s : coord) {
    smax = std::max(smax, s);
    if (s > 0.0) smin_pos = std::min(smin_pos, s);
  }
  if (!(smax > 0.0)) return ScalarFun::linear(strict_slope).with_tags({FunClass::Kinf});
  const double w = smax / bins;
  std::vector<double> bmax(static_cast<std::size_t>(bins), 0.0);
  for (std::size_t i = 0; i < coord.size(); ++i) {
    if (!(coord[i] > 0.0)) continue;
    auto b = static_cast<std::size_t>(std::min<double>(bins - 1, std::floor(coord[i] / w)));
    bmax[b] = std::max(bmax[b], resid[i]);
  }
  for (std::size_t b = 1; b < bmax.size(); ++b) bmax[b] = std::max(bmax[b], bmax[b - 1]);

  std::vector<double> k{0.0}, v{0.0};
  auto push = [&](double s, double val) {
    if (s <= k.back()) {
      v.back() = std::max(v.back(), val);
      return;
    }
    k.push_back(s);
    v.push_back(std::max(val + strict_slope * s, v.back() + strict_slope * (s - k.back())));
  };
  push(std::min(smin_pos, w), bmax[0]);
  for (int b = 1; b < bins; ++b) push(b * w, bmax[static_cast<std::size_t>(b)]);
  push(smax, bmax.back());
  double slope = strict_slope;
  if (k.size() >= 2) slope = std::max(strict_slope, (v.back() - v[v.size() - 2]) / (k.back() - k[k.size() - 2]));
  return ScalarFun(std::move(k), std::move(v), slope, {FunClass::Kinf});
}

}  // namespace detail

// Additive bound phi <= chi1(t) + chi2(|x|) + chi3(|u|) + c by backfitting
// monotone envelopes: c near the origin, chi2 at t ~ 0, then chi1, then chi3.
inline ReachBoundFit fit_additive_bound(const std::vector<ReachSample>& samples, const FitConfig& cfg = {}) {
  if (samples.empty()) throw std::invalid_argument("fit_additive_bound: empty sample set");
  double tmax = 0.0, xmax = 0.0, umax = 0.0;
  for (const auto& s : samples) {
    if (!std::isfinite(s.norm_phi)) {
      std::ostringstream msg;
      msg << "not BRS on sampled box: unbounded state at t = " << s.t << ", |x| = " << s.norm_x
          << ", |u| = " << s.norm_u;
      throw NotBrsError(msg.str());
    }
    tmax = std::max(tmax, s.t);
    xmax = std::max(xmax, s.norm_x);
    umax = std::max(umax, s.norm_u);
  }
  const double ft = cfg.origin_fraction * tmax, fx = cfg.origin_fraction * xmax, fu = cfg.origin_fraction * umax;

  ReachBoundFit fit;
  fit.c = 0.0;
  for (const auto& s : samples)
    if (s.t <= ft && s.norm_x <= fx && s.norm_u <= fu) fit.c = std::max(fit.c, s.norm_phi);

  const std::size_t n = samples.size();
  std::vector<double> r(n), coord(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = samples[i].norm_phi - fit.c;

  // chi2 from the earliest time slice
  double t_first = kInf;
  for (const auto& s : samples) t_first = std::min(t_first, s.t);
  std::vector<double> cx, rx;
  for (std::size_t i = 0; i < n; ++i) {
    if (samples[i].t <= t_first + ft) {
      cx.push_back(samples[i].norm_x);
      rx.push_back(r[i]);
    }
  }
  fit.chi2 = detail::monotone_envelope(cx, rx, cfg.bins, cfg.strict_slope);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] -= fit.chi2(samples[i].norm_x);
    coord[i] = samples[i].t;
  }
  fit.chi1 = detail::monotone_envelope(coord, r, cfg.bins, cfg.strict_slope);
  for (std::size_t i = 0; i < n; ++i) {
    r[i] -= fit.chi1(samples[i].t);
    coord[i] = samples[i].norm_u;
  }
  fit.chi3 = detail::monotone_envelope(coord, r, cfg.bins, cfg.strict_slope);
  double leftover = 0.0;
  for (std::size_t i = 0; i < n; ++i) leftover = std::max(leftover, r[i] - fit.chi3(samples[i].norm_u));
  fit.c += leftover;

  const double a = 1.0 + cfg.inflation;
  fit.chi1 = fit.chi1.scaled(a);
  fit.chi2 = fit.chi2.scaled(a);
  fit.chi3 = fit.chi3.scaled(a);
  fit.c *= a;
  fit.residual = -kInf;
  for (const auto& s : samples)
    fit.residual = std::max(fit.residual, s.norm_phi - fit.bound(s.t, s.norm_x, s.norm_u));
  if (fit.residual > 0.0) throw std::logic_error("fit_additive_bound: fit does not dominate its samples");
  return fit;
}

struct GeneralizationReport {
  std::size_t points = 0;
  std::size_t violations = 0;
  double violation_fraction = 0.0;
  // max (phi - bound) / bound over violating points
  double max_relative_violation = 0.0;
};

inline GeneralizationReport evaluate_fit(const ReachBoundFit& fit, const std::vector<ReachSample>& samples) {
  GeneralizationReport rep;
  rep.points = samples.size();
  for (const auto& s : samples) {
    const double b = fit.bound(s.t, s.norm_x, s.norm_u);
    if (s.norm_phi > b) {
      ++rep.violations;
      rep.max_relative_violation = std::max(rep.max_relative_violation, (s.norm_phi - b) / std::max(b, 1e-300));
    }
  }
  rep.violation_fraction = rep.points ? static_cast<double>(rep.violations) / static_cast<double>(rep.points) : 0.0;
  return rep;
}

// ---------------------------------------------------- RFC on dominated inputs

struct RfcReport {
  double c = 0.0;
  double max_violation = -kInf;  // max of ||phi|| - kappa^{-1}(t + ||x|| + c)
  double worst_t = 0.0;
  double worst_norm_x = 0.0;
  std::size_t points = 0;
  bool holds = false;
  bool kappa_lip1 = false;
};

inline RfcReport verify_rfc_tdi(const SystemDef& sys, const GrowthMargin& eta, const ScalarFun& kappa, double c,
                                double C, double tau, std::size_t n, std::uint64_t seed, const TdiConfig& cfg = {}) {
  if (!kappa.is(FunClass::Kinf)) throw std::invalid_argument("verify_rfc_tdi: kappa must be K-infinity");
  const ScalarFun kinv = inverse(kappa);
  RfcReport rep;
  rep.c = c;
  rep.kappa_lip1 = kappa.is(FunClass::Lip1) && kappa.max_slope() <= 1.0 + kSlopeTol;
  std::vector<RfcReport> parts(n);
  parallel_for(n, cfg.workers, [&](std::size_t i) {
    Rng rng(split_seed(seed, i, 2));
    const Vec x0 = i == 0 ? Vec::Zero(sys.state_dim()) : rng.in_ball(sys.state_dim(), C);
    const auto d = sample_disturbance(sys.input_dim(), tau, i, seed);
    const auto lift = lift_disturbance(sys, eta, x0, d, tau, cfg);
    RfcReport& p = parts[i];
    for (std::size_t k = 0; k < lift.traj.size(); ++k) {
      const double t = lift.traj.times[k];
      const double v = lift.traj.states[k].norm() - kinv(t + x0.norm() + c);
      ++p.points;
      if (v > p.max_violation) {
        p.max_violation = v;
        p.worst_t = t;
        p.worst_norm_x = x0.norm();
      }
    }
  });
  for (const auto& p : parts) {
    rep.points += p.points;
    if (p.max_violation > rep.max_violation) {
      rep.max_violation = p.max_violation;
      rep.worst_t = p.worst_t;
      rep.worst_norm_x = p.worst_norm_x;
    }
  }
  rep.holds = rep.max_violation <= 0.0;
  return rep;
}

// Smallest offset from the list for which the bound holds on the samples.
inline std::optional<double> sweep_rfc_offset(const SystemDef& sys, const GrowthMargin& eta, const ScalarFun& kappa,
                                              double C, double tau, std::size_t n, std::uint64_t seed,
                                              const TdiConfig& cfg = {},
                                              const std::vector<double>& offsets = {0.0, 1.0, 2.0, 4.0, 8.0}) {
  for (double c : offsets)
    if (verify_rfc_tdi(sys, eta, kappa, c, C, tau, n, seed, cfg).holds) return c;
  return std::nullopt;
}

// ----------------------------------------------------------- Lipschitz probes

struct LipschitzProbeReport {
  double tau = 0.0;
  double C = 0.0;
  std::size_t pair_count = 0;
  double max_ratio = 0.0;
  double L_estimate = 0.0;
  bool diverged = false;
  double ratio_cap = 1e6;
  std::size_t worst_pair = 0;
  double worst_dx = 0.0;
};

struct ProbeConfig {
  TdiConfig tdi;
  double ratio_cap = 1e6;
  int time_points = 50;
  // Used for every open-loop pair when set; otherwise a random input per pair.
  std::optional<InputSignal> fixed_input;
  // Random disturbances per pair in addition to d = 0 and the constant extremes.
  int random_disturbances = 1;
};

inline std::vector<double> probe_grid(double tau, int points) {
  std::vector<double> g;
  for (int k = 0; k <= points; ++k) g.push_back(tau * k / points);
  return g;
}

inline double trajectory_ratio(const Trajectory& a, const Trajectory& b, double dx) {
  double r = 0.0;
  const std::size_t m = std::min(a.size(), b.size());
  for (std::size_t k = 0; k < m; ++k) r = std::max(r, (a.states[k] - b.states[k]).norm() / dx);
  return r;
}

inline Trajectory checked_run(const SystemDef& sys, const Vec& x0, const InputSignal& u, double tau,
                              const IntegratorConfig& ic, const char* who) {
  Trajectory tr = integrate(sys, x0, u, tau, ic);
  if (tr.blew_up) {
    std::ostringstream msg;
    msg << who << ": blow-up at t = " << tr.t_max;
    throw BlowUpError(msg.str(), tr.t_max);
  }
  return tr;
}

// sup_t ||phi(t, x1, u) - phi(t, x2, u)|| / ||x1 - x2||
inline double probe_ratio_openloop(const SystemDef& sys, const Vec& x1, const Vec& x2, const InputSignal& u,
                                   double tau, const ProbeConfig& cfg = {}) {
  const double dx = (x1 - x2).norm();
  if (!(dx > 0.0)) throw std::invalid_argument("probe: pair points must differ");
  IntegratorConfig ic = cfg.tdi.integrator;
  ic.dense_output_grid = probe_grid(tau, cfg.time_points);
  return trajectory_ratio(checked_run(sys, x1, u, tau, ic, "probe_lipschitz_openloop"),
                          checked_run(sys, x2, u, tau, ic, "probe_lipschitz_openloop"), dx);
}

// Same disturbance from both points. By the disturbance/input bijection the
// closed-loop trajectories are the open-loop trajectories under the matched
// inputs d eta(||phi||); using them directly keeps lift discretization out of
// the quotient.
inline double probe_ratio_tdi(const SystemDef& sys, const GrowthMargin& eta, const Vec& x1, const Vec& x2,
                              const DisturbanceSignal& d, double tau, const ProbeConfig& cfg = {}) {
  return probe_ratio_openloop(closed_loop(sys, eta), x1, x2, d.signal(), tau, cfg);
}

namespace detail {

// Pairs 0..9: (0, eps e_1) for eps = 1e-3 ... 1e-12. After that alternately
// independent points in the C-ball and close pairs at random distance.
inline std::pair<Vec, Vec> probe_pair(int dim, double C, std::size_t i, std::uint64_t seed) {
  constexpr std::size_t kLadder = 10;
  if (i < kLadder) {
    Vec a = Vec::Zero(dim), b = Vec::Zero(dim);
    b[0] = std::min(C, std::pow(10.0, -3.0 - static_cast<double>(i)));
    return {a, b};
  }
  Rng rng(split_seed(seed, i, 3));
  Vec a = rng.in_ball(dim, C);
  if ((i - kLadder) % 2 == 0) {
    Vec b = rng.in_ball(dim, C);
    while ((b - a).norm() == 0.0) b = rng.in_ball(dim, C);
    return {a, b};
  }
  const double delta = std::pow(10.0, rng.uniform(-6.0, -2.0)) * C;
  Vec b = a + delta * rng.unit_vector(dim);
  if (b.norm() > C) b *= C / b.norm();
  if ((b - a).norm() == 0.0) b = a * 0.5;
  return {a, b};
}

inline void reduce_probe(LipschitzProbeReport& rep, const std::vector<double>& ratios,
                         const std::vector<double>& dxs) {
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    if (ratios[i] > rep.max_ratio) {
      rep.max_ratio = ratios[i];
      rep.worst_pair = i;
      rep.worst_dx = dxs[i];
    }
  }
  rep.diverged = rep.max_ratio > rep.ratio_cap;
  rep.L_estimate = rep.diverged ? kInf : rep.max_ratio;
}

}  // namespace detail

inline LipschitzProbeReport probe_lipschitz_openloop(const SystemDef& sys, double tau, double C, std::size_t pairs,
                                                     std::uint64_t seed, const ProbeConfig& cfg = {}) {
  if (!(tau > 0.0) || !(C > 0.0)) throw std::invalid_argument("probe: need tau > 0 and C > 0");
  LipschitzProbeReport rep;
  rep.tau = tau;
  rep.C = C;
  rep.pair_count = pairs;
  rep.ratio_cap = cfg.ratio_cap;
  std::vector<double> ratios(pairs, 0.0), dxs(pairs, 0.0);
  parallel_for(pairs, cfg.tdi.workers, [&](std::size_t i) {
    const auto [a, b] = detail::probe_pair(sys.state_dim(), C, i, seed);
    InputSignal u = InputSignal::zero(sys.input_dim());
    if (cfg.fixed_input) {
      u = *cfg.fixed_input;
    } else {
      Rng rng(split_seed(seed, i, 4));
      u = random_input(rng, sys.input_dim(), C, tau, 4);
    }
    ratios[i] = probe_ratio_openloop(sys, a, b, u, tau, cfg);
    dxs[i] = (a - b).norm();
  });
  detail::reduce_probe(rep, ratios, dxs);
  return rep;
}

inline LipschitzProbeReport probe_lipschitz_tdi(const SystemDef& sys, const GrowthMargin& eta, double tau, double C,
                                                std::size_t pairs, std::uint64_t seed, const ProbeConfig& cfg = {}) {
  if (!(tau > 0.0) || !(C > 0.0)) throw std::invalid_argument("probe: need tau > 0 and C > 0");
  LipschitzProbeReport rep;
  rep.tau = tau;
  rep.C = C;
  rep.pair_count = pairs;
  rep.ratio_cap = cfg.ratio_cap;
  const auto extremes = static_cast<std::size_t>(2 * sys.input_dim() + 1);
  const auto per_pair = extremes + static_cast<std::size_t>(std::max(0, cfg.random_disturbances));
  const SystemDef cl = closed_loop(sys, eta);
  std::vector<double> ratios(pairs, 0.0), dxs(pairs, 0.0);
  parallel_for(pairs, cfg.tdi.workers, [&](std::size_t i) {
    const auto [a, b] = detail::probe_pair(sys.state_dim(), C, i, seed);
    double r = 0.0;
    for (std::size_t j = 0; j < per_pair; ++j) {
      const std::size_t index = j < extremes ? j : extremes + i * (per_pair - extremes) + (j - extremes);
      const auto d = sample_disturbance(sys.input_dim(), tau, index, seed);
      r = std::max(r, probe_ratio_openloop(cl, a, b, d.signal(), tau, cfg));
    }
    ratios[i] = r;
    dxs[i] = (a - b).norm();
  });
  detail::reduce_probe(rep, ratios, dxs);
  return rep;
}

// M exp((2 M L + lambda) tau)
inline double gronwall_bound(double M, double lambda, double L, double tau) {
  if (!(M >= 1.0) || !(L >= 0.0) || !(tau >= 0.0))
    throw std::invalid_argument("gronwall_bound: need M >= 1, L >= 0, tau >= 0");
  return M * std::exp((2.0 * M * L + lambda) * tau);
}

// Largest value of the Gronwall bound over [0, tau].
inline double gronwall_envelope(double M, double lambda, double L, double tau) {
  return std::max(gronwall_bound(M, lambda, L, 0.0), gronwall_bound(M, lambda, L, tau));
}

// ------------------------------------------------------------ serialization

inline void to_json(nlohmann::json& j, const LipschitzProbeReport& r) {
  j = {{"tau", r.tau},
       {"C", r.C},
       {"pair_count", r.pair_count},
       {"max_ratio", r.max_ratio},
       {"L_estimate", std::isfinite(r.L_estimate) ? nlohmann::json(r.L_estimate) : nlohmann::json("inf")},
       {"diverged", r.diverged},
       {"ratio_cap", r.ratio_cap},
       {"worst_pair", r.worst_pair},
       {"worst_dx", r.worst_dx}};
}

inline void to_json(nlohmann::json& j, const ReachBoundFit& f) {
  j = {{"chi1", f.chi1}, {"chi2", f.chi2}, {"chi3", f.chi3}, {"c", f.c}, {"residual", f.residual}};
}

inline void to_json(nlohmann::json& j, const RfcReport& r) {
  j = {{"c", r.c},
       {"max_violation", r.max_violation},
       {"worst_t", r.worst_t},
       {"worst_norm_x", r.worst_norm_x},
       {"points", r.points},
       {"holds", r.holds},
       {"kappa_lip1", r.kappa_lip1}};
}

}  // namespace brslab
