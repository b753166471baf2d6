#pragma once

// Converse construction of a BRS Lyapunov function from trajectory-dominated
// inputs:
//
//   U_q(x) = sup_{v, s in [0, Theta(R, q)]} G_q(e^{-s} eta(||phi(s, x, v)||))
//   V(x)   = 1 + sum_q 2^{-q} U_q(x) / (1 + M(q, q))
//   W(x)   = ln(1 + V(x))
//
// The sup over inputs is replaced by a max over lifted disturbances and grid
// times, so every computed U_q and V is a lower bound of the exact value.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brslab/brscheck.hpp"
#include "brslab/compfun.hpp"
#include "brslab/integrate.hpp"
#include "brslab/rng.hpp"
#include "brslab/system.hpp"
#include "brslab/tdinput.hpp"

namespace brslab {

struct LyapunovConfig {
  int Q = 13;
  std::size_t n_dist = 16;
  int time_grid_density = 50;
  std::uint64_t seed = 1;
  double tail_tol = 1e-3;
  std::vector<double> dini_h_ladder{1e-2, 1e-3, 1e-4};
  double tol_growth = 0.1;
  double abs_slack = 0.05;
  // RFC offset c shared by Theta, the tail bound and the sandwich constant.
  double c = 0.0;
  IntegratorConfig integrator;
  int workers = 1;

  void validate() const {
    if (Q < 1) throw std::invalid_argument("LyapunovConfig: Q must be >= 1");
    if (n_dist < 1) throw std::invalid_argument("LyapunovConfig: n_dist must be >= 1");
    if (time_grid_density < 1) throw std::invalid_argument("LyapunovConfig: time_grid_density must be >= 1");
    if (!(tail_tol > 0.0)) throw std::invalid_argument("LyapunovConfig: tail_tol must be positive");
    if (!(c >= 0.0)) throw std::invalid_argument("LyapunovConfig: c must be >= 0");
    if (dini_h_ladder.empty()) throw std::invalid_argument("LyapunovConfig: empty Dini ladder");
    for (std::size_t i = 0; i < dini_h_ladder.size(); ++i) {
      if (!(dini_h_ladder[i] > 0.0)) throw std::invalid_argument("LyapunovConfig: Dini steps must be positive");
      if (i > 0 && !(dini_h_ladder[i] < dini_h_ladder[i - 1]))
        throw std::invalid_argument("LyapunovConfig: Dini ladder must be strictly decreasing");
    }
  }
};

class NotRfcTdiError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TailBudgetError : public std::runtime_error {
 public:
  TailBudgetError(const std::string& what, int min_q) : std::runtime_error(what), min_q_(min_q) {}
  [[nodiscard]] int min_admissible_Q() const { return min_q_; }

 private:
  int min_q_;
};

class MissingTableEntry : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ------------------------------------------------------------ L(tau, C) table

class LipschitzTable {
 public:
  struct Entry {
    double tau, C, L;
  };

  void set(double tau, double C, double L) {
    for (auto& e : entries_) {
      if (close(e.tau, tau) && close(e.C, C)) {
        e.L = L;
        return;
      }
    }
    entries_.push_back({tau, C, L});
  }

  [[nodiscard]] double lookup(double tau, double C) const {
    for (const auto& e : entries_)
      if (close(e.tau, tau) && close(e.C, C)) return e.L;
    std::ostringstream msg;
    msg << "LipschitzTable: no entry for tau = " << tau << ", C = " << C
        << "; run a TDI Lipschitz probe at these parameters";
    throw MissingTableEntry(msg.str());
  }

  [[nodiscard]] const std::vector<Entry>& entries() const { return entries_; }

 private:
  static bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }
  std::vector<Entry> entries_;
};

// M(R, q) = max{L(Theta(R, q), R), Theta(R, q)}
inline double lyap_M(double R, int q, double c, const LipschitzTable& table) {
  const double th = theta(R, q, c);
  return std::max(table.lookup(th, R), th);
}

// Entries L(Theta(q, q), q) for q = 1..Q from TDI probes, inflated by 10%.
inline LipschitzTable build_l_table(const SystemDef& sys, const GrowthMargin& eta, int Q, double c,
                                    std::size_t pairs, std::uint64_t seed, const ProbeConfig& cfg = {},
                                    double inflation = 0.1) {
  LipschitzTable table;
  for (int q = 1; q <= Q; ++q) {
    const double R = q;
    const double th = theta(R, q, c);
    const auto rep = probe_lipschitz_tdi(sys, eta, th, R, pairs, split_seed(seed, static_cast<std::uint64_t>(q)), cfg);
    if (rep.diverged) {
      std::ostringstream msg;
      msg << "build_l_table: TDI probe diverged at tau = " << th << ", C = " << R;
      throw NotRfcTdiError(msg.str());
    }
    table.set(th, R, (1.0 + inflation) * rep.L_estimate);
  }
  return table;
}

inline std::vector<double> m_table(const LipschitzTable& table, int Q, double c) {
  std::vector<double> m;
  for (int q = 1; q <= Q; ++q) m.push_back(lyap_M(q, q, c, table));
  return m;
}

// ----------------------------------------------------------------------- U_q

struct UqEstimate {
  int q = 0;
  double R = 0.0;
  double theta_Rq = 0.0;
  double value = 0.0;
  std::size_t argmax_disturbance = 0;
  double argmax_time = 0.0;
};

// All U_1..U_Qmax from one closed-loop run per disturbance on [0, Theta(R, Qmax)).
// Disturbance i depends only on (seed, i) and the time grid is k / density
// plus disturbance jumps, without the horizon itself, so raising n_dist or
// doubling the density only adds candidates to every max.
inline std::vector<UqEstimate> estimate_U_all(const SystemDef& sys, const GrowthMargin& eta, const Vec& x, double R,
                                              const LyapunovConfig& cfg, int Qmax = 0) {
  cfg.validate();
  if (Qmax < 1) Qmax = cfg.Q;
  if (!(R >= x.norm())) throw std::invalid_argument("estimate_U: R must be >= ||x||");
  std::vector<UqEstimate> out(static_cast<std::size_t>(Qmax));
  std::vector<double> th(static_cast<std::size_t>(Qmax));
  for (int q = 1; q <= Qmax; ++q) {
    th[q - 1] = theta(R, q, cfg.c);
    out[q - 1].q = q;
    out[q - 1].R = R;
    out[q - 1].theta_Rq = th[q - 1];
  }
  const double horizon = th.back();
  const SystemDef cl = closed_loop(sys, eta);

  struct Best {
    std::vector<double> value;
    std::vector<double> time;
  };
  std::vector<Best> per(cfg.n_dist);
  parallel_for(cfg.n_dist, cfg.workers, [&](std::size_t i) {
    const auto d = sample_disturbance(sys.input_dim(), horizon, i, cfg.seed);
    IntegratorConfig ic = cfg.integrator;
    ic.dense_output_grid = time_grid(horizon, cfg.time_grid_density, d.signal().breakpoints());
    const Trajectory tr = integrate(cl, x, d.signal(), horizon, ic);
    if (tr.blew_up) {
      std::ostringstream msg;
      msg << "not RFC-TDI on this ball: closed loop blew up at t = " << tr.t_max << " before Theta = " << horizon;
      throw NotRfcTdiError(msg.str());
    }
    Best b{std::vector<double>(static_cast<std::size_t>(Qmax), 0.0),
           std::vector<double>(static_cast<std::size_t>(Qmax), 0.0)};
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const double s = tr.times[k];
      if (s >= horizon) continue;
      const double z = std::exp(-s) * eta(tr.states[k].norm());
      for (int q = 1; q <= Qmax; ++q) {
        if (s > th[q - 1]) continue;
        const double g = gk_eval(q, z);
        if (g > b.value[q - 1]) {
          b.value[q - 1] = g;
          b.time[q - 1] = s;
        }
      }
    }
    per[i] = std::move(b);
  });
  for (std::size_t i = 0; i < per.size(); ++i) {
    for (int q = 0; q < Qmax; ++q) {
      if (per[i].value[q] > out[q].value) {
        out[q].value = per[i].value[q];
        out[q].argmax_disturbance = i;
        out[q].argmax_time = per[i].time[q];
      }
    }
  }
  return out;
}

inline UqEstimate estimate_Uq(const SystemDef& sys, const GrowthMargin& eta, const Vec& x, int q, double R,
                              const LyapunovConfig& cfg) {
  if (q < 1) throw std::invalid_argument("estimate_Uq: q must be >= 1");
  return estimate_U_all(sys, eta, x, R, cfg, std::max(q, cfg.Q))[static_cast<std::size_t>(q - 1)];
}

// ------------------------------------------------------------------------- V

inline double tail_bound(int Q, double norm_x, double c) { return std::ldexp(1.0 + norm_x + c, 1 - Q); }

inline int min_admissible_Q(double norm_x, double c, double tail_tol) {
  int Q = 1;
  while (tail_bound(Q, norm_x, c) > tail_tol) ++Q;
  return Q;
}

struct LyapunovValue {
  double V = 1.0;
  double W = std::log(2.0);
  double tail_bound = 0.0;
  std::vector<UqEstimate> per_q;
  std::vector<double> M_table;
  bool lower_bound_certificate = true;
};

inline LyapunovValue eval_V_with(const SystemDef& sys, const GrowthMargin& eta, const Vec& x, double R,
                                 const LyapunovConfig& cfg, const std::vector<double>& M) {
  cfg.validate();
  if (M.size() < static_cast<std::size_t>(cfg.Q)) throw std::invalid_argument("eval_V: M table shorter than Q");
  LyapunovValue out;
  out.tail_bound = tail_bound(cfg.Q, x.norm(), cfg.c);
  if (out.tail_bound > cfg.tail_tol) {
    const int need = min_admissible_Q(x.norm(), cfg.c, cfg.tail_tol);
    std::ostringstream msg;
    msg << "eval_V: tail bound " << out.tail_bound << " exceeds budget " << cfg.tail_tol << "; need Q >= " << need;
    throw TailBudgetError(msg.str(), need);
  }
  out.per_q = estimate_U_all(sys, eta, x, R, cfg);
  out.M_table.assign(M.begin(), M.begin() + cfg.Q);
  double sum = 0.0;
  for (int q = 1; q <= cfg.Q; ++q) sum += std::ldexp(out.per_q[q - 1].value, -q) / (1.0 + M[q - 1]);
  out.V = 1.0 + sum;
  out.W = std::log1p(out.V);
  return out;
}

inline LyapunovValue eval_V(const SystemDef& sys, const GrowthMargin& eta, const Vec& x, const LyapunovConfig& cfg,
                            const LipschitzTable& table) {
  return eval_V_with(sys, eta, x, std::max(x.norm(), 1.0), cfg, m_table(table, cfg.Q, cfg.c));
}

// ------------------------------------------------------------ sandwich bounds

struct SandwichFuns {
  ScalarFun alpha1;
  ScalarFun alpha2;
  double C = 2.0;
};

// alpha1 is exact on the eta knots plus the points eta(s) = 1/q. It vanishes
// near 0 because of the truncation, so it carries no class tag.
inline SandwichFuns sandwich_funs(const GrowthMargin& eta, const std::vector<double>& M, double c, int Q,
                                  double s_max = 0.0) {
  if (Q < 1 || M.size() < static_cast<std::size_t>(Q)) throw std::invalid_argument("sandwich_funs: M table too short");
  const ScalarFun& e = eta.fun();
  const ScalarFun einv = inverse(e);
  std::vector<double> k1 = e.knots();
  for (int q = 1; q <= Q; ++q) k1.push_back(einv(1.0 / q));
  std::sort(k1.begin(), k1.end());
  k1.erase(std::unique(k1.begin(), k1.end()), k1.end());
  auto a1 = [&](double s) {
    double acc = 0.0;
    const double z = e(s);
    for (int q = 1; q <= Q; ++q) acc += std::ldexp(gk_eval(q, z), -q) / (1.0 + M[q - 1]);
    return acc;
  };
  std::vector<double> v1;
  v1.reserve(k1.size());
  for (double s : k1) v1.push_back(a1(s));
  for (std::size_t i = 1; i < v1.size(); ++i) v1[i] = std::max(v1[i], v1[i - 1]);
  double slope1 = 0.0;
  for (int q = 1; q <= Q; ++q) slope1 += std::ldexp(e.slope(), -q) / (1.0 + M[q - 1]);
  ScalarFun alpha1(std::move(k1), std::move(v1), slope1);

  // h(s) = s + sum_{q <= min(floor(s), Q)} 2^{-q} Theta(s, q) / (1 + M(q, q))
  auto h = [&](double s) {
    double acc = s;
    const int top = std::min(Q, static_cast<int>(std::floor(s)));
    for (int q = 1; q <= top; ++q) acc += std::ldexp(theta(s, q, c), -q) / (1.0 + M[q - 1]);
    return acc;
  };
  // Staircase majorant: alpha2(a_i) = h(a_{i+1}) on [1, s_max], linear from
  // the origin to a_1 = 1. Past the last knot Theta(., q) grows with slope
  // <= 1 and each weight is < 2^{-q}, so slope 2 dominates.
  const double top = std::max({s_max, static_cast<double>(Q) + 2.0, 4.0});
  const double step = 0.25;
  std::vector<double> k2{0.0};
  for (double a = 1.0; a <= top + 1e-12; a += step) k2.push_back(a);
  std::vector<double> v2{0.0};
  for (std::size_t i = 1; i < k2.size(); ++i) v2.push_back(h(k2[i] + step));
  ScalarFun alpha2(std::move(k2), std::move(v2), 2.0, {FunClass::Kinf});
  return {std::move(alpha1), std::move(alpha2), 2.0 + c};
}

// ------------------------------------------------------------ growth checks

struct GrowthReport {
  bool premise_met = false;
  double chi_u = 0.0;
  double norm_x = 0.0;
  double V = 1.0;
  double W = 0.0;
  std::vector<double> h;
  std::vector<double> quotient_V;
  std::vector<double> quotient_W;
  double dini_V = 0.0;
  double dini_W = 0.0;
  bool pass_V = false;
  bool pass_W = false;

  [[nodiscard]] bool vacuous() const { return !premise_met; }
  [[nodiscard]] bool pass() const { return !premise_met || (pass_V && pass_W); }
};

// Forward difference quotients of V and W along the flow under the constant
// input u_value. All points on the ladder share R, so they see the same
// disturbances and the same time grid.
inline GrowthReport verify_growth(const SystemDef& sys, const GrowthMargin& eta, const Vec& x, const Vec& u_value,
                                  const LyapunovConfig& cfg, const std::vector<double>& M,
                                  const std::optional<ScalarFun>& chi = std::nullopt) {
  cfg.validate();
  const ScalarFun chi_fun = chi ? *chi : chi_from_eta(eta.fun());
  GrowthReport rep;
  rep.norm_x = x.norm();
  rep.chi_u = chi_fun(u_value.norm());
  rep.premise_met = rep.chi_u <= rep.norm_x;
  if (!rep.premise_met) return rep;

  const InputSignal u = InputSignal::constant(u_value);
  IntegratorConfig ic = cfg.integrator;
  ic.dense_output_grid = cfg.dini_h_ladder;
  const double hmax = cfg.dini_h_ladder.front();
  const Trajectory tr = integrate(sys, x, u, hmax, ic);
  if (tr.blew_up) throw BlowUpError("verify_growth: flow blew up inside the Dini ladder", tr.t_max);
  double R = std::max(1.0, rep.norm_x);
  for (const auto& s : tr.states) R = std::max(R, s.norm());

  const auto base = eval_V_with(sys, eta, x, R, cfg, M);
  rep.V = base.V;
  rep.W = base.W;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    const double h = tr.times[k];
    const auto vh = eval_V_with(sys, eta, tr.states[k], R, cfg, M);
    rep.h.push_back(h);
    rep.quotient_V.push_back((vh.V - base.V) / h);
    rep.quotient_W.push_back((vh.W - base.W) / h);
  }
  rep.dini_V = *std::max_element(rep.quotient_V.begin(), rep.quotient_V.end());
  rep.dini_W = *std::max_element(rep.quotient_W.begin(), rep.quotient_W.end());
  rep.pass_V = rep.dini_V <= rep.V * (1.0 + cfg.tol_growth) + cfg.abs_slack;
  rep.pass_W = rep.dini_W <= 1.0 + cfg.tol_growth;
  return rep;
}

// max(v - w) - (max v - max w); nonnegative for any finite samples.
inline double sup_difference_gap(const std::vector<double>& v, const std::vector<double>& w) {
  if (v.empty() || v.size() != w.size()) throw std::invalid_argument("sup_difference_gap: need equal nonempty samples");
  double mvw = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) mvw = std::max(mvw, v[i] - w[i]);
  return mvw - (*std::max_element(v.begin(), v.end()) - *std::max_element(w.begin(), w.end()));
}

// ------------------------------------------------------------ serialization

inline void to_json(nlohmann::json& j, const UqEstimate& u) {
  j = {{"q", u.q},
       {"R", u.R},
       {"theta", u.theta_Rq},
       {"value", u.value},
       {"argmax_disturbance", u.argmax_disturbance},
       {"argmax_time", u.argmax_time}};
}

inline void to_json(nlohmann::json& j, const LyapunovValue& v) {
  j = {{"V", v.V},
       {"W", v.W},
       {"tail_bound", v.tail_bound},
       {"per_q", v.per_q},
       {"M_table", v.M_table},
       {"lower_bound_certificate", v.lower_bound_certificate}};
}

inline void to_json(nlohmann::json& j, const GrowthReport& g) {
  j = {{"premise_met", g.premise_met},
       {"vacuous", g.vacuous()},
       {"chi_u", g.chi_u},
       {"norm_x", g.norm_x},
       {"V", g.V},
       {"W", g.W},
       {"h", g.h},
       {"quotient_V", g.quotient_V},
       {"quotient_W", g.quotient_W},
       {"dini_V", g.dini_V},
       {"dini_W", g.dini_W},
       {"pass_V", g.pass_V},
       {"pass_W", g.pass_W}};
}

}  // namespace brslab
