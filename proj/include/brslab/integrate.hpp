#pragma once

// Adaptive Dormand-Prince 5(4) integration with 4th-order dense output.
//
// The input is piecewise constant; integration restarts at every input
// breakpoint so that the right-hand side is smooth inside each step. Output
// times never influence the step sequence.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "brslab/signal.hpp"
#include "brslab/system.hpp"

namespace brslab {

namespace detail {

struct Dopri5 {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;
};

// Continuous extension of one accepted step on [t0, t0 + h].
struct DenseStep {
  double t0 = 0.0, h = 0.0;
  Vec r1, r2, r3, r4, r5;

  [[nodiscard]] Vec at(double t) const {
    const double th = (t - t0) / h;
    const double th1 = 1.0 - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
  }
};

inline double error_norm(const Vec& err, const Vec& y0, const Vec& y1, double atol, double rtol) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

inline double initial_step(const SystemDef& sys, const Vec& y, const Vec& f0, const Vec& u,
                           const IntegratorConfig& cfg) {
  Vec sc = (cfg.abs_tol + cfg.rel_tol * y.array().abs()).matrix();
  const double d0 = (y.array() / sc.array()).matrix().norm() / std::sqrt(double(y.size()));
  const double d1 = (f0.array() / sc.array()).matrix().norm() / std::sqrt(double(y.size()));
  double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
  h0 = std::min(h0, cfg.max_step);
  const Vec y1 = y + h0 * f0;
  const Vec f1 = sys.rhs(y1, u);
  if (!y1.allFinite() || !f1.allFinite()) return h0 * 1e-3;
  const double d2 = ((f1 - f0).array() / sc.array()).matrix().norm() / std::sqrt(double(y.size())) / h0;
  const double dm = std::max(d1, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
  return std::min({100.0 * h0, h1, cfg.max_step});
}

}  // namespace detail

inline Trajectory integrate(const SystemDef& sys, const Vec& x0, const InputSignal& u, double tau,
                            const IntegratorConfig& cfg = {}) {
  using detail::Dopri5;
  cfg.validate();
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("integrate: tau must be positive and finite");
  if (x0.size() != sys.state_dim()) throw std::invalid_argument("integrate: initial state has wrong dimension");
  if (u.dim() != sys.input_dim()) throw std::invalid_argument("integrate: input has wrong dimension");

  std::vector<double> out_times;
  const bool dense = !cfg.dense_output_grid.empty();
  if (dense) {
    for (double t : cfg.dense_output_grid)
      if (t > 0.0 && t < tau) out_times.push_back(t);
    std::sort(out_times.begin(), out_times.end());
    out_times.erase(std::unique(out_times.begin(), out_times.end()), out_times.end());
    out_times.push_back(tau);
  }
  std::size_t next_out = 0;

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  if (x0.norm() > cfg.blowup_threshold) {
    traj.blew_up = true;
    traj.t_max = 0.0;
    return traj;
  }

  double t = 0.0;
  Vec y = x0;
  double h = 0.0;
  const double min_step_rel = 1e-14;

  for (std::size_t seg = u.segment_index(0.0); seg < u.segment_count(); ++seg) {
    const double b = std::min(u.segment_end(seg), tau);
    if (!(b > t)) continue;
    const Vec& uval = u.values()[seg];
    Vec k1 = sys.rhs(y, uval);
    if (h == 0.0) h = detail::initial_step(sys, y, k1, uval, cfg);
    bool last_rejected = false;

    while (t < b) {
      h = std::min(h, cfg.max_step);
      bool last = false;
      if (t + h >= b) {
        h = b - t;
        last = true;
      }
      const Vec k2 = sys.rhs(y + h * Dopri5::a21 * k1, uval);
      const Vec k3 = sys.rhs(y + h * (Dopri5::a31 * k1 + Dopri5::a32 * k2), uval);
      const Vec k4 = sys.rhs(y + h * (Dopri5::a41 * k1 + Dopri5::a42 * k2 + Dopri5::a43 * k3), uval);
      const Vec k5 = sys.rhs(
          y + h * (Dopri5::a51 * k1 + Dopri5::a52 * k2 + Dopri5::a53 * k3 + Dopri5::a54 * k4), uval);
      const Vec k6 = sys.rhs(y + h * (Dopri5::a61 * k1 + Dopri5::a62 * k2 + Dopri5::a63 * k3 +
                                      Dopri5::a64 * k4 + Dopri5::a65 * k5),
                             uval);
      const Vec y1 = y + h * (Dopri5::a71 * k1 + Dopri5::a73 * k3 + Dopri5::a74 * k4 + Dopri5::a75 * k5 +
                              Dopri5::a76 * k6);
      const Vec k7 = sys.rhs(y1, uval);
      const Vec err = h * (Dopri5::e1 * k1 + Dopri5::e3 * k3 + Dopri5::e4 * k4 + Dopri5::e5 * k5 +
                           Dopri5::e6 * k6 + Dopri5::e7 * k7);
      double en = std::numeric_limits<double>::infinity();
      if (y1.allFinite() && k7.allFinite()) en = detail::error_norm(err, y, y1, cfg.abs_tol, cfg.rel_tol);

      if (!(en <= 1.0)) {
        const double fac = std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.2)) : 0.2;
        h *= fac;
        last_rejected = true;
        if (h < min_step_rel * std::max(1.0, std::abs(t))) {
          std::ostringstream msg;
          msg << "integrate: step size underflow at t = " << t << " (system " << sys.name() << ")";
          throw StepSizeUnderflow(msg.str());
        }
        continue;
      }

      const double tnew = last ? b : t + h;
      detail::DenseStep ds;
      ds.t0 = t;
      ds.h = tnew - t;
      ds.r1 = y;
      ds.r2 = y1 - y;
      ds.r3 = h * k1 - ds.r2;
      ds.r4 = ds.r2 - h * k7 - ds.r3;
      ds.r5 = h * (Dopri5::d1 * k1 + Dopri5::d3 * k3 + Dopri5::d4 * k4 + Dopri5::d5 * k5 +
                   Dopri5::d6 * k6 + Dopri5::d7 * k7);

      const bool crossed = y1.norm() > cfg.blowup_threshold;
      double t_cross = tnew;
      if (crossed) {
        double lo = t, hi = tnew;
        while (hi - lo > 1e-6 * std::max(hi, 1e-300)) {
          const double mid = 0.5 * (lo + hi);
          if (ds.at(mid).norm() > cfg.blowup_threshold)
            hi = mid;
          else
            lo = mid;
        }
        t_cross = hi;
      }

      if (dense) {
        while (next_out < out_times.size() && out_times[next_out] <= tnew) {
          const double to = out_times[next_out];
          if (crossed && to >= t_cross) break;
          traj.times.push_back(to);
          traj.states.push_back(to == tnew ? y1 : ds.at(to));
          ++next_out;
        }
      }
      if (crossed) {
        if (traj.times.back() < tnew) {
          traj.times.push_back(tnew);
          traj.states.push_back(y1);
        } else {
          traj.states.back() = y1;
        }
        traj.blew_up = true;
        traj.t_max = t_cross;
        return traj;
      }
      if (!dense) {
        traj.times.push_back(tnew);
        traj.states.push_back(y1);
      }

      t = tnew;
      y = y1;
      k1 = k7;
      double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 10.0;
      fac = std::clamp(fac, 0.2, last_rejected ? 1.0 : 10.0);
      last_rejected = false;
      if (!last) h *= fac;
      else h = std::max(h, h * fac);
    }
    if (t >= tau) break;
  }
  return traj;
}

// Time at which the state norm first crosses the blow-up threshold on
// [0, tau]; +inf when it does not.
inline double detect_tmax(const SystemDef& sys, const Vec& x0, const InputSignal& u, double tau,
                          const IntegratorConfig& cfg = {}) {
  IntegratorConfig c = cfg;
  c.dense_output_grid.clear();
  return integrate(sys, x0, u, tau, c).t_max;
}

}  // namespace brslab
