#pragma once

// Piecewise-constant input signals on [0, inf).
//
// Segment i covers [b_{i-1}, b_i) with b_{-1} = 0; the last value is the tail
// on [b_last, inf). The value AT a breakpoint belongs to the new segment.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace brslab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class InputSignal {
 public:
  InputSignal(std::vector<double> breakpoints, std::vector<Vec> values)
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)) {
    if (values_.size() != breakpoints_.size() + 1)
      throw std::invalid_argument("InputSignal: need exactly one more value than breakpoints");
    const auto dim = values_.front().size();
    if (dim < 1) throw std::invalid_argument("InputSignal: input dimension must be positive");
    for (const auto& v : values_) {
      if (v.size() != dim) throw std::invalid_argument("InputSignal: inconsistent value dimensions");
      if (!v.allFinite()) throw std::invalid_argument("InputSignal: non-finite value");
    }
    for (std::size_t i = 0; i < breakpoints_.size(); ++i) {
      if (!std::isfinite(breakpoints_[i]) || !(breakpoints_[i] > 0.0))
        throw std::invalid_argument("InputSignal: breakpoints must be finite and positive");
      if (i > 0 && !(breakpoints_[i] > breakpoints_[i - 1]))
        throw std::invalid_argument("InputSignal: breakpoints must be strictly increasing");
    }
  }

  static InputSignal constant(Vec v) { return InputSignal({}, {std::move(v)}); }
  static InputSignal zero(int dim) { return constant(Vec::Zero(dim)); }

  [[nodiscard]] int dim() const { return static_cast<int>(values_.front().size()); }
  [[nodiscard]] const std::vector<double>& breakpoints() const { return breakpoints_; }
  [[nodiscard]] const std::vector<Vec>& values() const { return values_; }
  [[nodiscard]] const Vec& tail() const { return values_.back(); }
  [[nodiscard]] std::size_t segment_count() const { return values_.size(); }

  [[nodiscard]] double segment_start(std::size_t i) const { return i == 0 ? 0.0 : breakpoints_[i - 1]; }
  [[nodiscard]] double segment_end(std::size_t i) const {
    return i < breakpoints_.size() ? breakpoints_[i] : std::numeric_limits<double>::infinity();
  }

  [[nodiscard]] std::size_t segment_index(double t) const {
    if (!(t >= 0.0)) throw std::domain_error("InputSignal: time must be nonnegative");
    return static_cast<std::size_t>(std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t) -
                                    breakpoints_.begin());
  }

  const Vec& operator()(double t) const { return values_[segment_index(t)]; }

  [[nodiscard]] double sup_norm() const {
    double m = 0.0;
    for (const auto& v : values_) m = std::max(m, v.norm());
    return m;
  }

  // Essential sup over [0, tau]: segments meeting [0, tau) in positive measure.
  [[nodiscard]] double sup_norm(double tau) const {
    double m = values_.front().norm();
    for (std::size_t i = 1; i < values_.size() && segment_start(i) < tau; ++i)
      m = std::max(m, values_[i].norm());
    return m;
  }

  // s -> u(s + t)
  [[nodiscard]] InputSignal shifted(double t) const {
    const auto first = segment_index(t);
    std::vector<double> bps;
    std::vector<Vec> vals{values_[first]};
    for (std::size_t i = first; i < breakpoints_.size(); ++i) {
      bps.push_back(breakpoints_[i] - t);
      vals.push_back(values_[i + 1]);
    }
    return InputSignal(std::move(bps), std::move(vals));
  }

 private:
  std::vector<double> breakpoints_;
  std::vector<Vec> values_;
};

// (u1 <>_t u2)(s) = u1(s) for s < t, u2(s - t) for s >= t.
inline InputSignal concat(const InputSignal& u1, const InputSignal& u2, double t) {
  if (!(t >= 0.0)) throw std::domain_error("concat: splice time must be nonnegative");
  if (u1.dim() != u2.dim()) throw std::invalid_argument("concat: dimension mismatch");
  if (t == 0.0) return u2;
  std::vector<double> bps;
  std::vector<Vec> vals;
  for (std::size_t i = 0; i < u1.segment_count(); ++i) {
    vals.push_back(u1.values()[i]);
    const double end = u1.segment_end(i);
    if (end < t) {
      bps.push_back(end);
    } else {
      bps.push_back(t);
      break;
    }
  }
  vals.push_back(u2.values().front());
  for (std::size_t j = 0; j < u2.breakpoints().size(); ++j) {
    bps.push_back(u2.breakpoints()[j] + t);
    vals.push_back(u2.values()[j + 1]);
  }
  return InputSignal(std::move(bps), std::move(vals));
}

}  // namespace brslab
