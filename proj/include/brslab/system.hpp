#pragma once

// Control systems x' = A x + f(x, u) and their trajectories.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "brslab/signal.hpp"

namespace brslab {

using RhsFn = std::function<Vec(const Vec& x, const Vec& u)>;

// C -> L_C with ||f(x1, d eta(|x1|)) - f(x2, d eta(|x2|))|| <= L_C ||x1 - x2||
// on the ball of radius C, for every disturbance value with |d| <= 1.
using LipschitzHint = std::function<double(double)>;

class SystemDef {
 public:
  SystemDef(std::string name, int state_dim, int input_dim, RhsFn f,
            std::optional<Mat> linear_part = std::nullopt, LipschitzHint hint = {})
      : name_(std::move(name)),
        state_dim_(state_dim),
        input_dim_(input_dim),
        f_(std::move(f)),
        linear_part_(std::move(linear_part)),
        hint_(std::move(hint)) {
    if (state_dim_ < 1 || input_dim_ < 1)
      throw std::invalid_argument("SystemDef: dimensions must be positive");
    if (!f_) throw std::invalid_argument("SystemDef: missing right-hand side");
    if (linear_part_ && (linear_part_->rows() != state_dim_ || linear_part_->cols() != state_dim_))
      throw std::invalid_argument("SystemDef: linear part must be state_dim x state_dim");
  }

  // A x + f(x, u)
  [[nodiscard]] Vec rhs(const Vec& x, const Vec& u) const {
    Vec r = f_(x, u);
    if (linear_part_) r.noalias() += *linear_part_ * x;
    return r;
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] int state_dim() const { return state_dim_; }
  [[nodiscard]] int input_dim() const { return input_dim_; }
  [[nodiscard]] const RhsFn& nonlinearity() const { return f_; }
  [[nodiscard]] const std::optional<Mat>& linear_part() const { return linear_part_; }
  [[nodiscard]] const LipschitzHint& lipschitz_hint() const { return hint_; }

 private:
  std::string name_;
  int state_dim_;
  int input_dim_;
  RhsFn f_;
  std::optional<Mat> linear_part_;
  LipschitzHint hint_;
};

struct IntegratorConfig {
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  double max_step = std::numeric_limits<double>::infinity();
  double blowup_threshold = 1e9;
  // Output times; when empty every accepted step endpoint is recorded.
  std::vector<double> dense_output_grid;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw std::invalid_argument("IntegratorConfig: tolerances must be positive");
    if (!(max_step > 0.0)) throw std::invalid_argument("IntegratorConfig: max_step must be positive");
    if (!(blowup_threshold > 0.0)) throw std::invalid_argument("IntegratorConfig: blowup_threshold must be positive");
  }
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  // +inf when no blow-up was observed on the integration horizon.
  double t_max = std::numeric_limits<double>::infinity();
  bool blew_up = false;

  [[nodiscard]] const Vec& final_state() const { return states.back(); }
  [[nodiscard]] double final_time() const { return times.back(); }
  [[nodiscard]] std::size_t size() const { return times.size(); }
};

class StepSizeUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(const std::string& what, double t_max) : std::runtime_error(what), t_max_(t_max) {}
  [[nodiscard]] double t_max() const { return t_max_; }

 private:
  double t_max_;
};

}  // namespace brslab
