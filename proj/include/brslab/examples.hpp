#pragma once

// Registry of concrete systems.
//
//   sigma1              x' = -|u| x ln|x|           (scalar, non-Lipschitz flow at 0)
//   sigma2              x' = -x ln|x|               (input ignored)
//   linear              x' = A x + B u
//   quadratic           x' = x^2                    (finite escape time)
//   reaction_diffusion  x' = n^2 L x - x^3/(1+x^2) + b u   (method of lines, Dirichlet)

#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "brslab/compfun.hpp"
#include "brslab/system.hpp"
#include "brslab/tdinput.hpp"

namespace brslab::examples {

inline constexpr double kInvE = 0.36787944117144233;  // e^{-1}

// -x ln|x| with the removable value 0 at the origin.
inline double neg_x_log_abs(double x) {
  const double a = std::abs(x);
  if (a < 1e-300) return 0.0;
  return -x * std::log(a);
}

// eta(s) = -s / (2 ln s) on [0, 1/e], s / 2 beyond.
inline double eta_paper_exact(double s) {
  if (s <= 0.0) return 0.0;
  if (s <= kInvE) return -s / (2.0 * std::log(s));
  return 0.5 * s;
}

// Piecewise-linear interpolant of eta_paper_exact: geometric knots near 0,
// then a uniform grid up to 1/e, slope 1/2 beyond.
inline ScalarFun eta_paper(int geometric = 221, int uniform = 2000) {
  std::vector<double> k{0.0};
  for (int i = 0; i < geometric; ++i) k.push_back(std::pow(10.0, -12.0 + 10.0 * i / (geometric - 1)));
  const double start = k.back();
  for (int i = 1; i <= uniform; ++i) k.push_back(start + (kInvE - start) * i / uniform);
  k.back() = kInvE;
  std::vector<double> v;
  v.reserve(k.size());
  for (double s : k) v.push_back(eta_paper_exact(s));
  return ScalarFun(std::move(k), std::move(v), 0.5, {FunClass::Kinf, FunClass::Lip1});
}

// phi(t, x, 1) for sigma1.
inline double sigma1_flow_u1(double t, double x) {
  if (x == 0.0) return 0.0;
  return std::copysign(std::pow(std::abs(x), std::exp(-t)), x);
}

// f(x, d eta(|x|)) for sigma1 with the exact eta.
inline double sigma1_closed_loop_exact(double x, double abs_d) {
  const double a = std::abs(x);
  if (a <= kInvE) return 0.5 * abs_d * x * a;
  return -0.5 * abs_d * x * a * std::log(a);
}

inline SystemDef sigma1() {
  return SystemDef(
      "sigma1", 1, 1,
      [](const Vec& x, const Vec& u) {
        Vec r(1);
        r[0] = std::abs(u[0]) * neg_x_log_abs(x[0]);
        return r;
      },
      std::nullopt, [](double C) { return std::max(C, C * C); });
}

inline SystemDef sigma2() {
  return SystemDef(
      "sigma2", 1, 1,
      [](const Vec& x, const Vec&) {
        Vec r(1);
        r[0] = neg_x_log_abs(x[0]);
        return r;
      },
      std::nullopt);
}

inline SystemDef linear(const Mat& A, const Mat& B) {
  if (A.rows() != A.cols() || B.rows() != A.rows() || B.cols() < 1)
    throw std::invalid_argument("linear: need square A and B with matching rows");
  const double nb = B.norm() == 0.0 ? 0.0 : Eigen::JacobiSVD<Mat>(B).singularValues()(0);
  return SystemDef(
      "linear", static_cast<int>(A.rows()), static_cast<int>(B.cols()),
      [B](const Vec&, const Vec& u) -> Vec { return B * u; }, A, [nb](double) { return nb; });
}

inline SystemDef quadratic() {
  return SystemDef(
      "quadratic", 1, 1,
      [](const Vec& x, const Vec&) {
        Vec r(1);
        r[0] = x[0] * x[0];
        return r;
      },
      std::nullopt, [](double C) { return 2.0 * C; });
}

// n^2 tridiag(1, -2, 1)
inline Mat laplacian(int n) {
  Mat L = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    L(i, i) = -2.0;
    if (i > 0) L(i, i - 1) = 1.0;
    if (i + 1 < n) L(i, i + 1) = 1.0;
  }
  return static_cast<double>(n) * static_cast<double>(n) * L;
}

// Lipschitz constant of s -> s^3 / (1 + s^2).
inline constexpr double kSaturatingCubicLip = 1.125;

inline SystemDef reaction_diffusion(int n = 32, std::optional<Vec> b = std::nullopt) {
  if (n < 1) throw std::invalid_argument("reaction_diffusion: n must be >= 1");
  const Vec bb = b ? *b : Vec::Constant(n, 1.0 / std::sqrt(static_cast<double>(n)));
  if (bb.size() != n) throw std::invalid_argument("reaction_diffusion: b must have n entries");
  const double nb = bb.norm();
  return SystemDef(
      "reaction_diffusion", n, 1,
      [bb](const Vec& x, const Vec& u) -> Vec {
        Vec r = bb * u[0];
        for (Eigen::Index i = 0; i < x.size(); ++i) r[i] -= x[i] * x[i] * x[i] / (1.0 + x[i] * x[i]);
        return r;
      },
      laplacian(n), [nb](double) { return kSaturatingCubicLip + nb; });
}

struct Example {
  SystemDef sys;
  GrowthMargin eta;
  IntegratorConfig integrator;
  nlohmann::json properties;
};

inline std::vector<std::string> names() {
  return {"sigma1", "sigma2", "linear", "quadratic", "reaction_diffusion"};
}

inline Mat matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty() || rows.front().empty()) throw std::invalid_argument("matrix must be nonempty");
  Mat m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.front().size()) throw std::invalid_argument("matrix rows differ in length");
    for (std::size_t k = 0; k < rows[i].size(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

inline nlohmann::json documented_properties(const std::string& name) {
  if (name == "sigma1")
    return {"phi(t, x, 1) = sign(x) |x|^(e^-t)", "|phi(t, x, u)| <= max(1, |x|)",
            "flow is not Lipschitz at x = 0 for u = 1",
            "closed loop with eta_paper: f = |d| x |x| / 2 on |x| <= 1/e, -|d| x |x| ln|x| / 2 beyond",
            "|d/dx f(x, d eta(|x|))| <= max(|x|, x^2)"};
  if (name == "sigma2") return {"zero-input flow equals sigma1 flow with u = 1", "input is ignored"};
  if (name == "linear") return {"phi(t, x, u) = e^{At} x + int e^{A(t-s)} B u(s) ds"};
  if (name == "quadratic") return {"phi(t, x) = x / (1 - t x)", "blows up at t = 1/x for x > 0"};
  if (name == "reaction_diffusion")
    return {"Dirichlet Laplacian scaled by n^2", "nonlinearity globally Lipschitz with constant 9/8",
            "stable explicit steps need max_step <= 0.5 / n^2"};
  throw std::invalid_argument("unknown example '" + name + "'");
}

inline Example make(const std::string& name, const nlohmann::json& params = nlohmann::json::object()) {
  const nlohmann::json p = params.is_null() ? nlohmann::json::object() : params;
  IntegratorConfig ic;
  if (name == "sigma1") return {sigma1(), GrowthMargin(eta_paper()), ic, documented_properties(name)};
  if (name == "sigma2") return {sigma2(), GrowthMargin(eta_paper()), ic, documented_properties(name)};
  if (name == "linear") {
    const Mat A = p.contains("A") ? matrix_from_json(p.at("A")) : Mat::Constant(1, 1, -1.0);
    const Mat B = p.contains("B") ? matrix_from_json(p.at("B")) : Mat::Constant(A.rows(), 1, 1.0);
    return {linear(A, B), GrowthMargin(ScalarFun::linear(0.5)), ic, documented_properties(name)};
  }
  if (name == "quadratic") return {quadratic(), GrowthMargin(ScalarFun::linear(0.5)), ic, documented_properties(name)};
  if (name == "reaction_diffusion") {
    const int n = p.value("n", 32);
    ic.max_step = 0.5 / (static_cast<double>(n) * n);
    ic.rel_tol = 1e-8;
    ic.abs_tol = 1e-12;
    return {reaction_diffusion(n), GrowthMargin(ScalarFun::linear(0.5)), ic, documented_properties(name)};
  }
  throw std::invalid_argument("unknown example '" + name + "'");
}

inline nlohmann::json list() {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& n : names()) {
    const auto ex = make(n);
    out.push_back({{"name", n},
                   {"state_dim", ex.sys.state_dim()},
                   {"input_dim", ex.sys.input_dim()},
                   {"properties", ex.properties}});
  }
  return out;
}

}  // namespace brslab::examples
