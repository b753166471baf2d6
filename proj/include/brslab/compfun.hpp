#pragma once

// Comparison-function calculus on piecewise-linear representations.
//
// A ScalarFun is a nondecreasing, nonnegative function on [0, inf) given by
// knots (s_i, v_i) with s_0 = 0, linear interpolation in between and affine
// extrapolation beyond the last knot. Class membership (K, K-infinity,
// globally 1-Lipschitz) is recorded as tags and checked on construction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace brslab {

enum class FunClass : std::uint8_t { K = 1, Kinf = 2, Lip1 = 4 };

class ClassTags {
 public:
  constexpr ClassTags() = default;
  constexpr ClassTags(std::initializer_list<FunClass> classes) {
    for (auto c : classes) bits_ |= static_cast<std::uint8_t>(c);
    if (has(FunClass::Kinf)) bits_ |= static_cast<std::uint8_t>(FunClass::K);
  }
  [[nodiscard]] constexpr bool has(FunClass c) const {
    return (bits_ & static_cast<std::uint8_t>(c)) != 0;
  }
  [[nodiscard]] constexpr ClassTags with(FunClass c) const {
    ClassTags t = *this;
    t.bits_ |= static_cast<std::uint8_t>(c);
    if (c == FunClass::Kinf) t.bits_ |= static_cast<std::uint8_t>(FunClass::K);
    return t;
  }
  [[nodiscard]] constexpr ClassTags without(FunClass c) const {
    ClassTags t = *this;
    t.bits_ &= static_cast<std::uint8_t>(~static_cast<std::uint8_t>(c));
    return t;
  }
  constexpr bool operator==(const ClassTags&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

// Rounding slack for slope checks.
inline constexpr double kSlopeTol = 1e-12;

// Floor on chord slopes produced by lip1_minorant.
inline constexpr double kMinorantSlopeFloor = 1e-9;

class ScalarFun {
 public:
  ScalarFun(std::vector<double> knots, std::vector<double> values, double slope,
            ClassTags tags = {})
      : knots_(std::move(knots)), values_(std::move(values)), slope_(slope), tags_(tags) {
    validate();
  }

  static ScalarFun identity() { return linear(1.0); }

  static ScalarFun linear(double a) {
    if (!(a > 0.0)) throw std::invalid_argument("ScalarFun::linear: slope must be positive");
    ClassTags tags{FunClass::Kinf};
    if (a <= 1.0) tags = tags.with(FunClass::Lip1);
    return ScalarFun({0.0}, {0.0}, a, tags);
  }

  static ScalarFun zero() { return ScalarFun({0.0}, {0.0}, 0.0); }

  double operator()(double s) const {
    if (!(s >= 0.0)) throw std::domain_error("ScalarFun: argument must be nonnegative");
    if (s >= knots_.back()) return values_.back() + slope_ * (s - knots_.back());
    auto it = std::upper_bound(knots_.begin(), knots_.end(), s);
    const auto i = static_cast<std::size_t>(it - knots_.begin()) - 1;
    const double w = (s - knots_[i]) / (knots_[i + 1] - knots_[i]);
    return values_[i] + w * (values_[i + 1] - values_[i]);
  }

  [[nodiscard]] const std::vector<double>& knots() const { return knots_; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] double slope() const { return slope_; }
  [[nodiscard]] ClassTags tags() const { return tags_; }
  [[nodiscard]] bool is(FunClass c) const { return tags_.has(c); }
  [[nodiscard]] double last_knot() const { return knots_.back(); }

  // Largest chord slope, extrapolation included.
  [[nodiscard]] double max_slope() const {
    double m = slope_;
    for (std::size_t i = 1; i < knots_.size(); ++i)
      m = std::max(m, (values_[i] - values_[i - 1]) / (knots_[i] - knots_[i - 1]));
    return m;
  }

  // a * f
  [[nodiscard]] ScalarFun scaled(double a) const {
    if (!(a > 0.0)) throw std::invalid_argument("ScalarFun::scaled: factor must be positive");
    std::vector<double> v(values_);
    for (auto& x : v) x *= a;
    ClassTags tags = tags_;
    if (a * max_slope() > 1.0 + kSlopeTol) tags = tags.without(FunClass::Lip1);
    return ScalarFun(knots_, std::move(v), slope_ * a, tags);
  }

  // s -> f(a * s)
  [[nodiscard]] ScalarFun arg_scaled(double a) const {
    if (!(a > 0.0)) throw std::invalid_argument("ScalarFun::arg_scaled: factor must be positive");
    std::vector<double> k(knots_);
    for (auto& x : k) x /= a;
    ClassTags tags = tags_;
    if (a * max_slope() > 1.0 + kSlopeTol) tags = tags.without(FunClass::Lip1);
    return ScalarFun(std::move(k), values_, slope_ * a, tags);
  }

  [[nodiscard]] ScalarFun with_tags(ClassTags tags) const {
    return ScalarFun(knots_, values_, slope_, tags);
  }

 private:
  void validate() const {
    if (knots_.empty() || knots_.size() != values_.size())
      throw std::invalid_argument("ScalarFun: knots and values must be nonempty and equal length");
    if (knots_.front() != 0.0) throw std::invalid_argument("ScalarFun: first knot must be 0");
    if (!std::isfinite(slope_) || slope_ < 0.0)
      throw std::invalid_argument("ScalarFun: extrapolation slope must be finite and >= 0");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
      if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i]) || values_[i] < 0.0)
        throw std::invalid_argument("ScalarFun: knots/values must be finite, values nonnegative");
      if (i > 0 && !(knots_[i] > knots_[i - 1]))
        throw std::invalid_argument("ScalarFun: knots must be strictly increasing");
      if (i > 0 && values_[i] < values_[i - 1])
        throw std::invalid_argument("ScalarFun: values must be nondecreasing");
    }
    if (tags_.has(FunClass::K)) {
      if (values_.front() != 0.0) throw std::invalid_argument("ScalarFun: class K requires f(0) = 0");
      for (std::size_t i = 1; i < values_.size(); ++i)
        if (!(values_[i] > values_[i - 1]))
          throw std::invalid_argument("ScalarFun: class K requires strictly increasing values");
      if (!(slope_ > 0.0)) throw std::invalid_argument("ScalarFun: class K requires slope > 0");
    }
    if (tags_.has(FunClass::Lip1) && max_slope() > 1.0 + kSlopeTol)
      throw std::invalid_argument("ScalarFun: class Lip1 requires all chord slopes <= 1");
  }

  std::vector<double> knots_;
  std::vector<double> values_;
  double slope_ = 0.0;
  ClassTags tags_;
};

// G_k(z) = max{0, z - 1/k}
inline double gk_eval(int k, double z) {
  if (k < 1) throw std::invalid_argument("gk_eval: index k must be >= 1");
  if (!(z >= 0.0)) throw std::domain_error("gk_eval: z must be nonnegative");
  return std::max(0.0, z - 1.0 / static_cast<double>(k));
}

inline constexpr double kThetaTol = 1e-10;

// Smallest t >= 1 with exp(-t) (t + R + c) <= 1/q, by bisection.
inline double theta(double R, int q, double c) {
  if (!(R >= 0.0) || !(c >= 0.0) || q < 1)
    throw std::invalid_argument("theta: requires R >= 0, q >= 1, c >= 0");
  const double target = 1.0 / static_cast<double>(q);
  auto g = [&](double t) { return std::exp(-t) * (t + R + c); };
  if (g(1.0) <= target) return 1.0;
  double lo = 1.0, hi = 2.0;
  while (g(hi) > target) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > kThetaTol) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) <= target)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

// Running clamp of chord slopes into (0, 1], never exceeding f at a knot.
// Between knots both f and the result are linear, so pointwise domination at
// knots extends to the whole half-line.
inline ScalarFun lip1_minorant(const ScalarFun& f) {
  if (!f.is(FunClass::Kinf)) throw std::invalid_argument("lip1_minorant: input must be K-infinity");
  const auto& k = f.knots();
  const auto& v = f.values();
  std::vector<double> out(k.size(), 0.0);
  for (std::size_t i = 1; i < k.size(); ++i) {
    const double dk = k[i] - k[i - 1];
    const double room = v[i] - out[i - 1];
    double rise = std::min(room, dk);
    rise = std::max(rise, std::min(kMinorantSlopeFloor * dk, room));
    out[i] = out[i - 1] + rise;
  }
  const double slope = std::max(std::min(f.slope(), 1.0), std::min(kMinorantSlopeFloor, f.slope()));
  return ScalarFun(k, std::move(out), slope, {FunClass::Kinf, FunClass::Lip1});
}

inline ScalarFun inverse(const ScalarFun& f) {
  if (!f.is(FunClass::Kinf)) throw std::invalid_argument("inverse: input must be K-infinity");
  return ScalarFun(f.values(), f.knots(), 1.0 / f.slope(), {FunClass::Kinf});
}

// Exact pointwise maximum: union of knot grids plus all pairwise crossings.
inline ScalarFun pointwise_max(std::span<const ScalarFun> fs) {
  if (fs.empty()) throw std::invalid_argument("pointwise_max: empty family");
  std::vector<double> grid;
  for (const auto& f : fs) grid.insert(grid.end(), f.knots().begin(), f.knots().end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  std::vector<double> extra;
  auto add_crossings = [&](double a, double b) {
    for (std::size_t i = 0; i < fs.size(); ++i) {
      for (std::size_t j = i + 1; j < fs.size(); ++j) {
        const double da = fs[i](a) - fs[j](a);
        const double db = fs[i](b) - fs[j](b);
        if ((da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0)) {
          const double t = a + (b - a) * da / (da - db);
          if (t > a && t < b) extra.push_back(t);
        }
      }
    }
  };
  for (std::size_t m = 1; m < grid.size(); ++m) add_crossings(grid[m - 1], grid[m]);
  const double last = grid.back();
  for (std::size_t i = 0; i < fs.size(); ++i) {
    for (std::size_t j = i + 1; j < fs.size(); ++j) {
      const double dv = fs[i](last) - fs[j](last);
      const double ds = fs[i].slope() - fs[j].slope();
      if (ds != 0.0) {
        const double t = last - dv / ds;
        if (t > last && std::isfinite(t)) extra.push_back(t);
      }
    }
  }
  grid.insert(grid.end(), extra.begin(), extra.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  auto fmax = [&](double s) {
    double m = 0.0;
    for (const auto& f : fs) m = std::max(m, f(s));
    return m;
  };
  std::vector<double> values;
  values.reserve(grid.size());
  for (double s : grid) values.push_back(fmax(s));
  for (std::size_t i = 1; i < values.size(); ++i) values[i] = std::max(values[i], values[i - 1]);
  const double end = grid.back();
  double slope = 0.0;
  double best = -1.0;
  for (const auto& f : fs) {
    const double fv = f(end);
    if (fv > best || (fv == best && f.slope() > slope)) {
      best = fv;
      slope = f.slope();
    }
  }

  bool all_k = true, any_kinf = false, all_lip1 = true;
  for (const auto& f : fs) {
    all_k = all_k && f.is(FunClass::K);
    any_kinf = any_kinf || f.is(FunClass::Kinf);
    all_lip1 = all_lip1 && f.is(FunClass::Lip1);
  }
  ClassTags tags;
  if (all_k) tags = tags.with(FunClass::K);
  if (all_k && any_kinf) tags = tags.with(FunClass::Kinf);
  if (all_lip1) tags = tags.with(FunClass::Lip1);
  return ScalarFun(std::move(grid), std::move(values), slope, tags);
}

// alpha(s) = 4 max{s, chi1(s), chi2(s), chi3(s)}
inline ScalarFun build_alpha(const ScalarFun& chi1, const ScalarFun& chi2, const ScalarFun& chi3) {
  for (const auto* c : {&chi1, &chi2, &chi3})
    if (!c->is(FunClass::K)) throw std::invalid_argument("build_alpha: each chi must be class K");
  const std::vector<ScalarFun> family{ScalarFun::identity(), chi1, chi2, chi3};
  return pointwise_max(family).scaled(4.0).with_tags({FunClass::Kinf});
}

// Growth margin eta in K-infinity and Lip1 with eta <= alpha^{-1} / 2.
inline ScalarFun eta_from_chis(const ScalarFun& chi1, const ScalarFun& chi2, const ScalarFun& chi3) {
  const ScalarFun half_inv = inverse(build_alpha(chi1, chi2, chi3)).scaled(0.5);
  return lip1_minorant(half_inv);
}

// chi(s) = eta^{-1}(2 s)
inline ScalarFun chi_from_eta(const ScalarFun& eta) {
  return inverse(eta).arg_scaled(2.0).with_tags({FunClass::Kinf});
}

inline std::vector<std::string> tag_names(ClassTags t) {
  std::vector<std::string> out;
  if (t.has(FunClass::K)) out.emplace_back("K");
  if (t.has(FunClass::Kinf)) out.emplace_back("Kinf");
  if (t.has(FunClass::Lip1)) out.emplace_back("Lip1");
  return out;
}

inline void to_json(nlohmann::json& j, const ScalarFun& f) {
  j = nlohmann::json{{"knots", f.knots()},
                     {"values", f.values()},
                     {"slope", f.slope()},
                     {"tags", tag_names(f.tags())}};
}

inline ScalarFun scalar_fun_from_json(const nlohmann::json& j) {
  ClassTags tags;
  for (const auto& name : j.at("tags")) {
    const auto s = name.get<std::string>();
    if (s == "K")
      tags = tags.with(FunClass::K);
    else if (s == "Kinf")
      tags = tags.with(FunClass::Kinf);
    else if (s == "Lip1")
      tags = tags.with(FunClass::Lip1);
    else
      throw std::invalid_argument("ScalarFun json: unknown tag '" + s + "'");
  }
  return ScalarFun(j.at("knots").get<std::vector<double>>(), j.at("values").get<std::vector<double>>(),
                   j.at("slope").get<double>(), tags);
}

}  // namespace brslab
