#include <cmath>
#include <memory>

#include <gtest/gtest.h>

#include "brslab/examples.hpp"
#include "brslab/lyapunov.hpp"
#include "brslab/rng.hpp"

namespace brslab {
namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

TEST(LipschitzTable, LookupAndMissing) {
  LipschitzTable t;
  t.set(1.0, 2.0, 3.0);
  t.set(1.0 + 1e-12, 2.0, 4.0);
  EXPECT_EQ(t.entries().size(), 1u);
  EXPECT_EQ(t.lookup(1.0, 2.0), 4.0);
  EXPECT_THROW((void)t.lookup(1.5, 2.0), MissingTableEntry);
}

TEST(LyapM, Values) {
  LipschitzTable t;
  t.set(theta(0.0, 1, 0.0), 0.0, 0.5);
  EXPECT_EQ(lyap_M(0.0, 1, 0.0, t), 1.0);
  LipschitzTable zero;
  for (int q = 1; q <= 5; ++q) zero.set(theta(q, q, 0.0), q, 0.0);
  const auto m = m_table(zero, 5, 0.0);
  for (int q = 1; q <= 5; ++q) EXPECT_EQ(m[q - 1], theta(q, q, 0.0));
}

TEST(TailBound, MinimalQ) {
  EXPECT_EQ(min_admissible_Q(2.0, 0.0, 1e-3), 13);
  EXPECT_LE(tail_bound(13, 2.0, 0.0), 1e-3);
  EXPECT_GT(tail_bound(12, 2.0, 0.0), 1e-3);
}

TEST(SupDifferenceGap, RandomSamples) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 20));
    std::vector<double> v(n), w(n);
    for (std::size_t k = 0; k < n; ++k) {
      v[k] = rng.uniform(-5.0, 5.0);
      w[k] = rng.uniform(-5.0, 5.0);
    }
    EXPECT_GE(sup_difference_gap(v, w), -1e-12);
  }
  EXPECT_THROW(sup_difference_gap({}, {}), std::invalid_argument);
}

class Sigma1Lyapunov : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ex_ = std::make_unique<examples::Example>(examples::make("sigma1"));
    cfg_ = std::make_unique<LyapunovConfig>();
    cfg_->Q = min_admissible_Q(2.0, 0.0, cfg_->tail_tol);
    M_ = m_table(build_l_table(ex_->sys, ex_->eta, cfg_->Q, 0.0, 16, 11), cfg_->Q, 0.0);
  }
  static void TearDownTestSuite() {
    ex_.reset();
    cfg_.reset();
  }

  static LyapunovValue V(double x, const LyapunovConfig& cfg) {
    return eval_V_with(ex_->sys, ex_->eta, v1(x), std::max(std::abs(x), 1.0), cfg, M_);
  }

  static std::unique_ptr<examples::Example> ex_;
  static std::unique_ptr<LyapunovConfig> cfg_;
  static std::vector<double> M_;
};

std::unique_ptr<examples::Example> Sigma1Lyapunov::ex_;
std::unique_ptr<LyapunovConfig> Sigma1Lyapunov::cfg_;
std::vector<double> Sigma1Lyapunov::M_;

TEST_F(Sigma1Lyapunov, MTableIsFiniteAndAboveTheta) {
  ASSERT_EQ(M_.size(), static_cast<std::size_t>(cfg_->Q));
  for (int q = 1; q <= cfg_->Q; ++q) {
    EXPECT_TRUE(std::isfinite(M_[q - 1]));
    EXPECT_GE(M_[q - 1], theta(q, q, 0.0));
  }
}

TEST_F(Sigma1Lyapunov, UqAtEquilibriumAndLowerBound) {
  for (const auto& u : estimate_U_all(ex_->sys, ex_->eta, v1(0.0), 1.0, *cfg_)) EXPECT_EQ(u.value, 0.0);
  EXPECT_EQ(V(0.0, *cfg_).V, 1.0);
  for (double x : {-1.7, -0.4, 0.05, 0.6, 1.2, 2.0}) {
    const auto all = estimate_U_all(ex_->sys, ex_->eta, v1(x), std::max(1.0, std::abs(x)), *cfg_);
    for (const auto& u : all) EXPECT_GE(u.value, gk_eval(u.q, ex_->eta(std::abs(x))));
    for (std::size_t q = 1; q < all.size(); ++q) EXPECT_GE(all[q].value, all[q - 1].value);
    const auto one = estimate_Uq(ex_->sys, ex_->eta, v1(x), 3, std::max(1.0, std::abs(x)), *cfg_);
    EXPECT_EQ(one.value, all[2].value);
  }
}

TEST_F(Sigma1Lyapunov, RefinementNeverDecreases) {
  LyapunovConfig fine = *cfg_;
  fine.n_dist *= 2;
  fine.time_grid_density *= 2;
  for (double x : {0.0, 0.3, 0.9, 1.5, 2.0}) EXPECT_GE(V(x, fine).V, V(x, *cfg_).V);
}

TEST_F(Sigma1Lyapunov, Sandwich) {
  const auto sw = sandwich_funs(ex_->eta, M_, 0.0, cfg_->Q, 2.0);
  EXPECT_EQ(sw.alpha1(0.0), 0.0);
  EXPECT_GE(sw.alpha2(0.0), 0.0);
  EXPECT_EQ(sw.C, 2.0);
  EXPECT_TRUE(sw.alpha2.is(FunClass::Kinf));
  double prev = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double s = 0.05 * i;
    EXPECT_GE(sw.alpha1(s), prev);
    prev = sw.alpha1(s);
  }
  for (int i = 0; i <= 20; ++i) {
    const double r = 0.1 * i;
    const double v = V(r, *cfg_).V;
    EXPECT_LE(1.0 + sw.alpha1(r), v + 1e-12);
    EXPECT_LE(v, sw.alpha2(r) + sw.C);
  }
}

TEST_F(Sigma1Lyapunov, TailBudget) {
  LyapunovConfig small = *cfg_;
  small.Q = 2;
  try {
    V(2.0, small);
    FAIL() << "expected a tail budget error";
  } catch (const TailBudgetError& e) {
    EXPECT_EQ(e.min_admissible_Q(), 13);
  }
}

TEST_F(Sigma1Lyapunov, GrowthAtHalf) {
  const auto chi = chi_from_eta(ex_->eta.fun());
  for (double u : {0.0, 0.1, -0.12}) {
    ASSERT_LE(chi(std::abs(u)), 0.5);
    const auto g = verify_growth(ex_->sys, ex_->eta, v1(0.5), v1(u), *cfg_, M_);
    EXPECT_FALSE(g.vacuous());
    EXPECT_TRUE(g.pass_V) << g.dini_V;
    EXPECT_TRUE(g.pass_W) << g.dini_W;
    EXPECT_EQ(g.h.size(), cfg_->dini_h_ladder.size());
  }
  EXPECT_TRUE(verify_growth(ex_->sys, ex_->eta, v1(0.5), v1(5.0), *cfg_, M_).vacuous());
}

TEST_F(Sigma1Lyapunov, ScaleStep) {
  for (double x : {0.2, -0.7, 1.4}) {
    const auto d = DisturbanceSignal(InputSignal::constant(v1(1.0)));
    for (double t : {1e-3, 1e-2}) {
      const auto lift = lift_disturbance(ex_->sys, ex_->eta, v1(x), d, t);
      const Vec y = lift.traj.final_state();
      const double R = std::max({1.0, std::abs(x), y.norm()});
      const double vx = eval_V_with(ex_->sys, ex_->eta, v1(x), R, *cfg_, M_).V;
      const double vy = eval_V_with(ex_->sys, ex_->eta, y, R, *cfg_, M_).V;
      EXPECT_LE(vy, std::exp(t) * vx + 1e-6);
    }
  }
}

TEST(Growth, ZeroSystemIsConstant) {
  const auto sys = examples::linear(Mat::Zero(1, 1), Mat::Zero(1, 1));
  const GrowthMargin eta(ScalarFun::linear(0.5));
  LyapunovConfig cfg;
  cfg.n_dist = 4;
  std::vector<double> M;
  for (int q = 1; q <= cfg.Q; ++q) M.push_back(theta(q, q, 0.0));
  const auto g = verify_growth(sys, eta, v1(0.8), v1(0.1), cfg, M);
  EXPECT_TRUE(g.pass());
  EXPECT_NEAR(g.dini_V, 0.0, 1e-12);
  EXPECT_GE(g.V, 1.0);
}

TEST(LyapunovConfig, Validation) {
  LyapunovConfig cfg;
  cfg.dini_h_ladder = {1e-3, 1e-2};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.Q = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

}  // namespace
}  // namespace brslab
