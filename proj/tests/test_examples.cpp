#include <cmath>

#include <gtest/gtest.h>

#include "brslab/brscheck.hpp"
#include "brslab/examples.hpp"
#include "brslab/rng.hpp"
#include "brslab/semigroup.hpp"

namespace brslab {
namespace {

const double kLn3 = std::log(3.0);

Vec v1(double a) { return Vec::Constant(1, a); }

TEST(Sigma1, CubeRootAtLn3) {
  const auto ex = examples::make("sigma1");
  for (double x : {1.0, -1.0, 0.729, -0.729, 0.125, -0.125}) {
    const double got = integrate(ex.sys, v1(x), InputSignal::constant(v1(1.0)), kLn3).final_state()[0];
    EXPECT_NEAR(got, std::cbrt(x), 1e-6);
  }
}

TEST(Sigma1, EtaPaperIsLip1) {
  const auto eta = examples::eta_paper();
  EXPECT_TRUE(eta.is(FunClass::Lip1));
  EXPECT_LE(eta.max_slope(), 1.0);
  const auto& k = eta.knots();
  const auto& v = eta.values();
  for (std::size_t i = 1; i < k.size(); ++i) EXPECT_LE((v[i] - v[i - 1]) / (k[i] - k[i - 1]), 1.0);
  for (std::size_t i = 0; i < k.size(); i += 50) EXPECT_DOUBLE_EQ(eta(k[i]), examples::eta_paper_exact(k[i]));
  EXPECT_NEAR(eta(examples::kInvE), 0.5 * examples::kInvE, 1e-15);
}

TEST(Sigma2, MatchesSigma1WithUnitInput) {
  const auto s1 = examples::sigma1(), s2 = examples::sigma2();
  for (double x : {-1.5, -0.3, 0.2, 0.9, 2.0}) {
    const double a = integrate(s2, v1(x), InputSignal::zero(1), 1.3).final_state()[0];
    const double b = integrate(s1, v1(x), InputSignal::constant(v1(1.0)), 1.3).final_state()[0];
    EXPECT_NEAR(a, b, 1e-9);
  }
}

TEST(Registry, RhsFormulas) {
  Rng rng(12);
  const auto s1 = examples::sigma1(), s2 = examples::sigma2(), q = examples::quadratic();
  const auto rd = examples::reaction_diffusion(8);
  const Mat L = examples::laplacian(8);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-3.0, 3.0), u = rng.uniform(-3.0, 3.0);
    const double expect = -std::abs(u) * x * std::log(std::abs(x));
    EXPECT_NEAR(s1.rhs(v1(x), v1(u))[0], expect, 1e-12 * (1.0 + std::abs(expect)));
    EXPECT_NEAR(s2.rhs(v1(x), v1(u))[0], -x * std::log(std::abs(x)), 1e-12 * (1.0 + std::abs(x)));
    EXPECT_DOUBLE_EQ(q.rhs(v1(x), v1(u))[0], x * x);
    const Vec z = rng.in_ball(8, 2.0);
    Vec want = L * z + Vec::Constant(8, u / std::sqrt(8.0));
    for (int k = 0; k < 8; ++k) want[k] -= z[k] * z[k] * z[k] / (1.0 + z[k] * z[k]);
    EXPECT_LE((rd.rhs(z, v1(u)) - want).norm(), 1e-10 * (1.0 + want.norm()));
  }
  EXPECT_EQ(s1.rhs(v1(0.0), v1(1.0))[0], 0.0);
}

TEST(Sigma1, ClosedLoopDerivativeBound) {
  // |d/dx f(x, d eta(|x|))| <= max(|x|, x^2), checked by central differences
  const auto cl = closed_loop(examples::sigma1(), GrowthMargin(examples::eta_paper()));
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(-3.0, 3.0), d = rng.uniform(-1.0, 1.0);
    const double h = 1e-6 * std::max(1e-3, std::abs(x));
    const double g = (cl.rhs(v1(x + h), v1(d))[0] - cl.rhs(v1(x - h), v1(d))[0]) / (2.0 * h);
    EXPECT_LE(std::abs(g), std::max(std::abs(x), x * x) * (1.0 + 1e-3) + 1e-6) << "x = " << x;
  }
  const auto hint = examples::sigma1().lipschitz_hint();
  EXPECT_EQ(hint(0.5), 0.5);
  EXPECT_EQ(hint(2.0), 4.0);
}

TEST(ReactionDiffusion, NoBlowUpAndProbeWithinGronwall) {
  const auto ex = examples::make("reaction_diffusion");
  const auto sg = semigroup_growth(*ex.sys.linear_part());
  EXPECT_LT(sg.lambda, 0.0);
  EXPECT_NEAR(sg.M, 1.0, 1e-6);
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    const Vec x0 = rng.in_ball(ex.sys.state_dim(), 1.0);
    const InputSignal u = random_input(rng, 1, 1.0, 1.0, 3);
    EXPECT_FALSE(integrate(ex.sys, x0, u, 1.0, ex.integrator).blew_up);
  }
  ProbeConfig pc;
  pc.tdi.integrator = ex.integrator;
  const auto rep = probe_lipschitz_tdi(ex.sys, ex.eta, 1.0, 1.0, 6, 3, pc);
  EXPECT_FALSE(rep.diverged);
  EXPECT_LE(rep.L_estimate, 1.1 * gronwall_envelope(sg.M, sg.lambda, ex.sys.lipschitz_hint()(1.0), 1.0));
}

TEST(Registry, MakeAndList) {
  const auto j = examples::list();
  ASSERT_EQ(j.size(), examples::names().size());
  for (const auto& e : j) {
    EXPECT_TRUE(e.contains("name"));
    EXPECT_GE(e["state_dim"].get<int>(), 1);
    EXPECT_FALSE(e["properties"].empty());
  }
  const auto lin = examples::make("linear", {{"A", {{-1.0, 0.0}, {0.0, -2.0}}}});
  EXPECT_EQ(lin.sys.state_dim(), 2);
  EXPECT_EQ(lin.sys.input_dim(), 1);
  EXPECT_THROW(examples::make("nope"), std::invalid_argument);
  EXPECT_THROW(examples::make("linear", {{"A", {{1.0, 2.0}}}}), std::invalid_argument);
}

}  // namespace
}  // namespace brslab
