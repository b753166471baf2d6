#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "brslab/examples.hpp"
#include "brslab/io.hpp"
#include "brslab/tdinput.hpp"

namespace brslab {
namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

class Sigma1Tdi : public ::testing::Test {
 protected:
  SystemDef sys = examples::sigma1();
  GrowthMargin eta{examples::eta_paper()};
  TdiConfig cfg;
};

TEST(GrowthMargin, RequiresKinfLip1) {
  EXPECT_NO_THROW(GrowthMargin(ScalarFun::linear(0.5)));
  EXPECT_THROW(GrowthMargin(ScalarFun::linear(2.0)), std::invalid_argument);
  EXPECT_THROW(GrowthMargin(ScalarFun({0.0, 1.0}, {0.0, 0.5}, 0.5)), std::invalid_argument);
}

TEST(DisturbanceSignal, UnitBall) {
  EXPECT_NO_THROW(DisturbanceSignal(InputSignal::constant(v1(-1.0))));
  EXPECT_THROW(DisturbanceSignal(InputSignal::constant(v1(1.5))), std::invalid_argument);
}

TEST_F(Sigma1Tdi, ClosedLoopPiecewiseFormula) {
  const auto cl = closed_loop(sys, eta);
  const auto& k = eta.fun().knots();
  for (std::size_t i = 1; i < k.size(); i += 7) {
    for (double sign : {-1.0, 1.0}) {
      for (double d : {-1.0, -0.3, 0.6, 1.0}) {
        const double x = sign * k[i];
        EXPECT_NEAR(cl.rhs(v1(x), v1(d))[0], examples::sigma1_closed_loop_exact(x, std::abs(d)), 1e-12);
      }
    }
  }
  for (double x : {0.5, 0.9, 1.0, 1.7, -2.5}) {
    EXPECT_NEAR(cl.rhs(v1(x), v1(1.0))[0], -0.5 * x * std::abs(x) * std::log(std::abs(x)), 1e-12);
  }
  for (double x : {-0.3, 0.2, 1.5}) EXPECT_EQ(cl.rhs(v1(x), v1(0.0))[0], sys.rhs(v1(x), v1(0.0))[0]);
}

TEST_F(Sigma1Tdi, LiftClosedForm) {
  const auto lift = lift_disturbance(sys, eta, v1(0.1), DisturbanceSignal(InputSignal::constant(v1(1.0))), 1.0, cfg);
  EXPECT_NEAR(lift.traj.final_state()[0], 0.10526315789473684, 1e-6);
  EXPECT_EQ(lift.traj.times.back(), 1.0);
}

TEST_F(Sigma1Tdi, LiftOfZeroIsZero) {
  const auto lift = lift_disturbance(sys, eta, v1(0.4), DisturbanceSignal::zero(1), 2.0, cfg);
  EXPECT_EQ(lift.u.sup_norm(), 0.0);
  for (const auto& s : lift.traj.states) EXPECT_EQ(s[0], 0.4);
}

TEST_F(Sigma1Tdi, LiftedInputsAreMembers) {
  for (std::size_t i = 0; i < 12; ++i) {
    const auto d = sample_disturbance(1, 3.0, i, 77);
    const Vec x0 = v1(-1.8 + 0.3 * static_cast<double>(i));
    const auto lift = lift_disturbance(sys, eta, x0, d, 3.0, cfg);
    const auto rep = check_membership(sys, eta, x0, lift.u, 3.0, lift.grid, cfg);
    EXPECT_TRUE(rep.is_member) << "violation " << rep.max_violation;
    for (std::size_t k = 0; k < lift.traj.size(); ++k)
      EXPECT_LE(lift.u(lift.traj.times[k]).norm(), eta(lift.traj.states[k].norm()) + 1e-12);
  }
}

TEST_F(Sigma1Tdi, Membership) {
  EXPECT_TRUE(check_membership(sys, eta, v1(0.7), InputSignal::zero(1), 2.0, {}, cfg).is_member);
  const auto rep = check_membership(sys, eta, v1(0.5), InputSignal::constant(v1(1.0)), 2.0, {}, cfg);
  EXPECT_FALSE(rep.is_member);
  EXPECT_GT(rep.max_violation, 0.4);
}

TEST_F(Sigma1Tdi, ProjectZero) {
  const auto d = project_input(sys, eta, v1(0.3), InputSignal::zero(1), 2.0, cfg);
  EXPECT_EQ(d.signal().sup_norm(), 0.0);
}

TEST_F(Sigma1Tdi, ProjectRejectsUndominatedInput) {
  EXPECT_THROW(project_input(sys, eta, v1(0.5), InputSignal::constant(v1(1.0)), 1.0, cfg), DominanceError);
  try {
    project_input(sys, eta, v1(0.0), InputSignal::constant(v1(0.1)), 1.0, cfg);
    FAIL() << "expected a dominance error";
  } catch (const DominanceError& e) {
    EXPECT_EQ(e.time(), 0.0);
  }
}

TEST_F(Sigma1Tdi, BijectionRoundTrip) {
  for (std::size_t i = 0; i < 10; ++i) {
    const auto d = sample_disturbance(1, 3.0, i, 5);
    const Vec x0 = v1(i % 2 == 0 ? 0.2 + 0.15 * static_cast<double>(i) : -0.1 * static_cast<double>(i));
    const auto lift = lift_disturbance(sys, eta, x0, d, 3.0, cfg);
    IntegratorConfig ic = cfg.integrator;
    ic.dense_output_grid = lift.grid;
    const auto open = integrate(sys, x0, lift.u, 3.0, ic);
    ASSERT_EQ(open.size(), lift.traj.size());
    for (std::size_t k = 0; k < open.size(); ++k)
      EXPECT_LE((open.states[k] - lift.traj.states[k]).norm(), 1e-5);
    const auto back = project_input(sys, eta, x0, lift.u, lift.grid, cfg);
    for (double t : lift.grid) {
      EXPECT_LE(back(t).norm(), 1.0 + 1e-9);
      if (eta(open.states[0].norm()) > 1e-6) {
        EXPECT_NEAR(back(t)[0], d(t)[0], 1e-6);
      }
    }
    const auto again = lift_disturbance(sys, eta, x0, back, lift.grid, cfg);
    for (std::size_t k = 0; k < open.size(); ++k)
      EXPECT_LE((again.traj.states[k] - open.states[k]).norm(), 1e-5);
  }
}

TEST(SampleDisturbances, OrderAndDeterminism) {
  const auto one = sample_disturbances(1, 2.0, 1, 3);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].signal().sup_norm(), 0.0);
  const auto a = sample_disturbances(2, 2.0, 12, 3);
  const auto b = sample_disturbances(2, 2.0, 12, 3);
  EXPECT_EQ(a[1](0.0)[0], 1.0);
  EXPECT_EQ(a[2](0.0)[0], -1.0);
  EXPECT_EQ(a[3](0.0)[1], 1.0);
  EXPECT_EQ(a[4](0.0)[1], -1.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].signal().breakpoints(), b[i].signal().breakpoints());
    for (std::size_t k = 0; k < a[i].signal().segment_count(); ++k) {
      EXPECT_EQ(a[i].signal().values()[k], b[i].signal().values()[k]);
      if (i > 4) {
        EXPECT_NEAR(a[i].signal().values()[k].norm(), 1.0, 1e-12);
      }
    }
  }
  // prefix preserved when n grows
  const auto c = sample_disturbances(2, 2.0, 24, 3);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].signal().breakpoints(), c[i].signal().breakpoints());
}

TEST_F(Sigma1Tdi, SampleTdi) {
  const auto s1 = sample_tdi(sys, eta, v1(0.6), 2.0, 6, 9, cfg);
  TdiConfig par = cfg;
  par.workers = 3;
  const auto s2 = sample_tdi(sys, eta, v1(0.6), 2.0, 6, 9, par);
  ASSERT_EQ(s1.size(), 6u);
  EXPECT_EQ(s1[0].lift.u.sup_norm(), 0.0);
  for (std::size_t i = 0; i < s1.size(); ++i) {
    EXPECT_EQ(s1[i].lift.traj.final_state()[0], s2[i].lift.traj.final_state()[0]);
    EXPECT_TRUE(check_membership(sys, eta, v1(0.6), s1[i].lift.u, 2.0, s1[i].lift.grid, cfg).is_member);
  }
}

TEST_F(Sigma1Tdi, CsvBundle) {
  const auto s = sample_tdi(sys, eta, v1(0.6), 1.0, 3, 2, cfg);
  const auto dir = std::filesystem::temp_directory_path() / "brslab_tdi_bundle";
  std::filesystem::remove_all(dir);
  io::save_tdi_samples(dir, s);
  for (int i = 0; i < 3; ++i) {
    std::ifstream f(dir / ("tdi_" + std::to_string(i) + ".csv"));
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "t,d0,u0,x0");
    std::size_t rows = 0;
    for (std::string line; std::getline(f, line);) rows += !line.empty();
    EXPECT_EQ(rows, s[i].lift.traj.size());
  }
  std::filesystem::remove_all(dir);
}

TEST(TimeGrid, NestsUnderDoubling) {
  const auto a = time_grid(3.7, 50);
  const auto b = time_grid(3.7, 100);
  for (double t : a) EXPECT_TRUE(std::binary_search(b.begin(), b.end(), t)) << t;
  EXPECT_EQ(a.back(), 3.7);
}

}  // namespace
}  // namespace brslab
