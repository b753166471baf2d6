#include <gtest/gtest.h>

#include "brslab/rng.hpp"
#include "brslab/signal.hpp"

namespace brslab {
namespace {

Vec v1(double a) { return Vec::Constant(1, a); }

TEST(InputSignal, Evaluation) {
  EXPECT_EQ(InputSignal::constant(v1(1.0))(5.0)[0], 1.0);
  const InputSignal u({1.0}, {v1(2.0), v1(3.0)});
  EXPECT_EQ(u(1.0)[0], 3.0);
  EXPECT_EQ(u(0.999)[0], 2.0);
  EXPECT_THROW(u(-0.1), std::domain_error);
}

TEST(InputSignal, Validation) {
  EXPECT_THROW(InputSignal({1.0}, {v1(1.0)}), std::invalid_argument);
  EXPECT_THROW(InputSignal({2.0, 1.0}, {v1(1.0), v1(1.0), v1(1.0)}), std::invalid_argument);
  EXPECT_THROW(InputSignal({0.0}, {v1(1.0), v1(1.0)}), std::invalid_argument);
}

TEST(InputSignal, SupNorm) {
  const InputSignal u({1.0, 2.0}, {v1(0.5), v1(-3.0), v1(1.0)});
  EXPECT_EQ(u.sup_norm(), 3.0);
  EXPECT_EQ(u.sup_norm(1.0), 0.5);
  EXPECT_EQ(u.sup_norm(1.5), 3.0);
}

TEST(Concat, ZeroSplice) {
  const InputSignal u({1.0}, {v1(2.0), v1(3.0)});
  const InputSignal v({0.5}, {v1(7.0), v1(8.0)});
  const auto w = concat(u, v, 0.0);
  EXPECT_EQ(w(0.2)[0], 7.0);
  EXPECT_EQ(w(0.7)[0], 8.0);
}

TEST(Concat, MatchesDefinition) {
  Rng rng(3);
  const InputSignal u({0.4, 1.1, 2.5}, {v1(1.0), v1(-2.0), v1(3.0), v1(4.0)});
  const InputSignal v({0.3, 0.9}, {v1(5.0), v1(6.0), v1(-7.0)});
  for (double t : {0.4, 1.0, 2.7}) {
    const auto w = concat(u, v, t);
    for (int i = 0; i < 100; ++i) {
      const double s = rng.uniform(0.0, 5.0);
      if (s < t)
        EXPECT_EQ(w(s)[0], u(s)[0]);
      else
        EXPECT_EQ(w(s)[0], v(s - t)[0]);
    }
    EXPECT_EQ(w(t)[0], v(0.0)[0]);
  }
}

TEST(Concat, WithZeroKeepsSupNorm) {
  const InputSignal u({0.4, 1.1, 2.5}, {v1(1.0), v1(-2.0), v1(3.0), v1(4.0)});
  for (double t : {0.2, 1.0, 2.0, 3.0}) {
    EXPECT_EQ(concat(u, InputSignal::zero(1), t).sup_norm(), u.sup_norm(t));
  }
}

TEST(InputSignal, Shift) {
  const InputSignal u({0.4, 1.1}, {v1(1.0), v1(2.0), v1(3.0)});
  const auto s = u.shifted(0.5);
  EXPECT_EQ(s(0.0)[0], 2.0);
  EXPECT_EQ(s(0.59)[0], 2.0);
  EXPECT_EQ(s(0.61)[0], 3.0);
}

TEST(Rng, DeterministicStreams) {
  Rng a(split_seed(1, 2)), b(split_seed(1, 2)), c(split_seed(1, 3));
  EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(a.next(), c.next());
  Rng r(9);
  for (int i = 0; i < 100; ++i) EXPECT_LE(r.in_ball(3, 2.0).norm(), 2.0);
}

TEST(ParallelFor, SameResultForAnyWorkerCount) {
  std::vector<double> a(100), b(100);
  parallel_for(100, 1, [&](std::size_t i) { a[i] = Rng(split_seed(5, i)).uniform(); });
  parallel_for(100, 4, [&](std::size_t i) { b[i] = Rng(split_seed(5, i)).uniform(); });
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace brslab
