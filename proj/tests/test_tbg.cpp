#include <cmath>

#include <gtest/gtest.h>

#include "ptalloc/tbg.hpp"

using namespace ptalloc;

namespace {

// composite Simpson on a graded mesh; the blow-up gain piles up near t_pre
double quadrature(const TbgSpec& s, double a, double b, int n = 200000) {
  auto f = [&](double t) { return gain(s, t, TbgBranch::Settling); };
  double acc = 0.0;
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    const double x0 = a + i * h;
    acc += h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h));
  }
  return acc;
}

}  // namespace

TEST(Tbg, GainExamples) {
  EXPECT_DOUBLE_EQ(gain({TbgKind::Quadratic, 3.0}, 1.0), 24.0);
  EXPECT_DOUBLE_EQ(gain({TbgKind::ConstantBoost, 3.0}, 5.0), 1.0);
  EXPECT_DOUBLE_EQ(gain({TbgKind::ConstantBoost, 3.0}, 1.0), 30.0);
  EXPECT_DOUBLE_EQ(gain({TbgKind::PolynomialBlowup, 2.0, 1e-7}, 0.0), 1.0);
  EXPECT_NEAR(gain({TbgKind::PolynomialBlowup, 2.0, 1e-7}, 2.0, TbgBranch::Settling), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(gain({TbgKind::Quadratic, 3.0}, 3.0), 1.0);
}

TEST(Tbg, NegativeTimeRejected) {
  EXPECT_THROW(gain({TbgKind::Quadratic, 3.0}, -0.1), Error);
}

TEST(Tbg, GaugeExamples) {
  EXPECT_NEAR(gauge_increment({TbgKind::Quadratic, 3.0}, 0.0, 3.0), 108.0, 1e-12);
  EXPECT_NEAR(gauge_increment({TbgKind::ConstantBoost, 3.0}, 0.0, 2.0), 60.0, 1e-12);
  EXPECT_NEAR(gauge_increment({TbgKind::Quadratic, 3.0}, 3.0, 5.0), 2.0, 1e-12);
  EXPECT_THROW(gauge_increment({TbgKind::Quadratic, 3.0}, 2.0, 1.0), Error);
}

TEST(Tbg, BlowupGaugeMatchesQuadrature) {
  for (double eps : {1e-2, 1e-4}) {
    const TbgSpec s{TbgKind::PolynomialBlowup, 2.0, eps};
    const double closed = 2.0 + std::log((1.0 + eps) / eps);
    EXPECT_NEAR(gauge_increment(s, 0.0, 2.0), closed, 1e-9);
    EXPECT_NEAR(quadrature(s, 0.0, 2.0), closed, 1e-6 * closed);
    EXPECT_NEAR(quadrature(s, 0.3, 1.1), gauge_increment(s, 0.3, 1.1), 1e-8);
  }
}

TEST(Tbg, GaugeIsIntegralOfGain) {
  for (auto kind : {TbgKind::Quadratic, TbgKind::ConstantBoost}) {
    const TbgSpec s{kind, 3.0};
    EXPECT_NEAR(quadrature(s, 0.5, 2.5, 2000), gauge_increment(s, 0.5, 2.5), 1e-9);
  }
}

TEST(Tbg, ErrorBoundExamples) {
  EXPECT_DOUBLE_EQ(error_bound(1, 1, 1, 0), 1.0);
  EXPECT_DOUBLE_EQ(error_bound(1, 0, 1, 5), 0.0);
  EXPECT_NEAR(error_bound(2, 4, 1, std::log(4.0)), 0.5, 1e-14);
  EXPECT_THROW(error_bound(1, 1, 0, 1), Error);
}

TEST(Tbg, BoundCertification) {
  const auto b = make_bound({TbgKind::Quadratic, 3.0}, 0.1, 4.0, 1.0);
  EXPECT_TRUE(b.certified());
  EXPECT_NEAR(b.gamma_at_tpre, 108.0, 1e-12);
  EXPECT_NEAR(b.epsilon_bound, std::sqrt(std::exp(-10.8) * 4.0), 1e-14);
  EXPECT_FALSE(make_bound({TbgKind::Quadratic, 3.0}, -0.1, 4.0, 1.0).certified());
}
