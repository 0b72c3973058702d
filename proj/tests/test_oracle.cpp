#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ptalloc/oracle.hpp"

using namespace ptalloc;

namespace {

std::vector<ScalarFn> quad_grads(const std::vector<std::pair<double, double>>& ab) {
  std::vector<ScalarFn> g;
  for (auto [a, b] : ab) g.push_back([a, b](double x) { return 2 * a * x + b; });
  return g;
}

// N = 2, K = 2 desk instance
struct Desk {
  std::vector<std::vector<ObjectiveFn>> obj = {{Quadratic{0.5, 1, 2}, Quadratic{1, 0.5, 1}},
                                               {Quadratic{1, 0.5, 3}, Quadratic{0.4, 1.5, 2}}};
  std::vector<Interval> bounds = {Interval(1, 9), Interval(1, 9)};
  Problem problem() const {
    Problem p;
    Matrix a(2, 2);
    a << 0, 1, 1, 0;
    p.network = build_network(a);
    p.bounds = bounds;
    p.demand = {5, 5};
    p.objectives = obj;
    p.objective_names = {"a", "b"};
    p.p = 2;
    return p;
  }
};

}  // namespace

TEST(Dispatch, SymmetricSplit) {
  const auto g = quad_grads({{1, 2}, {1, 2}});
  const std::vector<Interval> b = {Interval(0, 10), Interval(0, 10)};
  const auto s = solve_dispatch(g, b, 7.0);
  EXPECT_NEAR(s.x_star[0], 3.5, 1e-10);
  EXPECT_NEAR(s.x_star[1], 3.5, 1e-10);
  EXPECT_NEAR(s.multiplier, 9.0, 1e-8);
}

TEST(Dispatch, AllAtLowerBounds) {
  const auto g = quad_grads({{1, 0}, {2, 1}, {0.5, 3}});
  const std::vector<Interval> b = {Interval(1, 4), Interval(2, 5), Interval(0, 3)};
  const auto s = solve_dispatch(g, b, 3.0);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.x_star[i], b[i].lower, 1e-9);
  for (auto a : s.active_bounds) EXPECT_EQ(a, ActiveBound::Lower);
}

TEST(Dispatch, InfeasibleAndNonMonotone) {
  const std::vector<Interval> b = {Interval(0, 1), Interval(0, 1)};
  try {
    solve_dispatch(quad_grads({{1, 0}, {1, 0}}), b, 3.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InfeasibleDemand);
  }
  try {
    solve_dispatch(quad_grads({{-1, 0}, {1, 0}}), b, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NonMonotoneGradient);
  }
}

TEST(Dispatch, ClosedFormInterior) {
  // 2 a_i x_i + b_i = λ, Σ x_i = D
  const std::vector<std::pair<double, double>> ab = {{0.5, 1}, {1, 2}, {0.25, -1}};
  const auto g = quad_grads(ab);
  const std::vector<Interval> b(3, Interval(-100, 100));
  const double d = 12.0;
  double sa = 0, sb = 0;
  for (auto [a, bb] : ab) {
    sa += 1 / (2 * a);
    sb += bb / (2 * a);
  }
  const double lambda = (d + sb) / sa;
  const auto s = solve_dispatch(g, b, d);
  EXPECT_NEAR(s.multiplier, lambda, 1e-9);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s.x_star[i], (lambda - ab[i].second) / (2 * ab[i].first), 1e-9);
}

TEST(Dispatch, AgreesWithProjectedGradientOnRandomInstances) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> nn(2, 8);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = nn(rng);
    std::vector<std::pair<double, double>> ab;
    std::vector<Interval> b;
    double lo = 0, hi = 0;
    for (int i = 0; i < n; ++i) {
      ab.emplace_back(0.05 + u(rng), 10 * u(rng) - 5);
      const double l = 20 * u(rng), w = 1 + 20 * u(rng);
      b.emplace_back(l, l + w);
      lo += l;
      hi += l + w;
    }
    const double d = lo + u(rng) * (hi - lo);
    const auto g = quad_grads(ab);
    const auto a = solve_dispatch(g, b, d);
    const auto p = solve_dispatch_projected_gradient(g, b, d);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(a.x_star[i], p.x_star[i], 1e-6);
    EXPECT_LT(verify_kkt(a, g, b, d).worst(), 1e-7);
  }
}

TEST(Dispatch, SimplexBoxProjection) {
  const std::vector<Interval> b = {Interval(0, 1), Interval(0, 1), Interval(0, 1)};
  const std::vector<double> v = {2, 0.5, -1};
  const auto x = project_simplex_box(v, b, 1.5);
  EXPECT_NEAR(std::accumulate(x.begin(), x.end(), 0.0), 1.5, 1e-12);
  EXPECT_NEAR(x[0], 1.0, 1e-12);
  EXPECT_NEAR(x[1], 0.5, 1e-12);
  EXPECT_NEAR(x[2], 0.0, 1e-12);
}

TEST(Ideal, Examples) {
  auto p = ideal_point(Quadratic{1, 0, 0}, Interval(-10, 10));
  EXPECT_NEAR(p.x, 0.0, 1e-9);
  EXPECT_NEAR(p.value, 0.0, 1e-15);
  p = ideal_point(Quadratic{0.086, 3.482, 3.481}, Interval(100, 140));
  EXPECT_EQ(p.x, 100.0);
  EXPECT_NEAR(p.value, 1211.681, 1e-9);
  p = ideal_point(Technical{0.3, 117.0}, Interval(100, 140));
  EXPECT_NEAR(p.x, 117.0, 1e-9);
  EXPECT_NEAR(p.value, 0.0, 1e-12);
}

TEST(Kkt, PerturbationFlagsBalance) {
  const auto g = quad_grads({{1, 2}, {1, 2}});
  const std::vector<Interval> b = {Interval(0, 10), Interval(0, 10)};
  auto s = solve_dispatch(g, b, 7.0);
  EXPECT_LT(verify_kkt(s, g, b, 7.0).worst(), 1e-7);
  s.x_star[0] += 1.0;
  const auto r = verify_kkt(s, g, b, 7.0);
  EXPECT_NEAR(r.balance, 1.0, 1e-9);
  EXPECT_FALSE(r.ok(1e-3));
}

TEST(Pareto, DeskCompromiseIsPareto) {
  Desk desk;
  const auto prob = desk.problem();
  const auto ref = solve_reference(prob);
  const auto r = pareto_check(ref.compromise.x_star, desk.obj, ref.weights, desk.bounds, 10.0, 0.01);
  EXPECT_TRUE(r.pareto);
  EXPECT_GE(r.grid_points, 700u);
  // unit weights too
  const std::vector<std::vector<double>> ones(2, std::vector<double>(2, 1.0));
  EXPECT_TRUE(pareto_check(ref.compromise.x_star, desk.obj, ones, desk.bounds, 10.0, 0.01).pareto);
}

TEST(Pareto, SuboptimalAllocationDominated) {
  Desk desk;
  const std::vector<std::vector<double>> ones(2, std::vector<double>(2, 1.0));
  // both network objectives fall when agent 1 takes more than 1 kW
  const std::vector<double> bad = {1.0, 9.0};
  const auto r = pareto_check(bad, desk.obj, ones, desk.bounds, 10.0, 0.01);
  EXPECT_FALSE(r.pareto);
  EXPECT_EQ(r.dominating.size(), 2u);
}

TEST(Pareto, SingleObjectiveIsOptimality) {
  const std::vector<std::vector<ObjectiveFn>> obj = {{Quadratic{0.5, 1, 0}}, {Quadratic{1, 0.5, 0}}};
  const std::vector<Interval> b = {Interval(1, 9), Interval(1, 9)};
  const auto s = solve_dispatch(quad_grads({{0.5, 1}, {1, 0.5}}), b, 10.0);
  const std::vector<std::vector<double>> w = {{1.0}, {1.0}};
  EXPECT_TRUE(pareto_check(s.x_star, obj, w, b, 10.0, 0.01).pareto);
  const std::vector<double> off = {s.x_star[0] + 0.5, s.x_star[1] - 0.5};
  EXPECT_FALSE(pareto_check(off, obj, w, b, 10.0, 0.01).pareto);
}

TEST(Pareto, CoarseGridRejected) {
  Desk desk;
  const std::vector<std::vector<double>> ones(2, std::vector<double>(2, 1.0));
  EXPECT_THROW(pareto_check(std::vector<double>{5, 5}, desk.obj, ones, desk.bounds, 10.0, 0.5), Error);
}

TEST(Reference, DeskWeightsAndIdeals) {
  Desk desk;
  const auto ref = solve_reference(desk.problem());
  // sub-optima: x1 = 6.5 (first), x1 = 45/14 (second)
  EXPECT_NEAR(ref.subproblems[0].x_star[0], 6.5, 1e-9);
  EXPECT_NEAR(ref.subproblems[1].x_star[0], 45.0 / 14.0, 1e-9);
  // ideal points at the lower bound: all gradients positive on [1, 9]
  EXPECT_NEAR(ref.ideal_points[0][0].value, 3.5, 1e-12);
  EXPECT_NEAR(ref.ideal_points[1][1].value, 3.9, 1e-12);
  for (const auto& w : ref.weights) EXPECT_NEAR(w[0] + w[1], 1.0, 1e-15);
  const double f11 = 0.5 * 6.5 * 6.5 + 6.5 + 2, f12 = 45.0 / 14 * 45.0 / 14 + 0.5 * 45.0 / 14 + 1;
  EXPECT_NEAR(ref.weights[0][0], f11 / (f11 + f12), 1e-9);
}
