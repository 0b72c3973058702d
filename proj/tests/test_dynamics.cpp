#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ptalloc/dynamics.hpp"
#include "ptalloc/scenario.hpp"

using namespace ptalloc;

namespace {

Problem make(std::vector<std::vector<ObjectiveFn>> obj, std::vector<Interval> b, std::vector<double> d, double p = 2) {
  Problem prob;
  const std::size_t n = obj.size();
  prob.network = build_network(n == 1 ? Matrix::Zero(1, 1) : ring_adjacency(n));
  prob.bounds = std::move(b);
  prob.demand = std::move(d);
  for (std::size_t k = 0; k < obj.front().size(); ++k) prob.objective_names.push_back("o" + std::to_string(k));
  prob.objectives = std::move(obj);
  prob.p = p;
  return prob;
}

SimConfig config(const Problem& prob, std::vector<double> x0) {
  SimConfig c;
  c.tbg_kind = TbgKind::ConstantBoost;
  c.sub_etm.assign(prob.n_objectives(), EtmParams{10, 0.1, 0.9, 0.1, 0.05, 5});
  c.comp_etm = {10, 0.1, 0.9, 0.1, 0.05, 5};
  c.x0 = std::move(x0);
  c.t_end = 6;
  c.window = 5;
  c.record_trajectory = false;
  return c;
}

}  // namespace

TEST(Rhs, ZeroAtEquilibrium) {
  const Interval dom(0, 10);
  const ObjectiveFn f = Quadratic{1, 2, 0};
  // x* = 3 interior, y* = ∇f = 8, z* = d - x* with consensus (lap = 0)
  const auto r = subproblem_rhs(dom, f, 5.0, 3.0, 8.0, 2.0, 0.0, 17.0);
  EXPECT_EQ(r.dx, 0.0);
  EXPECT_EQ(r.dmult, 0.0);
  EXPECT_EQ(r.daux, 0.0);
  // bound-active equilibrium: outward pull at the upper bound is cut
  const auto s = subproblem_rhs(dom, f, 12.0, 10.0, 25.0, 2.0, 0.0, 3.0);
  EXPECT_EQ(s.dx, 0.0);
  EXPECT_EQ(s.dmult, 0.0);
}

TEST(Rhs, Ideal) {
  EXPECT_EQ(ideal_rhs(Interval(-10, 10), Quadratic{1, 0, 0}, 0.0, 5.0), 0.0);
  EXPECT_DOUBLE_EQ(ideal_rhs(Interval(-10, 10), Quadratic{1, 0, 0}, 5.0, 2.0), -20.0);
  EXPECT_EQ(ideal_rhs(Interval(100, 140), Quadratic{0.086, 3.482, 3.481}, 100.0, 30.0), 0.0);
}

TEST(Rhs, CompromiseMirrorsSubproblemForOneObjective) {
  const Interval dom(0, 10);
  const std::vector<ObjectiveFn> fs = {Quadratic{1, 2, 0}};
  const std::vector<double> w = {1.0}, ideal = {-1.0};
  const PreferenceView u{1.0, w, ideal, fs};
  const auto a = compromise_rhs(dom, u, 5.0, 4.0, 7.0, 1.0, 0.3, 2.0);
  const auto b = subproblem_rhs(dom, fs[0], 5.0, 4.0, 7.0, 1.0, 0.3, 2.0);
  EXPECT_DOUBLE_EQ(a.dx, b.dx);
  EXPECT_DOUBLE_EQ(a.dmult, b.dmult);
  EXPECT_DOUBLE_EQ(a.daux, b.daux);
}

TEST(Simulator, SingleAgentSettlesOnDemand) {
  for (double d : {4.0, 10.0}) {
    const auto prob = make({{Quadratic{1, 0, 0}}}, {Interval(0, 10)}, {d});
    const auto res = run_algorithm1(prob, config(prob, {1.0}));
    const auto& lay = res.layout;
    EXPECT_NEAR(res.final_state[lay.sub(0, StateLayout::XBar, 0)], d, 1e-6);
    EXPECT_EQ(res.final_state[lay.sub(0, StateLayout::Z, 0)], 0.0);
    EXPECT_NEAR(res.final_state[lay.comp(StateLayout::X, 0)], d, 1e-6);
  }
}

TEST(Simulator, SymmetricPairSplitsEvenly) {
  const auto prob = make({{Quadratic{1, 1, 0}, Quadratic{0.5, 2, 1}}, {Quadratic{1, 1, 0}, Quadratic{0.5, 2, 1}}},
                         {Interval(0, 10), Interval(0, 10)}, {3, 3});
  auto cfg = config(prob, {1, 5});
  cfg.t_end = 25;
  const auto res = run_algorithm1(prob, cfg);
  const auto& lay = res.layout;
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_NEAR(res.final_state[lay.sub(0, StateLayout::XBar, i)], 3.0, 1e-3);
    EXPECT_NEAR(res.final_state[lay.sub(1, StateLayout::XBar, i)], 3.0, 1e-3);
    EXPECT_NEAR(res.final_state[lay.comp(StateLayout::X, i)], 3.0, 1e-3);
  }
  // the leftover is pure disagreement; the sum already matches demand
  const double sum = res.final_state[lay.comp(StateLayout::X, 0)] + res.final_state[lay.comp(StateLayout::X, 1)];
  EXPECT_NEAR(sum, 6.0, 1e-6);
}

TEST(Simulator, OneStepFromEquilibriumStaysPut) {
  const auto prob = make({{Quadratic{0.5, 1, 2}, Quadratic{1, 0.5, 1}},
                          {Quadratic{1, 0.5, 3}, Quadratic{0.4, 1.5, 2}},
                          {Quadratic{0.7, 0.2, 1}, Quadratic{0.3, 1.0, 2}}},
                         {Interval(1, 9), Interval(1, 9), Interval(1, 9)}, {4, 3, 5});
  const auto ref = solve_reference(prob);
  auto cfg = config(prob, {4, 3, 5});
  Simulator sim(prob, cfg);
  const auto lay = sim.layout();
  auto s = sim.state();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& sp = ref.subproblems[k];
      s[lay.sub(k, StateLayout::XBar, i)] = sp.x_star[i];
      s[lay.sub(k, StateLayout::Y, i)] = sp.multiplier;
      s[lay.sub(k, StateLayout::Z, i)] = prob.demand[i] - sp.x_star[i];
      s[lay.sub(k, StateLayout::XHat, i)] = ref.ideal_points[i][k].x;
    }
    s[lay.comp(StateLayout::X, i)] = ref.compromise.x_star[i];
    s[lay.comp(StateLayout::Nu, i)] = ref.compromise.multiplier;
    s[lay.comp(StateLayout::Mu, i)] = prob.demand[i] - ref.compromise.x_star[i];
  }
  sim.set_state(s);
  sim.step();
  const auto& after = sim.state();
  for (std::size_t j = 0; j < s.size(); ++j) {
    const std::size_t block = j / lay.n;
    const bool eta = block == lay.comp(StateLayout::Eta3, 0) / lay.n || (block < 5 * lay.k && block % 5 == StateLayout::Eta1);
    if (!eta) EXPECT_NEAR(after[j], s[j], 1e-7) << j;
  }
}

TEST(Simulator, SingleObjectiveCompromiseReproducesSubproblem) {
  const auto prob = make({{Quadratic{0.5, 1, 0}}, {Quadratic{1, 0.5, 0}}, {Quadratic{0.3, 2, 0}}},
                         {Interval(1, 9), Interval(1, 9), Interval(0, 6)}, {4, 3, 5}, 1.0);
  auto cfg = config(prob, {2, 7, 3});
  cfg.t_pre1 = cfg.t_pre2 = cfg.t_pre3 = 2.0;
  cfg.require_prescribed_order = false;
  cfg.record_trajectory = true;
  cfg.stride = 1;
  const auto res = run_algorithm1(prob, cfg);
  const auto& lay = res.layout;
  double worst = 0.0;
  for (const auto& smp : res.trajectory) {
    for (std::size_t i = 0; i < 3; ++i) {
      worst = std::max(worst, std::abs(smp.state[lay.sub(0, StateLayout::XBar, i)] - smp.state[lay.comp(StateLayout::X, i)]));
      worst = std::max(worst, std::abs(smp.state[lay.sub(0, StateLayout::Y, i)] - smp.state[lay.comp(StateLayout::Nu, i)]));
    }
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Simulator, PrescribedOrderEnforced) {
  const auto prob = make({{Quadratic{1, 0, 0}}, {Quadratic{1, 0, 0}}}, {Interval(0, 10), Interval(0, 10)}, {3, 3});
  auto cfg = config(prob, {1, 1});
  cfg.t_pre3 = cfg.t_pre1;
  try {
    Simulator sim(prob, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidPrescribedTimes);
  }
}

TEST(Simulator, TableRunInvariants) {
  const auto sc = apply_case(load_scenario(PTALLOC_SCENARIO_DIR "/table1.scenario"), "case1");
  const auto prob = make_problem(sc);
  const auto ref = solve_reference(prob);
  auto cfg = sc.sim;
  cfg.record_trajectory = false;
  const auto a = run_algorithm1(prob, cfg, &ref);
  const auto& m = a.metrics;
  EXPECT_GT(m.min_eta, 0.0);
  EXPECT_GE(m.min_eta_bound_ratio, 1.0 - 1e-6);
  EXPECT_LT(std::max(m.max_conservation_z, m.max_conservation_mu), 1e-6);
  EXPECT_LE(m.max_infeasibility, 1e-9);
  EXPECT_LE(m.max_weight_sum_dev, 1e-9);
  EXPECT_EQ(m.ordering_violations, 0u);
  EXPECT_GE(m.min_inter_event, cfg.step * (1 - 1e-9));
  ASSERT_NE(a.snapshot("t_pre3"), nullptr);
  EXPECT_EQ(a.snapshot("t_pre3")->t, 3.0);

  const auto b = run_algorithm1(prob, cfg, &ref);
  EXPECT_EQ(a.final_state, b.final_state);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t e = 0; e < a.events.size(); ++e) EXPECT_EQ(a.events[e].t, b.events[e].t);
}
