#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ptalloc/error.hpp"
#include "ptalloc/etm.hpp"
#include "ptalloc/objectives.hpp"
#include "ptalloc/oracle.hpp"
#include "ptalloc/problem.hpp"
#include "ptalloc/projection.hpp"
#include "ptalloc/tbg.hpp"

namespace ptalloc {

// ---------------------------------------------------------------------------
// Local right-hand sides. `lap_held` is Σ_j a_ij (held_i - held_j).

struct PrimalDualRate {
  double dx = 0.0;
  double dmult = 0.0;  // y or ν
  double daux = 0.0;   // z or μ
};

inline PrimalDualRate subproblem_rhs(const Interval& dom, const ObjectiveFn& f, double demand, double xbar,
                                     double y, double z, double lap_held, double gain) {
  return {project_tangent(dom, xbar, gain * (y - grad_objective(f, xbar))),
          gain * (-lap_held - z + demand - xbar), gain * lap_held};
}

inline double ideal_rhs(const Interval& dom, const ObjectiveFn& f, double xhat, double gain) {
  return project_tangent(dom, xhat, -gain * grad_objective(f, xhat));
}

inline PrimalDualRate compromise_rhs(const Interval& dom, const PreferenceView& u, double demand, double x,
                                     double nu, double mu, double lap_held, double gain,
                                     GapPolicy policy = GapPolicy::ClampNegative) {
  return {project_tangent(dom, x, gain * (nu - grad_preference(u, x, policy))),
          gain * (-lap_held - mu + demand - x), gain * lap_held};
}

// ---------------------------------------------------------------------------

struct SimConfig {
  TbgKind tbg_kind = TbgKind::Quadratic;
  double t_pre1 = 2.0;  // subproblem layer
  double t_pre2 = 2.0;  // ideal-point layer
  double t_pre3 = 3.0;  // compromise layer
  double epsilon_reg = 1e-7;
  double sigma = 0.0;

  EtmKind etm_kind = EtmKind::DynamicPaper;
  std::vector<EtmParams> sub_etm;  // one per objective
  EtmParams comp_etm;

  double step = 1e-3;              // event grid, also the nominal integration step
  int substeps = 1;                // RK4 substeps per grid step
  double stiffness_limit = 0.5;    // cap on substep length · gain
  bool saturate_eta = true;        // cap the η-equation measure at η/α
  double t_end = 15.0;
  double window = 5.0;             // events counted over (0, window]
  std::size_t stride = 10;
  bool record_trajectory = true;
  bool record_events = true;
  bool require_prescribed_order = true;
  bool enforce_invariants = true;  // throw on η ≤ 0 or conservation drift; off for reporting

  std::vector<double> x0;          // shared initial output for every layer
  double y0 = 0.0;
  double nu0 = 0.0;

  TbgSpec layer_tbg(int layer) const {
    const double tp = layer == 0 ? t_pre1 : layer == 1 ? t_pre2 : t_pre3;
    return {tbg_kind, tp, epsilon_reg, sigma};
  }
};

/// Flat state index map. Per objective k: x̄, y, z, η, x̂ blocks of N; then x, ν, μ, η.
struct StateLayout {
  std::size_t n = 0;
  std::size_t k = 0;

  enum SubVar : std::size_t { XBar = 0, Y = 1, Z = 2, Eta1 = 3, XHat = 4 };
  enum CompVar : std::size_t { X = 0, Nu = 1, Mu = 2, Eta3 = 3 };

  std::size_t sub(std::size_t obj, SubVar v, std::size_t i) const { return (obj * 5 + v) * n + i; }
  std::size_t comp(CompVar v, std::size_t i) const { return (k * 5 + v) * n + i; }
  std::size_t size() const { return (5 * k + 4) * n; }
};

struct EventRecord {
  double t = 0.0;
  int objective = -1;  // -1 for the compromise layer
  std::size_t agent = 0;
  double value = 0.0;
  bool counted = false;  // inside the metrics window and not the initial broadcast
};

struct TrajectorySample {
  double t = 0.0;
  std::vector<double> state;
};

struct RunMetrics {
  double window = 5.0;
  std::vector<std::vector<std::size_t>> sub_counts;  // [k][i]
  std::vector<std::size_t> comp_counts;              // [i]
  std::vector<std::size_t> agent_totals;
  std::size_t total_sub = 0;
  std::size_t total_comp = 0;
  std::size_t total = 0;

  double ce_at_tpre3 = std::numeric_limits<double>::quiet_NaN();
  double final_imbalance = 0.0;
  double min_inter_event = std::numeric_limits<double>::infinity();
  double min_eta = std::numeric_limits<double>::infinity();
  double min_eta_bound_ratio = std::numeric_limits<double>::infinity();
  double max_conservation_z = 0.0;
  double max_conservation_mu = 0.0;
  double max_weight_sum_dev = 0.0;
  double max_overshoot = 0.0;      // before the per-step re-clamp
  double max_infeasibility = 0.0;  // of accepted states
  std::size_t ordering_violations = 0;
  std::size_t max_slices = 1;     // stiffness substep multiplier
  double min_eval_step = std::numeric_limits<double>::infinity();
  double max_gain = 0.0;
  std::size_t steps = 0;
  double wall_seconds = 0.0;

  std::vector<double> x_final;
  std::optional<double> distance_to_oracle;  // ‖x_final - x*‖∞
  std::optional<double> distance_at_tpre3;
};

struct Snapshot {
  std::string label;
  double t = 0.0;
  std::vector<double> state;
};

struct SimulationResult {
  StateLayout layout;
  std::vector<TrajectorySample> trajectory;
  std::vector<EventRecord> events;
  std::vector<Snapshot> snapshots;  // at each prescribed time and at the end
  std::vector<double> final_state;
  RunMetrics metrics;

  const Snapshot* snapshot(const std::string& label) const {
    for (const auto& s : snapshots) {
      if (s.label == label) return &s;
    }
    return nullptr;
  }
};

/// ω_i^k from the subproblem estimates in `state`, written as [i][k].
inline std::vector<std::vector<double>> live_weights(const Problem& prob, const StateLayout& lay,
                                                     std::span<const double> state) {
  std::vector<std::vector<double>> w(lay.n, std::vector<double>(lay.k));
  std::vector<double> vals(lay.k);
  for (std::size_t i = 0; i < lay.n; ++i) {
    for (std::size_t k = 0; k < lay.k; ++k) {
      vals[k] = eval_objective(prob.objectives[i][k], state[lay.sub(k, StateLayout::XBar, i)]);
    }
    update_weights(vals, w[i]);
  }
  return w;
}

inline std::vector<double> compromise_outputs(const StateLayout& lay, std::span<const double> state) {
  std::vector<double> x(lay.n);
  for (std::size_t i = 0; i < lay.n; ++i) x[i] = state[lay.comp(StateLayout::X, i)];
  return x;
}

/// Fixed-step RK4 integration of all three layers on one clock, ETMs evaluated
/// on the step grid.
class Simulator {
 public:
  Simulator(const Problem& prob, SimConfig cfg) : prob_(prob), cfg_(std::move(cfg)) {
    prob_.check();
    lay_ = {prob_.n_agents(), prob_.n_objectives()};
    validate_config();
    for (int l = 0; l < 3; ++l) tbg_[l] = cfg_.layer_tbg(l);
    init_state();
  }

  const StateLayout& layout() const noexcept { return lay_; }
  const std::vector<double>& state() const noexcept { return s_; }
  double time() const noexcept { return t_; }
  bool done() const noexcept { return t_ >= cfg_.t_end - 1e-12; }
  const SimConfig& config() const noexcept { return cfg_; }

  // Overwrites the state (tests start from equilibria); broadcasts follow.
  void set_state(std::vector<double> s) {
    if (s.size() != s_.size()) throw Error(Errc::InvalidArgument, "state size mismatch");
    s_ = std::move(s);
    for (std::size_t k = 0; k < lay_.k; ++k) {
      for (std::size_t i = 0; i < lay_.n; ++i) held_sub_[k][i] = s_[lay_.sub(k, StateLayout::Y, i)];
    }
    for (std::size_t i = 0; i < lay_.n; ++i) held_comp_[i] = s_[lay_.comp(StateLayout::Nu, i)];
  }

  void step() {
    const double h = cfg_.step;
    double hh = h;
    for (double bp : breakpoints_) {
      if (t_ < bp - 1e-6 * h && t_ + hh > bp - 1e-6 * h) hh = bp - t_;
    }
    const double mid = t_ + 0.5 * hh;
    for (int l = 0; l < 3; ++l) branch_[l] = mid < tbg_[l].t_pre ? TbgBranch::Settling : TbgBranch::Settled;

    double gmax = 0.0;
    for (int l = 0; l < 3; ++l) {
      for (int j = 0; j <= 16; ++j) gmax = std::max(gmax, gain(tbg_[l], t_ + hh * j / 16.0, branch_[l]));
    }
    metrics_.max_gain = std::max(metrics_.max_gain, gmax);
    // Stiff stretches get extra RK4 substeps so h·T stays inside the stability
    // region; triggers are still sampled once per grid step.
    std::size_t slices = 1;
    if (cfg_.stiffness_limit > 0.0) {
      slices = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(hh * gmax / cfg_.stiffness_limit)));
    }
    metrics_.max_slices = std::max(metrics_.max_slices, slices);
    metrics_.min_eval_step = std::min(metrics_.min_eval_step, hh);
    const std::size_t nsub = static_cast<std::size_t>(std::max(1, cfg_.substeps)) * slices;
    const double hs = hh / static_cast<double>(nsub);
    const double t0 = t_;
    prepare_held_terms();
    for (std::size_t j = 0; j < nsub; ++j) {
      rk4(t0 + hs * static_cast<double>(j), hs);
      reclamp();
    }
    t_ = t0 + hh;
    for (double bp : breakpoints_) {
      if (std::abs(t_ - bp) < 1e-6 * h) t_ = bp;
    }
    check_state();
    evaluate_triggers();
    ++metrics_.steps;
    ++step_index_;
    update_metrics();
  }

  SimulationResult run(const ReferenceSolution* ref = nullptr) {
    const auto wall0 = std::chrono::steady_clock::now();
    while (!done()) step();
    SimulationResult res;
    res.layout = lay_;
    res.trajectory = std::move(trajectory_);
    res.events = std::move(events_);
    res.snapshots = std::move(snapshots_);
    res.snapshots.push_back({"final", t_, s_});
    res.final_state = s_;
    finish_metrics(res, ref);
    res.metrics.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return res;
  }

 private:
  void validate_config() {
    if (!(cfg_.step > 0.0) || !std::isfinite(cfg_.step)) throw Error(Errc::InvalidArgument, "step must be positive");
    if (!(cfg_.t_end > 0.0)) throw Error(Errc::InvalidArgument, "t_end must be positive");
    if (cfg_.t_pre1 <= 0.0 || cfg_.t_pre2 <= 0.0 || cfg_.t_pre3 <= 0.0) {
      throw Error(Errc::InvalidPrescribedTimes, "prescribed times must be positive");
    }
    if (cfg_.require_prescribed_order && !(cfg_.t_pre3 > std::max(cfg_.t_pre1, cfg_.t_pre2))) {
      throw Error(Errc::InvalidPrescribedTimes, "t_pre3 must exceed max(t_pre1, t_pre2)");
    }
    if (cfg_.sub_etm.size() != lay_.k) {
      throw Error(Errc::InvalidArgument, "need one subproblem ETM parameter set per objective");
    }
    if (cfg_.x0.size() != lay_.n) throw Error(Errc::InvalidArgument, "x0 needs one entry per agent");
    for (std::size_t i = 0; i < lay_.n; ++i) {
      if (!prob_.bounds[i].contains(cfg_.x0[i], kBoundaryTol)) {
        throw Error(Errc::InfeasibleState, "x0[" + std::to_string(i) + "] outside its bounds");
      }
    }
    if (cfg_.stride == 0) cfg_.stride = 1;
  }

  void init_state() {
    const std::size_t n = lay_.n, kc = lay_.k;
    s_.assign(lay_.size(), 0.0);
    for (std::size_t k = 0; k < kc; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        const double x0 = project_point(prob_.bounds[i], cfg_.x0[i]);
        s_[lay_.sub(k, StateLayout::XBar, i)] = x0;
        s_[lay_.sub(k, StateLayout::Y, i)] = cfg_.y0;
        s_[lay_.sub(k, StateLayout::Z, i)] = 0.0;
        s_[lay_.sub(k, StateLayout::Eta1, i)] = cfg_.sub_etm[k].eta0;
        s_[lay_.sub(k, StateLayout::XHat, i)] = x0;
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      s_[lay_.comp(StateLayout::X, i)] = project_point(prob_.bounds[i], cfg_.x0[i]);
      s_[lay_.comp(StateLayout::Nu, i)] = cfg_.nu0;
      s_[lay_.comp(StateLayout::Mu, i)] = 0.0;
      s_[lay_.comp(StateLayout::Eta3, i)] = cfg_.comp_etm.eta0;
    }

    held_sub_.assign(kc, std::vector<double>(n));
    held_comp_.assign(n, 0.0);
    sub_state_.assign(kc, std::vector<EtmState>(n));
    comp_state_.assign(n, EtmState{});
    for (std::size_t k = 0; k < kc; ++k) {
      for (std::size_t i = 0; i < n; ++i) {
        held_sub_[k][i] = s_[lay_.sub(k, StateLayout::Y, i)];
        sub_state_[k][i].initial_broadcast(held_sub_[k][i], cfg_.sub_etm[k].eta0);
        if (cfg_.record_events) events_.push_back({0.0, static_cast<int>(k), i, held_sub_[k][i], false});
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      held_comp_[i] = s_[lay_.comp(StateLayout::Nu, i)];
      comp_state_[i].initial_broadcast(held_comp_[i], cfg_.comp_etm.eta0);
      if (cfg_.record_events) events_.push_back({0.0, -1, i, held_comp_[i], false});
    }

    metrics_.window = cfg_.window;
    metrics_.sub_counts.assign(kc, std::vector<std::size_t>(n, 0));
    metrics_.comp_counts.assign(n, 0);

    breakpoints_ = {cfg_.t_pre1, cfg_.t_pre2, cfg_.t_pre3, cfg_.t_end};
    if (cfg_.window > 0.0 && cfg_.window < cfg_.t_end) breakpoints_.push_back(cfg_.window);
    std::sort(breakpoints_.begin(), breakpoints_.end());
    breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()), breakpoints_.end());

    lap_sub_.assign(kc, std::vector<double>(n));
    qbar_sub_.assign(kc, std::vector<double>(n));
    lap_comp_.assign(n, 0.0);
    qbar_comp_.assign(n, 0.0);
    k1_.assign(s_.size(), 0.0);
    k2_ = k3_ = k4_ = tmp_ = k1_;
    w_.assign(kc, 0.0);
    ideal_.assign(kc, 0.0);
    vals_.assign(kc, 0.0);

    update_metrics();
  }

  void prepare_held_terms() {
    const auto& net = prob_.network;
    for (std::size_t k = 0; k < lay_.k; ++k) {
      for (std::size_t i = 0; i < lay_.n; ++i) {
        lap_sub_[k][i] = net.laplacian_row(i, held_sub_[k]);
        qbar_sub_[k][i] = local_disagreement(net, i, held_sub_[k]);
      }
    }
    for (std::size_t i = 0; i < lay_.n; ++i) {
      lap_comp_[i] = net.laplacian_row(i, held_comp_);
      qbar_comp_[i] = local_disagreement(net, i, held_comp_);
    }
  }

  void rhs(double t, const std::vector<double>& s, std::vector<double>& ds) {
    const double g1 = gain(tbg_[0], t, branch_[0]);
    const double g2 = gain(tbg_[1], t, branch_[1]);
    const double g3 = gain(tbg_[2], t, branch_[2]);
    const auto& net = prob_.network;
    for (std::size_t i = 0; i < lay_.n; ++i) {
      const auto& dom = prob_.bounds[i];
      const double d = prob_.demand[i];
      const double lii = net.degree(i);
      for (std::size_t k = 0; k < lay_.k; ++k) {
        const auto& f = prob_.objectives[i][k];
        const double xb = project_point(dom, s[lay_.sub(k, StateLayout::XBar, i)]);
        const double y = s[lay_.sub(k, StateLayout::Y, i)];
        const auto r = subproblem_rhs(dom, f, d, xb, y, s[lay_.sub(k, StateLayout::Z, i)], lap_sub_[k][i], g1);
        ds[lay_.sub(k, StateLayout::XBar, i)] = r.dx;
        ds[lay_.sub(k, StateLayout::Y, i)] = r.dmult;
        ds[lay_.sub(k, StateLayout::Z, i)] = r.daux;
        ds[lay_.sub(k, StateLayout::Eta1, i)] =
            eta_derivative(cfg_.sub_etm[k], cfg_.etm_kind, g1, held_sub_[k][i] - y, qbar_sub_[k][i], lii,
                           s[lay_.sub(k, StateLayout::Eta1, i)], cfg_.saturate_eta);
        const double xh = project_point(dom, s[lay_.sub(k, StateLayout::XHat, i)]);
        ds[lay_.sub(k, StateLayout::XHat, i)] = ideal_rhs(dom, f, xh, g2);
        vals_[k] = eval_objective(f, xb);
        ideal_[k] = eval_objective(f, xh);
      }
      update_weights(vals_, w_);
      const PreferenceView u{prob_.p, w_, ideal_, prob_.objectives[i]};
      const double x = project_point(dom, s[lay_.comp(StateLayout::X, i)]);
      const double nu = s[lay_.comp(StateLayout::Nu, i)];
      const auto r = compromise_rhs(dom, u, d, x, nu, s[lay_.comp(StateLayout::Mu, i)], lap_comp_[i], g3);
      ds[lay_.comp(StateLayout::X, i)] = r.dx;
      ds[lay_.comp(StateLayout::Nu, i)] = r.dmult;
      ds[lay_.comp(StateLayout::Mu, i)] = r.daux;
      ds[lay_.comp(StateLayout::Eta3, i)] =
          eta_derivative(cfg_.comp_etm, cfg_.etm_kind, g3, held_comp_[i] - nu, qbar_comp_[i], lii,
                         s[lay_.comp(StateLayout::Eta3, i)], cfg_.saturate_eta);
    }
  }

  void rk4(double t, double h) {
    const std::size_t m = s_.size();
    rhs(t, s_, k1_);
    for (std::size_t j = 0; j < m; ++j) tmp_[j] = s_[j] + 0.5 * h * k1_[j];
    rhs(t + 0.5 * h, tmp_, k2_);
    for (std::size_t j = 0; j < m; ++j) tmp_[j] = s_[j] + 0.5 * h * k2_[j];
    rhs(t + 0.5 * h, tmp_, k3_);
    for (std::size_t j = 0; j < m; ++j) tmp_[j] = s_[j] + h * k3_[j];
    rhs(t + h, tmp_, k4_);
    for (std::size_t j = 0; j < m; ++j) s_[j] += h / 6.0 * (k1_[j] + 2.0 * k2_[j] + 2.0 * k3_[j] + k4_[j]);
  }

  double clamp_into(std::size_t idx, const Interval& dom) {
    const double v = s_[idx];
    const double over = std::max(dom.lower - v, v - dom.upper);
    s_[idx] = project_point(dom, v);
    return over;
  }

  void reclamp() {
    double over = 0.0;
    for (std::size_t i = 0; i < lay_.n; ++i) {
      const auto& dom = prob_.bounds[i];
      for (std::size_t k = 0; k < lay_.k; ++k) {
        over = std::max(over, clamp_into(lay_.sub(k, StateLayout::XBar, i), dom));
        over = std::max(over, clamp_into(lay_.sub(k, StateLayout::XHat, i), dom));
      }
      over = std::max(over, clamp_into(lay_.comp(StateLayout::X, i), dom));
    }
    metrics_.max_overshoot = std::max(metrics_.max_overshoot, over);
  }

  void check_state() {
    for (double v : s_) {
      if (!std::isfinite(v)) {
        throw Error(Errc::NonFiniteState, "non-finite state at t = " + std::to_string(t_));
      }
    }
    if (!cfg_.enforce_invariants) return;
    const double drift_tol = 1e-6 * static_cast<double>(lay_.n);
    for (std::size_t k = 0; k < lay_.k; ++k) {
      double sz = 0.0;
      for (std::size_t i = 0; i < lay_.n; ++i) sz += s_[lay_.sub(k, StateLayout::Z, i)];
      if (std::abs(sz) > drift_tol) {
        throw Error(Errc::InvariantViolation, "sum of z drifted to " + std::to_string(sz) + " at t = " + std::to_string(t_));
      }
    }
    double smu = 0.0;
    for (std::size_t i = 0; i < lay_.n; ++i) smu += s_[lay_.comp(StateLayout::Mu, i)];
    if (std::abs(smu) > drift_tol) {
      throw Error(Errc::InvariantViolation, "sum of mu drifted to " + std::to_string(smu) + " at t = " + std::to_string(t_));
    }
    if (cfg_.etm_kind == EtmKind::Static) return;
    for (std::size_t i = 0; i < lay_.n; ++i) {
      for (std::size_t k = 0; k < lay_.k; ++k) {
        if (!(s_[lay_.sub(k, StateLayout::Eta1, i)] > 0.0)) {
          throw Error(Errc::InvariantViolation, "subproblem eta of agent " + std::to_string(i) +
                                                    " reached " + std::to_string(s_[lay_.sub(k, StateLayout::Eta1, i)]) +
                                                    " at t = " + std::to_string(t_));
        }
      }
      if (!(s_[lay_.comp(StateLayout::Eta3, i)] > 0.0)) {
        throw Error(Errc::InvariantViolation, "compromise eta of agent " + std::to_string(i) +
                                                  " reached " + std::to_string(s_[lay_.comp(StateLayout::Eta3, i)]) +
                                                  " at t = " + std::to_string(t_));
      }
    }
  }

  bool counted_now() const { return t_ <= cfg_.window + 1e-9 * cfg_.step; }

  void evaluate_triggers() {
    const auto& net = prob_.network;
    const bool dynamic = cfg_.etm_kind != EtmKind::Static;
    const bool counted = counted_now();
    fired_sub_.clear();
    fired_comp_.clear();
    for (std::size_t k = 0; k < lay_.k; ++k) {
      const double gamma = gauge_increment(tbg_[0], 0.0, t_);
      for (std::size_t i = 0; i < lay_.n; ++i) {
        const double y = s_[lay_.sub(k, StateLayout::Y, i)];
        const double eta = s_[lay_.sub(k, StateLayout::Eta1, i)];
        const double e = held_sub_[k][i] - y;
        const double lii = net.degree(i);
        const bool fire = trigger_fired(cfg_.sub_etm[k], cfg_.etm_kind, e, qbar_sub_[k][i], lii, eta);
        track_ordering(cfg_.sub_etm[k], e, qbar_sub_[k][i], lii, eta);
        if (dynamic) {
          metrics_.min_eta = std::min(metrics_.min_eta, eta);
          metrics_.min_eta_bound_ratio =
              std::min(metrics_.min_eta_bound_ratio, eta / eta_lower_bound(cfg_.sub_etm[k], gamma));
        }
        if (fire) fired_sub_.emplace_back(k, i);
      }
    }
    const double gamma3 = gauge_increment(tbg_[2], 0.0, t_);
    for (std::size_t i = 0; i < lay_.n; ++i) {
      const double nu = s_[lay_.comp(StateLayout::Nu, i)];
      const double eta = s_[lay_.comp(StateLayout::Eta3, i)];
      const double e = held_comp_[i] - nu;
      const double lii = net.degree(i);
      const bool fire = trigger_fired(cfg_.comp_etm, cfg_.etm_kind, e, qbar_comp_[i], lii, eta);
      track_ordering(cfg_.comp_etm, e, qbar_comp_[i], lii, eta);
      if (dynamic) {
        metrics_.min_eta = std::min(metrics_.min_eta, eta);
        metrics_.min_eta_bound_ratio =
            std::min(metrics_.min_eta_bound_ratio, eta / eta_lower_bound(cfg_.comp_etm, gamma3));
      }
      if (fire) fired_comp_.push_back(i);
    }
    // all fired agents broadcast together
    for (const auto& [k, i] : fired_sub_) {
      const double y = s_[lay_.sub(k, StateLayout::Y, i)];
      held_sub_[k][i] = y;
      sub_state_[k][i].broadcast(y, t_);
      sub_state_[k][i].eta = s_[lay_.sub(k, StateLayout::Eta1, i)];
      if (counted) ++metrics_.sub_counts[k][i];
      if (cfg_.record_events) events_.push_back({t_, static_cast<int>(k), i, y, counted});
    }
    for (std::size_t i : fired_comp_) {
      const double nu = s_[lay_.comp(StateLayout::Nu, i)];
      held_comp_[i] = nu;
      comp_state_[i].broadcast(nu, t_);
      comp_state_[i].eta = s_[lay_.comp(StateLayout::Eta3, i)];
      if (counted) ++metrics_.comp_counts[i];
      if (cfg_.record_events) events_.push_back({t_, -1, i, nu, counted});
    }
  }

  // The q̄-aware predicate must never fire where the β-free one stays quiet.
  void track_ordering(const EtmParams& p, double e, double qbar, double lii, double eta) {
    if (cfg_.etm_kind == EtmKind::Static || !(eta > 0.0)) return;
    const bool aware = trigger_fired(p, EtmKind::DynamicPaper, e, qbar, lii, eta);
    const bool prior = trigger_fired(p, EtmKind::DynamicPrior, e, qbar, lii, eta);
    if (aware && !prior) ++metrics_.ordering_violations;
  }

  void update_metrics() {
    for (std::size_t k = 0; k < lay_.k; ++k) {
      double sz = 0.0;
      for (std::size_t i = 0; i < lay_.n; ++i) sz += s_[lay_.sub(k, StateLayout::Z, i)];
      metrics_.max_conservation_z = std::max(metrics_.max_conservation_z, std::abs(sz));
    }
    double smu = 0.0;
    for (std::size_t i = 0; i < lay_.n; ++i) {
      smu += s_[lay_.comp(StateLayout::Mu, i)];
      const auto& dom = prob_.bounds[i];
      auto infeas = [&](double v) { return std::max({0.0, dom.lower - v, v - dom.upper}); };
      metrics_.max_infeasibility = std::max(metrics_.max_infeasibility, infeas(s_[lay_.comp(StateLayout::X, i)]));
      double wsum = 0.0;
      for (std::size_t k = 0; k < lay_.k; ++k) {
        metrics_.max_infeasibility =
            std::max({metrics_.max_infeasibility, infeas(s_[lay_.sub(k, StateLayout::XBar, i)]),
                      infeas(s_[lay_.sub(k, StateLayout::XHat, i)])});
        vals_[k] = eval_objective(prob_.objectives[i][k], s_[lay_.sub(k, StateLayout::XBar, i)]);
      }
      update_weights(vals_, w_);
      for (double w : w_) wsum += w;
      metrics_.max_weight_sum_dev = std::max(metrics_.max_weight_sum_dev, std::abs(wsum - 1.0));
    }
    metrics_.max_conservation_mu = std::max(metrics_.max_conservation_mu, std::abs(smu));

    if (cfg_.record_trajectory && (step_index_ % cfg_.stride == 0 || done())) trajectory_.push_back({t_, s_});
    const char* labels[3] = {"t_pre1", "t_pre2", "t_pre3"};
    for (int l = 0; l < 3; ++l) {
      if (step_index_ > 0 && t_ == tbg_[l].t_pre) snapshots_.push_back({labels[l], t_, s_});
    }
    if (step_index_ > 0 && t_ == tbg_[2].t_pre) metrics_.ce_at_tpre3 = imbalance();
  }

  double imbalance() const {
    double s = 0.0;
    for (std::size_t i = 0; i < lay_.n; ++i) s += prob_.demand[i] - s_[lay_.comp(StateLayout::X, i)];
    return s;
  }

  void finish_metrics(SimulationResult& res, const ReferenceSolution* ref) {
    auto& m = metrics_;
    m.agent_totals.assign(lay_.n, 0);
    m.total_sub = m.total_comp = 0;
    for (std::size_t i = 0; i < lay_.n; ++i) {
      for (std::size_t k = 0; k < lay_.k; ++k) {
        m.agent_totals[i] += m.sub_counts[k][i];
        m.total_sub += m.sub_counts[k][i];
      }
      m.agent_totals[i] += m.comp_counts[i];
      m.total_comp += m.comp_counts[i];
    }
    m.total = m.total_sub + m.total_comp;
    for (const auto& row : sub_state_) {
      for (const auto& st : row) m.min_inter_event = std::min(m.min_inter_event, st.min_inter_event);
    }
    for (const auto& st : comp_state_) m.min_inter_event = std::min(m.min_inter_event, st.min_inter_event);
    m.final_imbalance = imbalance();
    m.x_final = compromise_outputs(lay_, s_);
    if (ref) {
      auto dist = [&](std::span<const double> st) {
        double d = 0.0;
        for (std::size_t i = 0; i < lay_.n; ++i) {
          d = std::max(d, std::abs(st[lay_.comp(StateLayout::X, i)] - ref->compromise.x_star[i]));
        }
        return d;
      };
      m.distance_to_oracle = dist(s_);
      if (const auto* snap = res.snapshot("t_pre3")) m.distance_at_tpre3 = dist(snap->state);
    }
    res.metrics = m;
  }

  Problem prob_;
  SimConfig cfg_;
  StateLayout lay_;
  TbgSpec tbg_[3];
  TbgBranch branch_[3] = {TbgBranch::Settling, TbgBranch::Settling, TbgBranch::Settling};
  double t_ = 0.0;
  std::size_t step_index_ = 0;
  std::vector<double> breakpoints_;

  std::vector<double> s_;
  std::vector<std::vector<double>> held_sub_;
  std::vector<double> held_comp_;
  std::vector<std::vector<EtmState>> sub_state_;
  std::vector<EtmState> comp_state_;

  std::vector<std::vector<double>> lap_sub_, qbar_sub_;
  std::vector<double> lap_comp_, qbar_comp_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
  std::vector<double> w_, ideal_, vals_;
  std::vector<std::pair<std::size_t, std::size_t>> fired_sub_;
  std::vector<std::size_t> fired_comp_;

  std::vector<TrajectorySample> trajectory_;
  std::vector<EventRecord> events_;
  std::vector<Snapshot> snapshots_;
  RunMetrics metrics_;
};

/// Runs every layer from t = 0 to cfg.t_end.
inline SimulationResult run_algorithm1(const Problem& prob, const SimConfig& cfg,
                                       const ReferenceSolution* ref = nullptr) {
  Simulator sim(prob, cfg);
  return sim.run(ref);
}

}  // namespace ptalloc
