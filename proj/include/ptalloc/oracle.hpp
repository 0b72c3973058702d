#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ptalloc/error.hpp"
#include "ptalloc/objectives.hpp"
#include "ptalloc/problem.hpp"
#include "ptalloc/projection.hpp"

namespace ptalloc {

using ScalarFn = std::function<double(double)>;

enum class ActiveBound { Lower, Upper, Interior };

inline const char* to_string(ActiveBound b) {
  switch (b) {
    case ActiveBound::Lower: return "lower";
    case ActiveBound::Upper: return "upper";
    case ActiveBound::Interior: return "interior";
  }
  return "unknown";
}

struct DispatchSolution {
  std::vector<double> x_star;
  double multiplier = 0.0;
  std::vector<ActiveBound> active_bounds;
  double objective_value = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;
};

namespace detail {

inline void require_dispatch_inputs(std::span<const ScalarFn> gradients, std::span<const Interval> bounds,
                                    double demand) {
  if (gradients.size() != bounds.size() || gradients.empty()) {
    throw Error(Errc::InvalidArgument, "need one gradient per interval");
  }
  double lo = 0.0, hi = 0.0;
  for (const auto& b : bounds) {
    lo += b.lower;
    hi += b.upper;
  }
  if (!(demand >= lo - 1e-12 && demand <= hi + 1e-12)) {
    throw Error(Errc::InfeasibleDemand, "demand " + std::to_string(demand) + " outside [" +
                                            std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

// x with g(x) = lambda on [lo, hi], clamped when lambda is out of range.
inline double gradient_inverse(const ScalarFn& g, const Interval& dom, double lambda) {
  if (g(dom.lower) >= lambda) return dom.lower;
  if (g(dom.upper) <= lambda) return dom.upper;
  double a = dom.lower, b = dom.upper;
  for (int it = 0; it < 200 && b - a > 1e-12 * std::max(1.0, std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    (g(m) < lambda ? a : b) = m;
  }
  return 0.5 * (a + b);
}

inline ActiveBound classify(const Interval& dom, double x) {
  if (dom.width() > 0.0 && x >= dom.upper - kBoundaryTol) return ActiveBound::Upper;
  if (x <= dom.lower + kBoundaryTol) return ActiveBound::Lower;
  return ActiveBound::Interior;
}

}  // namespace detail

/// Equal-marginal dispatch: bisection on the shared multiplier, each agent's
/// response found by bisection on its own gradient.
inline DispatchSolution solve_dispatch(std::span<const ScalarFn> gradients, std::span<const Interval> bounds,
                                       double demand) {
  detail::require_dispatch_inputs(gradients, bounds, demand);
  const std::size_t n = gradients.size();
  double lam_lo = std::numeric_limits<double>::infinity();
  double lam_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const double gl = gradients[i](bounds[i].lower);
    const double gu = gradients[i](bounds[i].upper);
    if (gu < gl) {
      throw Error(Errc::NonMonotoneGradient, "gradient of agent " + std::to_string(i) + " decreases");
    }
    lam_lo = std::min(lam_lo, gl);
    lam_hi = std::max(lam_hi, gu);
  }

  DispatchSolution sol;
  sol.x_star.assign(n, 0.0);
  auto respond = [&](double lambda) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sol.x_star[i] = detail::gradient_inverse(gradients[i], bounds[i], lambda);
      s += sol.x_star[i];
    }
    return s;
  };

  double lambda = 0.5 * (lam_lo + lam_hi);
  for (sol.iterations = 0; sol.iterations < 400; ++sol.iterations) {
    lambda = 0.5 * (lam_lo + lam_hi);
    const double s = respond(lambda);
    if (std::abs(s - demand) < 1e-10) break;
    (s < demand ? lam_lo : lam_hi) = lambda;
    if (lam_hi - lam_lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lambda))) {
      break;
    }
  }
  respond(lambda);
  sol.multiplier = lambda;
  sol.active_bounds.resize(n);
  for (std::size_t i = 0; i < n; ++i) sol.active_bounds[i] = detail::classify(bounds[i], sol.x_star[i]);
  return sol;
}

inline void attach_objective(DispatchSolution& sol, std::span<const ScalarFn> values) {
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) acc += values[i](sol.x_star[i]);
  sol.objective_value = acc;
}

/// Euclidean projection onto {Σx = D} ∩ box, by bisection on the shift τ in clamp(v - τ).
inline std::vector<double> project_simplex_box(std::span<const double> v, std::span<const Interval> bounds,
                                               double demand) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (std::size_t i = 0; i < v.size(); ++i) {
    lo = std::min(lo, v[i] - bounds[i].upper);
    hi = std::max(hi, v[i] - bounds[i].lower);
  }
  std::vector<double> out(v.size());
  auto fill = [&](double tau) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      out[i] = project_point(bounds[i], v[i] - tau);
      s += out[i];
    }
    return s;
  };
  for (int it = 0; it < 200; ++it) {
    const double tau = 0.5 * (lo + hi);
    (fill(tau) > demand ? lo : hi) = tau;
  }
  fill(0.5 * (lo + hi));
  return out;
}

/// Projected gradient descent on the feasible set. Independent of solve_dispatch
/// apart from sharing the problem data.
inline DispatchSolution solve_dispatch_projected_gradient(std::span<const ScalarFn> gradients,
                                                          std::span<const Interval> bounds, double demand,
                                                          double tol = 1e-13, std::size_t max_iter = 2'000'000) {
  detail::require_dispatch_inputs(gradients, bounds, demand);
  const std::size_t n = gradients.size();
  // Lipschitz constant from secant slopes on a coarse grid.
  double lip = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = bounds[i].width();
    if (w <= 0.0) continue;
    double prev = gradients[i](bounds[i].lower);
    for (int k = 1; k <= 64; ++k) {
      const double x = bounds[i].lower + w * k / 64.0;
      const double g = gradients[i](x);
      lip = std::max(lip, std::abs(g - prev) / (w / 64.0));
      prev = g;
    }
  }
  const double step = lip > 0.0 ? 1.0 / lip : 1.0;

  std::vector<double> start(n);
  for (std::size_t i = 0; i < n; ++i) start[i] = 0.5 * (bounds[i].lower + bounds[i].upper);
  std::vector<double> x = project_simplex_box(start, bounds, demand);
  std::vector<double> trial(n);
  DispatchSolution sol;
  for (sol.iterations = 0; sol.iterations < max_iter; ++sol.iterations) {
    for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] - step * gradients[i](x[i]);
    auto next = project_simplex_box(trial, bounds, demand);
    double move = 0.0;
    for (std::size_t i = 0; i < n; ++i) move = std::max(move, std::abs(next[i] - x[i]));
    x = std::move(next);
    if (move < tol) break;
  }
  sol.x_star = x;
  // multiplier: mean gradient over interior agents
  double acc = 0.0;
  std::size_t cnt = 0;
  sol.active_bounds.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    sol.active_bounds[i] = detail::classify(bounds[i], x[i]);
    if (sol.active_bounds[i] == ActiveBound::Interior) {
      acc += gradients[i](x[i]);
      ++cnt;
    }
  }
  sol.multiplier = cnt ? acc / static_cast<double>(cnt) : std::numeric_limits<double>::quiet_NaN();
  return sol;
}

struct IdealPoint {
  double x = 0.0;
  double value = 0.0;
};

/// Constrained minimizer of a strongly convex scalar function: golden section,
/// then bisection on the derivative to polish.
inline IdealPoint ideal_point(const ObjectiveFn& f, const Interval& dom) {
  auto val = [&](double x) { return eval_objective(f, x); };
  auto der = [&](double x) { return grad_objective(f, x); };
  if (dom.width() == 0.0) return {dom.lower, val(dom.lower)};
  if (der(dom.lower) >= 0.0) return {dom.lower, val(dom.lower)};
  if (der(dom.upper) <= 0.0) return {dom.upper, val(dom.upper)};

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = dom.lower, b = dom.upper;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = val(c), fd = val(d);
  while (b - a > 1e-6 * std::max(1.0, dom.width())) {
    if (fc < fd) {
      b = d; d = c; fd = fc;
      c = b - inv_phi * (b - a); fc = val(c);
    } else {
      a = c; c = d; fc = fd;
      d = a + inv_phi * (b - a); fd = val(d);
    }
  }
  // widen until the derivative changes sign inside [a, b]
  double span = b - a;
  while (der(a) > 0.0 && a > dom.lower) { a = std::max(dom.lower, a - span); span *= 2.0; }
  span = b - a;
  while (der(b) < 0.0 && b < dom.upper) { b = std::min(dom.upper, b + span); span *= 2.0; }
  for (int it = 0; it < 200 && b - a > 1e-14 * std::max(1.0, std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    (der(m) < 0.0 ? a : b) = m;
  }
  const double x = 0.5 * (a + b);
  return {x, val(x)};
}

struct KktReport {
  double balance = 0.0;        // |Σx - D|
  double stationarity = 0.0;   // max_i |P_T(x_i, y_i - ∇f_i(x_i))|
  double consensus = 0.0;      // max_i |y_i - mean(y)|
  double feasibility = 0.0;    // max distance outside the boxes

  double worst() const noexcept { return std::max({balance, stationarity, consensus, feasibility}); }
  bool ok(double tol) const noexcept { return worst() < tol; }
};

/// Residuals of the equilibrium conditions for per-agent multiplier estimates.
inline KktReport verify_kkt(std::span<const double> x, std::span<const double> multipliers,
                            std::span<const ScalarFn> gradients, std::span<const Interval> bounds, double demand) {
  KktReport r;
  double s = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += x[i];
    mean += multipliers[i];
    r.feasibility = std::max({r.feasibility, bounds[i].lower - x[i], x[i] - bounds[i].upper});
  }
  mean /= static_cast<double>(x.size());
  r.balance = std::abs(s - demand);
  for (std::size_t i = 0; i < x.size(); ++i) {
    r.consensus = std::max(r.consensus, std::abs(multipliers[i] - mean));
    const double xi = project_point(bounds[i], x[i]);
    r.stationarity = std::max(r.stationarity,
                              std::abs(project_tangent(bounds[i], xi, multipliers[i] - gradients[i](xi))));
  }
  return r;
}

inline KktReport verify_kkt(const DispatchSolution& sol, std::span<const ScalarFn> gradients,
                            std::span<const Interval> bounds, double demand) {
  std::vector<double> mult(sol.x_star.size(), sol.multiplier);
  return verify_kkt(sol.x_star, mult, gradients, bounds, demand);
}

struct ParetoResult {
  bool pareto = true;
  std::size_t grid_points = 0;
  std::vector<double> dominating;  // first dominating allocation found, if any
};

/// Exhaustive dominance check on the grid {Σx = D} ∩ box, network objectives
/// F^k(x) = Σ_i ω_i^k f_i^k(x_i).
inline ParetoResult pareto_check(std::span<const double> candidate,
                                 const std::vector<std::vector<ObjectiveFn>>& objectives,
                                 const std::vector<std::vector<double>>& weights,
                                 std::span<const Interval> bounds, double demand, double grid_step) {
  const std::size_t n = candidate.size();
  if (n == 0 || objectives.size() != n || weights.size() != n) {
    throw Error(Errc::InvalidArgument, "candidate, objectives and weights disagree on the agent count");
  }
  if (!(grid_step > 0.0)) throw Error(Errc::InvalidArgument, "grid step must be positive");
  const std::size_t k_count = objectives.front().size();

  auto network_objectives = [&](std::span<const double> x) {
    std::vector<double> f(k_count, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < k_count; ++k) f[k] += weights[i][k] * eval_objective(objectives[i][k], x[i]);
    }
    return f;
  };
  const auto ref = network_objectives(candidate);
  double scale = 1.0;
  for (double v : ref) scale = std::max(scale, std::abs(v));
  const double tol = 1e-9 * scale;

  ParetoResult res;
  std::vector<double> x(n);
  // enumerate the first n-1 coordinates, the last one closes the balance
  std::function<void(std::size_t, double)> walk = [&](std::size_t i, double used) {
    if (!res.pareto) return;
    if (i + 1 == n) {
      const double last = demand - used;
      if (!bounds[i].contains(last, 1e-12)) return;
      x[i] = project_point(bounds[i], last);
      ++res.grid_points;
      const auto f = network_objectives(x);
      bool weakly = true, strictly = false;
      for (std::size_t k = 0; k < k_count; ++k) {
        if (f[k] > ref[k] + tol) weakly = false;
        if (f[k] < ref[k] - tol) strictly = true;
      }
      if (weakly && strictly) {
        res.pareto = false;
        res.dominating = x;
      }
      return;
    }
    const auto steps = static_cast<std::size_t>(std::floor(bounds[i].width() / grid_step + 1e-9));
    for (std::size_t s = 0; s <= steps; ++s) {
      x[i] = bounds[i].lower + static_cast<double>(s) * grid_step;
      walk(i + 1, used + x[i]);
    }
  };
  if (n == 1) {
    res.grid_points = 0;
  } else {
    walk(0, 0.0);
  }
  if (res.pareto && res.grid_points < 100) {
    throw Error(Errc::GridTooCoarse, std::to_string(res.grid_points) + " feasible grid points");
  }
  return res;
}

/// Everything the distributed run should converge to.
struct ReferenceSolution {
  std::vector<DispatchSolution> subproblems;          // one per objective
  std::vector<std::vector<double>> weights;           // [i][k]
  std::vector<std::vector<IdealPoint>> ideal_points;  // [i][k]
  DispatchSolution compromise;
  std::vector<PreferenceIndex> preferences;           // per agent, at the converged inputs
};

inline std::vector<ScalarFn> objective_gradients(const Problem& prob, std::size_t k) {
  std::vector<ScalarFn> g;
  for (std::size_t i = 0; i < prob.n_agents(); ++i) {
    g.push_back([f = prob.objectives[i][k]](double x) { return grad_objective(f, x); });
  }
  return g;
}

inline std::vector<ScalarFn> objective_values(const Problem& prob, std::size_t k) {
  std::vector<ScalarFn> v;
  for (std::size_t i = 0; i < prob.n_agents(); ++i) {
    v.push_back([f = prob.objectives[i][k]](double x) { return eval_objective(f, x); });
  }
  return v;
}

inline std::vector<ScalarFn> preference_gradients(const std::vector<PreferenceIndex>& prefs) {
  std::vector<ScalarFn> g;
  for (const auto& u : prefs) g.push_back([&u](double x) { return grad_preference(u, x); });
  return g;
}

inline ReferenceSolution solve_reference(const Problem& prob) {
  prob.check();
  const std::size_t n = prob.n_agents(), kc = prob.n_objectives();
  const double demand = prob.total_demand();
  ReferenceSolution ref;
  for (std::size_t k = 0; k < kc; ++k) {
    const auto g = objective_gradients(prob, k);
    const auto v = objective_values(prob, k);
    ref.subproblems.push_back(solve_dispatch(g, prob.bounds, demand));
    attach_objective(ref.subproblems.back(), v);
  }
  ref.weights.assign(n, std::vector<double>(kc));
  ref.ideal_points.assign(n, std::vector<IdealPoint>(kc));
  ref.preferences.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> values(kc);
    for (std::size_t k = 0; k < kc; ++k) {
      values[k] = eval_objective(prob.objectives[i][k], ref.subproblems[k].x_star[i]);
      ref.ideal_points[i][k] = ideal_point(prob.objectives[i][k], prob.bounds[i]);
    }
    update_weights(values, ref.weights[i]);
    auto& u = ref.preferences[i];
    u.p = prob.p;
    u.weights = ref.weights[i];
    u.objectives = prob.objectives[i];
    for (std::size_t k = 0; k < kc; ++k) u.ideal_values.push_back(ref.ideal_points[i][k].value);
  }
  const auto gu = preference_gradients(ref.preferences);
  ref.compromise = solve_dispatch(gu, prob.bounds, demand);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += eval_preference(ref.preferences[i], ref.compromise.x_star[i]);
  ref.compromise.objective_value = acc;
  return ref;
}

}  // namespace ptalloc
