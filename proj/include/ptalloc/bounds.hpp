#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ptalloc/dynamics.hpp"
#include "ptalloc/etm.hpp"
#include "ptalloc/oracle.hpp"
#include "ptalloc/tbg.hpp"

namespace ptalloc {

// Diagnostic convergence radii for each layer, built from the initial state and
// the oracle equilibrium. Nothing here feeds back into the dynamics.

struct LayerBound {
  std::string layer;
  ConvergenceBound bound;
  EtmBoundConstants constants;  // unused for the ideal layer
  double modulus = 0.0;
  bool sigma_ok = true;

  bool certified() const noexcept { return bound.certified() && sigma_ok; }
};

namespace detail {

// ½(‖x̃‖² + ‖ỹ‖² + z̃ᵀΓz̃) + 2ς‖ỹ + z̃‖² + Σ η(0)
inline double primal_dual_energy(const Network& net, const std::vector<double>& x_err,
                                 const std::vector<double>& y_err, const std::vector<double>& z_err,
                                 double varsigma, double eta_sum) {
  const auto n = static_cast<Eigen::Index>(x_err.size());
  Eigen::Map<const Eigen::VectorXd> xe(x_err.data(), n), ye(y_err.data(), n), ze(z_err.data(), n);
  const Matrix gamma = net.lyapunov_weight();
  const double v1 = 0.5 * (xe.squaredNorm() + ye.squaredNorm() + ze.dot(gamma * ze));
  const double v2 = 2.0 * varsigma * (ye + ze).squaredNorm();
  return v1 + v2 + eta_sum;
}

}  // namespace detail

inline std::vector<LayerBound> layer_bounds(const Problem& prob, const SimConfig& cfg,
                                            const ReferenceSolution& ref) {
  const std::size_t n = prob.n_agents(), kc = prob.n_objectives();
  const auto& net = prob.network;
  std::vector<LayerBound> out;

  for (std::size_t k = 0; k < kc; ++k) {
    const auto& sol = ref.subproblems[k];
    const auto& p = cfg.sub_etm[k];
    std::vector<double> xe(n), ye(n), ze(n);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      xe[i] = cfg.x0[i] - sol.x_star[i];
      ye[i] = cfg.y0 - sol.multiplier;
      ze[i] = 0.0 - (prob.demand[i] - sol.x_star[i]);
      m = std::min(m, strong_convexity_modulus(prob.objectives[i][k], prob.bounds[i]));
    }
    LayerBound lb;
    lb.layer = "sub:" + (k < prob.objective_names.size() ? prob.objective_names[k] : std::to_string(k));
    lb.modulus = m;
    lb.constants = etm_bound_constants(p, cfg.etm_kind, net, m);
    lb.sigma_ok = lb.constants.sigma_ok;
    const double v0 =
        detail::primal_dual_energy(net, xe, ye, ze, p.varsigma, p.eta0 * static_cast<double>(n));
    lb.bound = make_bound(cfg.layer_tbg(0), lb.constants.rate(), v0, lb.constants.theta2);
    out.push_back(lb);
  }

  for (std::size_t k = 0; k < kc; ++k) {
    double m = std::numeric_limits<double>::infinity();
    double v0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      m = std::min(m, strong_convexity_modulus(prob.objectives[i][k], prob.bounds[i]));
      const double e = cfg.x0[i] - ref.ideal_points[i][k].x;
      v0 += 0.5 * e * e;
    }
    LayerBound lb;
    lb.layer = "ideal:" + (k < prob.objective_names.size() ? prob.objective_names[k] : std::to_string(k));
    lb.modulus = m;
    lb.bound = make_bound(cfg.layer_tbg(1), 2.0 * m, v0, 0.5);
    out.push_back(lb);
  }

  {
    const auto& sol = ref.compromise;
    std::vector<double> xe(n), ye(n), ze(n);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      xe[i] = cfg.x0[i] - sol.x_star[i];
      ye[i] = cfg.nu0 - sol.multiplier;
      ze[i] = 0.0 - (prob.demand[i] - sol.x_star[i]);
      const auto& u = ref.preferences[i];
      m = std::min(m, estimate_modulus([&u](double x) { return grad_preference(u, x); }, prob.bounds[i]));
    }
    LayerBound lb;
    lb.layer = "compromise";
    lb.modulus = m;
    lb.constants = etm_bound_constants(cfg.comp_etm, cfg.etm_kind, net, m);
    lb.sigma_ok = lb.constants.sigma_ok;
    const double v0 = detail::primal_dual_energy(net, xe, ye, ze, cfg.comp_etm.varsigma,
                                                 cfg.comp_etm.eta0 * static_cast<double>(n));
    lb.bound = make_bound(cfg.layer_tbg(2), lb.constants.rate(), v0, lb.constants.theta2);
    out.push_back(lb);
  }
  return out;
}

}  // namespace ptalloc
