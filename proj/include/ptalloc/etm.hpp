#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ptalloc/error.hpp"
#include "ptalloc/graph.hpp"

namespace ptalloc {

enum class EtmKind {
  DynamicPaper,  // threshold η, disagreement term q̄ raises the threshold
  Static,        // fires once the error term dominates the disagreement term
  DynamicPrior,  // threshold η without the disagreement term (β = 0)
};

inline const char* to_string(EtmKind kind) {
  switch (kind) {
    case EtmKind::DynamicPaper: return "dynamic_paper";
    case EtmKind::Static: return "static";
    case EtmKind::DynamicPrior: return "dynamic_prior";
  }
  return "unknown";
}

inline EtmKind etm_kind_from_string(const std::string& s) {
  if (s == "dynamic_paper" || s == "dynamic") return EtmKind::DynamicPaper;
  if (s == "static") return EtmKind::Static;
  if (s == "dynamic_prior" || s == "prior") return EtmKind::DynamicPrior;
  throw Error(Errc::InvalidArgument, "unknown ETM kind '" + s + "'");
}

struct EtmParams {
  double alpha = 10.0;
  double phi = 0.1;
  double delta = 0.9;
  double beta = 0.1;
  double varsigma = 0.05;
  double eta0 = 1.0;
};

/// Violated parameter constraints, one message per violation; empty when valid.
inline std::vector<std::string> check_params(const EtmParams& p) {
  std::vector<std::string> issues;
  if (!(p.phi > 0.0)) issues.push_back("phi must be positive");
  if (!(p.delta > 0.0 && p.delta <= 1.0)) issues.push_back("delta must lie in (0, 1]");
  if (!(p.beta >= 0.0 && p.beta < 1.0)) issues.push_back("beta must lie in [0, 1)");
  if (!(p.varsigma > 0.0)) issues.push_back("varsigma must be positive");
  if (!(p.eta0 > 0.0)) issues.push_back("eta0 must be positive");
  if (p.phi > 0.0 && !(p.alpha > (1.0 - p.delta) / p.phi)) {
    issues.push_back("alpha must exceed (1 - delta) / phi");
  }
  return issues;
}

/// 1/(2ς) + l_ii, the weight on the squared measurement error.
inline double error_weight(const EtmParams& p, double l_ii) { return 1.0 / (2.0 * p.varsigma) + l_ii; }

/// (1/(2ς) + l_ii) e² - (β/2) q̄, with β dropped for the prior-work mechanism.
inline double trigger_measure(const EtmParams& p, EtmKind kind, double e, double qbar, double l_ii) {
  const double beta = kind == EtmKind::DynamicPrior ? 0.0 : p.beta;
  return error_weight(p, l_ii) * e * e - 0.5 * beta * qbar;
}

/// Whether the agent broadcasts now. A zero measurement error never fires.
inline bool trigger_fired(const EtmParams& p, EtmKind kind, double e, double qbar, double l_ii,
                          double eta) {
  if (kind != EtmKind::Static && !(eta > 0.0)) {
    throw Error(Errc::NonPositiveEta, "eta = " + std::to_string(eta));
  }
  if (e == 0.0) return false;
  const double m = trigger_measure(p, kind, e, qbar, l_ii);
  if (kind == EtmKind::Static) return m >= 0.0;
  return p.alpha * m >= eta;
}

/// η̇ = T (-φ η - δ m). The static mechanism has no internal variable; η stays put.
/// With `saturate` the measure is capped at η/α, the value it cannot exceed between
/// events of a continuously monitored trigger; a sampled trigger can overshoot it.
inline double eta_derivative(const EtmParams& p, EtmKind kind, double gain, double e, double qbar,
                             double l_ii, double eta, bool saturate = false) {
  if (kind == EtmKind::Static) return 0.0;
  double m = trigger_measure(p, kind, e, qbar, l_ii);
  if (saturate) m = std::min(m, eta / p.alpha);
  return gain * (-p.phi * eta - p.delta * m);
}

/// ½ Σ_j a_ij (ȳ_i - ȳ_j)²
inline double local_disagreement(double self, std::span<const std::pair<double, double>> neighbors) {
  double acc = 0.0;
  for (const auto& [weight, value] : neighbors) acc += weight * (self - value) * (self - value);
  return 0.5 * acc;
}

inline double local_disagreement(const Network& net, std::size_t i, std::span<const double> broadcasts) {
  double acc = 0.0;
  for (const auto& nb : net.neighbors(i)) {
    const double d = broadcasts[i] - broadcasts[nb.index];
    acc += nb.weight * d * d;
  }
  return 0.5 * acc;
}

/// η(0) exp(-(φ + δ/α) γ), the floor η cannot cross between triggers.
inline double eta_lower_bound(const EtmParams& p, double gauge) {
  return p.eta0 * std::exp(-(p.phi + p.delta / p.alpha) * gauge);
}

/// Per-(agent, objective) or per-agent trigger bookkeeping.
struct EtmState {
  double eta = 1.0;
  double last_broadcast = 0.0;
  double last_trigger_time = 0.0;
  std::size_t trigger_count = 0;
  double min_inter_event = std::numeric_limits<double>::infinity();

  void initial_broadcast(double value, double eta0) {
    eta = eta0;
    last_broadcast = value;
    last_trigger_time = 0.0;
  }

  void broadcast(double value, double t) {
    min_inter_event = std::min(min_inter_event, t - last_trigger_time);
    last_broadcast = value;
    last_trigger_time = t;
    ++trigger_count;
  }
};

/// Constants of the convergence analysis for one ETM-driven layer. Diagnostic only.
struct EtmBoundConstants {
  double psi_d = 0.0;      // min φ - (1-δ)/α
  double psi_y = 0.0;
  double sigma_max = 0.0;  // ς must stay below this
  double kappa = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  bool sigma_ok = false;

  double rate() const noexcept { return kappa / theta2; }
};

/// `modulus` is the smallest strong-convexity modulus across agents for this layer.
inline EtmBoundConstants etm_bound_constants(const EtmParams& p, EtmKind kind, const Network& net,
                                             double modulus) {
  EtmBoundConstants c;
  const double beta = kind == EtmKind::DynamicPrior ? 0.0 : p.beta;
  const double l2 = net.lambda2();
  const double ln = net.lambdaN();
  const double w_min = error_weight(p, net.min_degree());
  c.psi_d = p.phi - (1.0 - p.delta) / p.alpha;
  c.psi_y = std::max(2.0 + ln / w_min, 2.0 * ln * (1.0 - beta) / (c.psi_d * p.alpha * w_min));
  c.sigma_max = std::min(modulus / 3.0, l2 * (1.0 - beta) / (6.0 * c.psi_y));
  c.sigma_ok = p.varsigma < c.sigma_max;
  const double s = p.varsigma;
  c.kappa = std::min({modulus - 3.0 * s, l2 * (1.0 - beta) / (2.0 * c.psi_y) - 3.0 * s, s / 2.0,
                      c.psi_d / 2.0});
  c.theta1 = std::min(0.5, 0.5 / ln);
  c.theta2 = std::max({1.0, 0.5 + 4.0 * s, 0.5 / l2 + 4.0 * s});
  return c;
}

}  // namespace ptalloc
