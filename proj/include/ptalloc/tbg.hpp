#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "ptalloc/error.hpp"

namespace ptalloc {

// Time-based generators. The gain T(t, t_pre) is the time derivative of a gauge
// γ(t); scaling a flow by T compresses its convergence into [0, t_pre].
enum class TbgKind {
  Quadratic,         // γ = 12 t² before t_pre, gain 24 t
  ConstantBoost,     // γ = 30 t before t_pre, gain 30
  PolynomialBlowup,  // gain 1 + ḃ / (1 - b + ε), b a degree-6 blend reaching 1 at t_pre
};

struct TbgSpec {
  TbgKind kind = TbgKind::Quadratic;
  double t_pre = 1.0;
  double epsilon_reg = 1e-7;
  // Carried for gauges parameterized by σ; the three kinds above ignore it.
  double sigma = 0.0;
};

// Which side of the t_pre breakpoint a gain evaluation belongs to. Integrators
// that align a grid point with t_pre pick the branch from the step, so the
// endpoint stage of the last pre-t_pre step still sees the settling gain.
enum class TbgBranch { Settling, Settled };

inline const char* to_string(TbgKind kind) {
  switch (kind) {
    case TbgKind::Quadratic: return "quadratic";
    case TbgKind::ConstantBoost: return "constant_boost";
    case TbgKind::PolynomialBlowup: return "polynomial_blowup";
  }
  return "unknown";
}

inline TbgKind tbg_kind_from_string(const std::string& s) {
  if (s == "quadratic" || s == "tbg1") return TbgKind::Quadratic;
  if (s == "constant_boost" || s == "tbg2") return TbgKind::ConstantBoost;
  if (s == "polynomial_blowup" || s == "tbg3") return TbgKind::PolynomialBlowup;
  throw Error(Errc::InvalidArgument, "unknown TBG kind '" + s + "'");
}

namespace detail {

// b(t) = 10 s⁶ - 24 s⁵ + 15 s⁴, s = t / t_pre
inline double blend(double t, double t_pre) {
  const double s = t / t_pre;
  const double s4 = s * s * s * s;
  return s4 * (15.0 + s * (-24.0 + 10.0 * s));
}

// ḃ(t) = 60 s³ (1 - s)² / t_pre
inline double blend_rate(double t, double t_pre) {
  const double s = t / t_pre;
  const double u = 1.0 - s;
  return 60.0 * s * s * s * u * u / t_pre;
}

inline void require_time(double t) {
  if (!(t >= 0.0)) throw Error(Errc::NegativeTime, "time " + std::to_string(t) + " is negative");
}

}  // namespace detail

inline double gain(const TbgSpec& spec, double t, TbgBranch branch) {
  detail::require_time(t);
  if (branch == TbgBranch::Settled) return 1.0;
  switch (spec.kind) {
    case TbgKind::Quadratic: return 24.0 * t;
    case TbgKind::ConstantBoost: return 30.0;
    case TbgKind::PolynomialBlowup: {
      const double tt = std::min(t, spec.t_pre);
      return 1.0 + detail::blend_rate(tt, spec.t_pre) /
                       (1.0 - detail::blend(tt, spec.t_pre) + spec.epsilon_reg);
    }
  }
  return 1.0;
}

/// T(t, t_pre); the settled branch applies from t_pre on.
inline double gain(const TbgSpec& spec, double t) {
  detail::require_time(t);
  return gain(spec, t, t < spec.t_pre ? TbgBranch::Settling : TbgBranch::Settled);
}

namespace detail {

// ∫_0^t T ds in closed form.
inline double gauge_from_zero(const TbgSpec& spec, double t) {
  const double head = std::min(t, spec.t_pre);
  const double tail = std::max(0.0, t - spec.t_pre);
  double settling = 0.0;
  switch (spec.kind) {
    case TbgKind::Quadratic: settling = 12.0 * head * head; break;
    case TbgKind::ConstantBoost: settling = 30.0 * head; break;
    case TbgKind::PolynomialBlowup: {
      // antiderivative t - ln(1 - b + ε)
      const double eps = spec.epsilon_reg;
      settling = head - std::log((1.0 - blend(head, spec.t_pre) + eps) / (1.0 + eps));
      break;
    }
  }
  return settling + tail;
}

}  // namespace detail

/// ∫ T dt over [t_from, t_to]. Integrates the gain, not the literal piecewise γ,
/// so the jump of γ at t_pre for the first two kinds does not enter.
inline double gauge_increment(const TbgSpec& spec, double t_from, double t_to) {
  detail::require_time(t_from);
  if (t_to < t_from) {
    throw Error(Errc::ReversedInterval,
                "[" + std::to_string(t_from) + ", " + std::to_string(t_to) + "] is reversed");
  }
  return detail::gauge_from_zero(spec, t_to) - detail::gauge_from_zero(spec, t_from);
}

/// sqrt(exp(-rate·gamma_inc) · v0 / scale)
inline double error_bound(double rate, double v0, double scale, double gamma_inc) {
  if (!(scale > 0.0)) throw Error(Errc::NonPositiveScale, "scale must be positive");
  if (!std::isfinite(rate) || !std::isfinite(v0) || !std::isfinite(gamma_inc)) {
    throw Error(Errc::InvalidArgument, "error_bound inputs must be finite");
  }
  return std::sqrt(std::exp(-rate * gamma_inc) * v0 / scale);
}

struct ConvergenceBound {
  double gamma_at_tpre = 0.0;
  double rate = 0.0;
  double v0 = 0.0;
  double scale = 1.0;
  double epsilon_bound = 0.0;

  // The decay inequality behind the radius only holds for a positive rate.
  bool certified() const noexcept { return rate > 0.0; }
};

inline ConvergenceBound make_bound(const TbgSpec& spec, double rate, double v0, double scale) {
  ConvergenceBound b;
  b.gamma_at_tpre = gauge_increment(spec, 0.0, spec.t_pre);
  b.rate = rate;
  b.v0 = v0;
  b.scale = scale;
  b.epsilon_bound = error_bound(rate, v0, scale, b.gamma_at_tpre);
  return b;
}

}  // namespace ptalloc
