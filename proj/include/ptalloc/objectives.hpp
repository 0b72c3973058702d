#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ptalloc/error.hpp"
#include "ptalloc/projection.hpp"

namespace ptalloc {

/// a x² + b x + c
struct Quadratic {
  double a = 0.0, b = 0.0, c = 0.0;
};

/// scale · (a x² + b x + c); the emission objective uses scale = r_t.
struct ScaledQuadratic {
  double scale = 1.0;
  double a = 0.0, b = 0.0, c = 0.0;
};

enum class TechnicalForm {
  SquaredDeviation,  // a (x - p_opt)²
  SquareOfSquare,    // a (x² - p_opt)²
};

struct Technical {
  double a = 0.0;
  double p_opt = 0.0;
  TechnicalForm form = TechnicalForm::SquaredDeviation;
};

using ObjectiveFn = std::variant<Quadratic, ScaledQuadratic, Technical>;

inline const char* to_string(TechnicalForm form) {
  return form == TechnicalForm::SquaredDeviation ? "squared_deviation" : "square_of_square";
}

inline TechnicalForm technical_form_from_string(const std::string& s) {
  if (s == "squared_deviation") return TechnicalForm::SquaredDeviation;
  if (s == "square_of_square") return TechnicalForm::SquareOfSquare;
  throw Error(Errc::InvalidArgument, "unknown technical-objective form '" + s + "'");
}

inline double eval_objective(const ObjectiveFn& f, double x) {
  struct V {
    double x;
    double operator()(const Quadratic& q) const { return (q.a * x + q.b) * x + q.c; }
    double operator()(const ScaledQuadratic& q) const { return q.scale * ((q.a * x + q.b) * x + q.c); }
    double operator()(const Technical& t) const {
      const double d = t.form == TechnicalForm::SquaredDeviation ? x - t.p_opt : x * x - t.p_opt;
      return t.a * d * d;
    }
  };
  return std::visit(V{x}, f);
}

inline double grad_objective(const ObjectiveFn& f, double x) {
  struct V {
    double x;
    double operator()(const Quadratic& q) const { return 2.0 * q.a * x + q.b; }
    double operator()(const ScaledQuadratic& q) const { return q.scale * (2.0 * q.a * x + q.b); }
    double operator()(const Technical& t) const {
      if (t.form == TechnicalForm::SquaredDeviation) return 2.0 * t.a * (x - t.p_opt);
      return 4.0 * t.a * x * (x * x - t.p_opt);
    }
  };
  return std::visit(V{x}, f);
}

inline double curvature(const ObjectiveFn& f, double x) {
  struct V {
    double x;
    double operator()(const Quadratic& q) const { return 2.0 * q.a; }
    double operator()(const ScaledQuadratic& q) const { return 2.0 * q.scale * q.a; }
    double operator()(const Technical& t) const {
      if (t.form == TechnicalForm::SquaredDeviation) return 2.0 * t.a;
      return t.a * (12.0 * x * x - 4.0 * t.p_opt);
    }
  };
  return std::visit(V{x}, f);
}

/// Smallest curvature over the interval (exact for the supported kinds).
inline double strong_convexity_modulus(const ObjectiveFn& f, const Interval& dom) {
  if (const auto* t = std::get_if<Technical>(&f); t && t->form == TechnicalForm::SquareOfSquare) {
    // a(12x² - 4p) is smallest where |x| is smallest
    const double xm = (dom.lower <= 0.0 && dom.upper >= 0.0)
                          ? 0.0
                          : (std::abs(dom.lower) < std::abs(dom.upper) ? dom.lower : dom.upper);
    return curvature(f, xm);
  }
  return curvature(f, dom.lower);
}

/// Smallest secant slope of a gradient over an n-point grid: the largest m with
/// (g(x2) - g(x1))(x2 - x1) ≥ m (x2 - x1)² for all grid pairs.
inline double estimate_modulus(const std::function<double(double)>& gradient, const Interval& dom,
                               std::size_t points = 1000) {
  if (points < 2 || dom.width() <= 0.0) return std::numeric_limits<double>::infinity();
  const double step = dom.width() / static_cast<double>(points - 1);
  double best = std::numeric_limits<double>::infinity();
  double prev = gradient(dom.lower);
  for (std::size_t k = 1; k < points; ++k) {
    const double x = k + 1 == points ? dom.upper : dom.lower + step * static_cast<double>(k);
    const double g = gradient(x);
    best = std::min(best, (g - prev) / step);
    prev = g;
  }
  return best;
}

// Gaps below -kGapTol mean the ideal values are not minima.
inline constexpr double kGapTol = 1e-9;
// Below this value the preference gradient is taken as 0 (p > 1).
inline constexpr double kPreferenceFloor = 1e-12;

enum class GapPolicy {
  Strict,         // negative gaps beyond kGapTol raise NegativeGap
  ClampNegative,  // negative gaps are read as 0 (live ideal estimates)
};

/// Non-owning view of a weighted Lp preference index u_i.
struct PreferenceView {
  double p = 2.0;
  std::span<const double> weights;
  std::span<const double> ideal_values;
  std::span<const ObjectiveFn> objectives;
};

/// Owning weighted Lp preference index.
struct PreferenceIndex {
  double p = 2.0;
  std::vector<double> weights;
  std::vector<double> ideal_values;
  std::vector<ObjectiveFn> objectives;

  PreferenceView view() const { return {p, weights, ideal_values, objectives}; }
};

namespace detail {

inline double gap(const PreferenceView& u, std::size_t k, double x, GapPolicy policy) {
  const double g = eval_objective(u.objectives[k], x) - u.ideal_values[k];
  if (g < 0.0) {
    if (policy == GapPolicy::Strict && g < -kGapTol) {
      throw Error(Errc::NegativeGap, "objective " + std::to_string(k) + " lies " +
                                         std::to_string(-g) + " below its ideal value");
    }
    return 0.0;
  }
  return g;
}

inline void require_exponent(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw Error(Errc::InvalidArgument, "Lp exponent must satisfy 1 <= p < inf");
  }
}

}  // namespace detail

inline double eval_preference(const PreferenceView& u, double x, GapPolicy policy = GapPolicy::Strict) {
  detail::require_exponent(u.p);
  double acc = 0.0;
  for (std::size_t k = 0; k < u.objectives.size(); ++k) {
    const double g = detail::gap(u, k, x, policy);
    acc += u.weights[k] * (u.p == 1.0 ? g : std::pow(g, u.p));
  }
  return u.p == 1.0 ? acc : std::pow(acc, 1.0 / u.p);
}

inline double grad_preference(const PreferenceView& u, double x, GapPolicy policy = GapPolicy::Strict) {
  detail::require_exponent(u.p);
  const std::size_t n = u.objectives.size();
  if (u.p == 1.0) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      detail::gap(u, k, x, policy);  // validates the gap
      acc += u.weights[k] * grad_objective(u.objectives[k], x);
    }
    return acc;
  }
  double sum_pow = 0.0;
  double chain = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double g = detail::gap(u, k, x, policy);
    if (g == 0.0) continue;
    const double gp1 = u.p == 2.0 ? g : std::pow(g, u.p - 1.0);
    sum_pow += u.weights[k] * gp1 * g;
    chain += u.weights[k] * gp1 * grad_objective(u.objectives[k], x);
  }
  const double value = u.p == 2.0 ? std::sqrt(sum_pow) : std::pow(sum_pow, 1.0 / u.p);
  if (value < kPreferenceFloor) return 0.0;
  return (u.p == 2.0 ? 1.0 / value : std::pow(value, 1.0 - u.p)) * chain;
}

inline double eval_preference(const PreferenceIndex& u, double x, GapPolicy policy = GapPolicy::Strict) {
  return eval_preference(u.view(), x, policy);
}

inline double grad_preference(const PreferenceIndex& u, double x, GapPolicy policy = GapPolicy::Strict) {
  return grad_preference(u.view(), x, policy);
}

/// ω_k = |f_k| / Σ_j |f_j|, written into `out`. Returns true when every value is
/// zero and the uniform fallback 1/K was used instead.
inline bool update_weights(std::span<const double> objective_values, std::span<double> out) {
  double total = 0.0;
  for (double v : objective_values) total += std::abs(v);
  if (total == 0.0 || !std::isfinite(total)) {
    const double uniform = 1.0 / static_cast<double>(objective_values.size());
    for (double& w : out) w = uniform;
    return true;
  }
  for (std::size_t k = 0; k < objective_values.size(); ++k) out[k] = std::abs(objective_values[k]) / total;
  return false;
}

inline std::vector<double> update_weights(std::span<const double> objective_values) {
  if (objective_values.empty()) throw Error(Errc::InvalidArgument, "no objective values");
  std::vector<double> w(objective_values.size());
  update_weights(objective_values, w);
  return w;
}

}  // namespace ptalloc
