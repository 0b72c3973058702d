#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ptalloc/error.hpp"

namespace ptalloc {

// States within this distance of a bound count as sitting on it.
inline constexpr double kBoundaryTol = 1e-9;

/// Closed interval [lower, upper], the local constraint set of one agent.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  Interval() = default;
  Interval(double lo, double hi) : lower(lo), upper(hi) {
    if (!(lo <= hi)) {
      throw Error(Errc::InvalidArgument,
                  "interval [" + std::to_string(lo) + ", " + std::to_string(hi) + "] is empty");
    }
  }

  double width() const noexcept { return upper - lower; }
  bool contains(double x, double tol = 0.0) const noexcept {
    return x >= lower - tol && x <= upper + tol;
  }
};

/// Euclidean projection (a clamp for intervals).
inline double project_point(const Interval& set, double x) {
  return std::clamp(x, set.lower, set.upper);
}

/// Directional derivative of the projection at a feasible x: v in the interior,
/// v when it points inward from a bound, 0 when it would leave the set.
inline double project_tangent(const Interval& set, double x, double v) {
  if (!set.contains(x, kBoundaryTol)) {
    throw Error(Errc::InfeasibleState, "state " + std::to_string(x) + " lies outside [" +
                                           std::to_string(set.lower) + ", " +
                                           std::to_string(set.upper) + "]");
  }
  const bool at_upper = x >= set.upper - kBoundaryTol;
  const bool at_lower = x <= set.lower + kBoundaryTol;
  if (at_upper && at_lower) return 0.0;  // degenerate interval
  if (at_upper && v >= 0.0) return 0.0;
  if (at_lower && v <= 0.0) return 0.0;
  return v;
}

/// Product of intervals, projected coordinate-wise.
struct Box {
  std::vector<Interval> sides;

  std::size_t size() const noexcept { return sides.size(); }
};

inline void project_point(const Box& box, std::span<const double> x, std::span<double> out) {
  for (std::size_t i = 0; i < box.size(); ++i) out[i] = project_point(box.sides[i], x[i]);
}

inline void project_tangent(const Box& box, std::span<const double> x, std::span<const double> v,
                            std::span<double> out) {
  for (std::size_t i = 0; i < box.size(); ++i) out[i] = project_tangent(box.sides[i], x[i], v[i]);
}

// Scalar constraint sets the flows can be written against.
template <class Set>
concept ScalarProjectionSet = requires(const Set& s, double x, double v) {
  { project_point(s, x) } -> std::convertible_to<double>;
  { project_tangent(s, x, v) } -> std::convertible_to<double>;
};

static_assert(ScalarProjectionSet<Interval>);

}  // namespace ptalloc
