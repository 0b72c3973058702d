#pragma once

#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "ptalloc/error.hpp"
#include "ptalloc/graph.hpp"
#include "ptalloc/objectives.hpp"
#include "ptalloc/projection.hpp"

namespace ptalloc {

/// The multiobjective allocation instance: who talks to whom, local boxes,
/// local demands and objectives[i][k] for agent i, objective k.
struct Problem {
  Network network;
  std::vector<Interval> bounds;
  std::vector<double> demand;
  std::vector<std::vector<ObjectiveFn>> objectives;
  std::vector<std::string> objective_names;
  double p = 2.0;

  std::size_t n_agents() const noexcept { return bounds.size(); }
  std::size_t n_objectives() const noexcept { return objectives.empty() ? 0 : objectives.front().size(); }
  double total_demand() const { return std::accumulate(demand.begin(), demand.end(), 0.0); }

  void check() const {
    const std::size_t n = network.size();
    if (bounds.size() != n || demand.size() != n || objectives.size() != n) {
      throw Error(Errc::InvalidArgument, "agent count mismatch between network and problem data");
    }
    if (n == 0) throw Error(Errc::InvalidArgument, "problem has no agents");
    const std::size_t k = objectives.front().size();
    if (k == 0) throw Error(Errc::InvalidArgument, "problem has no objectives");
    for (const auto& row : objectives) {
      if (row.size() != k) throw Error(Errc::InvalidArgument, "agents disagree on the objective count");
    }
    double lo = 0.0, hi = 0.0;
    for (const auto& b : bounds) {
      lo += b.lower;
      hi += b.upper;
    }
    const double d = total_demand();
    if (d < lo - 1e-9 || d > hi + 1e-9) {
      throw Error(Errc::InfeasibleDemand, "total demand " + std::to_string(d) + " outside [" +
                                              std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
  }
};

}  // namespace ptalloc
