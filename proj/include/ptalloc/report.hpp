#pragma once

#include <cstddef>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptalloc/bounds.hpp"
#include "ptalloc/dynamics.hpp"
#include "ptalloc/oracle.hpp"
#include "ptalloc/problem.hpp"

namespace ptalloc {

namespace detail {

// shortest text that parses back to the same double
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string objective_label(const Problem& prob, int k) {
  if (k < 0) return "-";
  const auto idx = static_cast<std::size_t>(k);
  return idx < prob.objective_names.size() ? prob.objective_names[idx] : std::to_string(k);
}

inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace detail

/// t,layer,agent,objective,var,value
inline void write_trajectory_csv(std::ostream& out, const Problem& prob, const SimulationResult& res) {
  const auto& lay = res.layout;
  out << "t,layer,agent,objective,var,value\n";
  for (const auto& smp : res.trajectory) {
    const auto t = detail::num(smp.t);
    const auto w = live_weights(prob, lay, smp.state);
    for (std::size_t k = 0; k < lay.k; ++k) {
      const auto obj = detail::objective_label(prob, static_cast<int>(k));
      for (std::size_t i = 0; i < lay.n; ++i) {
        auto row = [&](const char* layer, const char* var, double v) {
          out << t << ',' << layer << ',' << i << ',' << obj << ',' << var << ',' << detail::num(v) << '\n';
        };
        row("sub", "xbar", smp.state[lay.sub(k, StateLayout::XBar, i)]);
        row("sub", "y", smp.state[lay.sub(k, StateLayout::Y, i)]);
        row("sub", "z", smp.state[lay.sub(k, StateLayout::Z, i)]);
        row("sub", "eta", smp.state[lay.sub(k, StateLayout::Eta1, i)]);
        row("sub", "omega", w[i][k]);
        row("ideal", "xhat", smp.state[lay.sub(k, StateLayout::XHat, i)]);
      }
    }
    double imb = 0.0;
    for (std::size_t i = 0; i < lay.n; ++i) {
      auto row = [&](const char* var, double v) {
        out << t << ",compromise," << i << ",-," << var << ',' << detail::num(v) << '\n';
      };
      row("x", smp.state[lay.comp(StateLayout::X, i)]);
      row("nu", smp.state[lay.comp(StateLayout::Nu, i)]);
      row("mu", smp.state[lay.comp(StateLayout::Mu, i)]);
      row("eta", smp.state[lay.comp(StateLayout::Eta3, i)]);
      imb += prob.demand[i] - smp.state[lay.comp(StateLayout::X, i)];
    }
    out << t << ",network,-,-,imbalance," << detail::num(imb) << '\n';
  }
}

/// t,layer,agent,objective,broadcast_value
inline void write_events_csv(std::ostream& out, const Problem& prob, const SimulationResult& res) {
  out << "t,layer,agent,objective,broadcast_value\n";
  for (const auto& e : res.events) {
    out << detail::num(e.t) << ',' << (e.objective < 0 ? "compromise" : "sub") << ',' << e.agent << ','
        << detail::objective_label(prob, e.objective) << ',' << detail::num(e.value) << '\n';
  }
}

inline nlohmann::json metrics_json(const std::string& label, const Problem& prob, const SimulationResult& res,
                                   const std::vector<LayerBound>* bounds = nullptr) {
  const auto& m = res.metrics;
  nlohmann::json j;
  j["case"] = label;
  j["window"] = m.window;
  j["per_agent_counts"] = m.agent_totals;
  nlohmann::json sub;
  for (std::size_t k = 0; k < m.sub_counts.size(); ++k) sub[detail::objective_label(prob, static_cast<int>(k))] = m.sub_counts[k];
  j["subproblem_counts"] = sub;
  j["compromise_counts"] = m.comp_counts;
  j["totals"] = {{"subproblem", m.total_sub}, {"compromise", m.total_comp}, {"all", m.total}};
  j["CE"] = detail::finite_or_null(m.ce_at_tpre3);
  j["final_imbalance"] = m.final_imbalance;
  j["min_inter_event"] = detail::finite_or_null(m.min_inter_event);
  j["min_eta"] = detail::finite_or_null(m.min_eta);
  j["min_eta_bound_ratio"] = detail::finite_or_null(m.min_eta_bound_ratio);
  j["max_abs_sum_z"] = m.max_conservation_z;
  j["max_abs_sum_mu"] = m.max_conservation_mu;
  j["max_weight_sum_deviation"] = m.max_weight_sum_dev;
  j["max_pre_clamp_overshoot"] = m.max_overshoot;
  j["max_infeasibility"] = m.max_infeasibility;
  j["threshold_ordering_violations"] = m.ordering_violations;
  j["max_slices"] = m.max_slices;
  j["min_eval_step"] = detail::finite_or_null(m.min_eval_step);
  j["max_gain"] = m.max_gain;
  j["steps"] = m.steps;
  j["wall_seconds"] = m.wall_seconds;
  j["x_final"] = m.x_final;
  j["distance_to_oracle"] = m.distance_to_oracle ? nlohmann::json(*m.distance_to_oracle) : nlohmann::json(nullptr);
  j["distance_at_tpre3"] = m.distance_at_tpre3 ? nlohmann::json(*m.distance_at_tpre3) : nlohmann::json(nullptr);
  if (bounds) {
    nlohmann::json jb = nlohmann::json::array();
    for (const auto& b : *bounds) {
      jb.push_back({{"layer", b.layer},
                    {"rate", b.bound.rate},
                    {"v0", b.bound.v0},
                    {"scale", b.bound.scale},
                    {"gamma_at_tpre", b.bound.gamma_at_tpre},
                    {"epsilon_bound", detail::finite_or_null(b.bound.epsilon_bound)},
                    {"modulus", b.modulus},
                    {"sigma_ok", b.sigma_ok},
                    {"certified", b.certified()}});
    }
    j["bounds"] = jb;
  }
  return j;
}

inline nlohmann::json reference_json(const Problem& prob, const ReferenceSolution& ref) {
  auto dispatch = [](const DispatchSolution& s) {
    std::vector<std::string> act;
    for (auto a : s.active_bounds) act.emplace_back(to_string(a));
    return nlohmann::json{{"x_star", s.x_star},
                          {"multiplier", s.multiplier},
                          {"active_bounds", act},
                          {"objective_value", detail::finite_or_null(s.objective_value)}};
  };
  nlohmann::json j;
  nlohmann::json subs;
  for (std::size_t k = 0; k < ref.subproblems.size(); ++k) {
    subs[detail::objective_label(prob, static_cast<int>(k))] = dispatch(ref.subproblems[k]);
  }
  j["subproblems"] = subs;
  j["weights"] = ref.weights;
  nlohmann::json ideal = nlohmann::json::array();
  for (const auto& row : ref.ideal_points) {
    nlohmann::json r = nlohmann::json::array();
    for (const auto& p : row) r.push_back({{"x", p.x}, {"value", p.value}});
    ideal.push_back(r);
  }
  j["ideal_points"] = ideal;
  j["compromise"] = dispatch(ref.compromise);
  j["total_demand"] = prob.total_demand();
  return j;
}

struct CaseRow {
  std::string label;
  std::string tbg;
  std::string etm;
  std::vector<std::size_t> agent_totals;
  std::size_t total = 0;
  double ce = 0.0;
};

inline void write_compare_text(std::ostream& out, const std::vector<CaseRow>& rows) {
  const std::size_t n = rows.empty() ? 0 : rows.front().agent_totals.size();
  out << std::left << std::setw(8) << "case" << std::setw(19) << "tbg" << std::setw(15) << "etm";
  for (std::size_t i = 0; i < n; ++i) out << std::right << std::setw(8) << ("a" + std::to_string(i + 1));
  out << std::setw(9) << "total" << std::setw(13) << "CE" << '\n';
  for (const auto& r : rows) {
    out << std::left << std::setw(8) << r.label << std::setw(19) << r.tbg << std::setw(15) << r.etm << std::right;
    for (auto c : r.agent_totals) out << std::setw(8) << c;
    out << std::setw(9) << r.total << std::setw(13) << std::setprecision(5) << r.ce << '\n';
  }
}

inline void write_compare_csv(std::ostream& out, const std::vector<CaseRow>& rows) {
  const std::size_t n = rows.empty() ? 0 : rows.front().agent_totals.size();
  out << "case,tbg,etm";
  for (std::size_t i = 0; i < n; ++i) out << ",agent" << i;
  out << ",total,CE\n";
  for (const auto& r : rows) {
    out << r.label << ',' << r.tbg << ',' << r.etm;
    for (auto c : r.agent_totals) out << ',' << c;
    out << ',' << r.total << ',' << detail::num(r.ce) << '\n';
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write '" + path.string() + "'");
  out << text;
}

/// trajectory.csv, events.csv and metrics.json under `dir`.
inline void write_run_artifacts(const std::filesystem::path& dir, const std::string& label, const Problem& prob,
                                const SimulationResult& res, const std::vector<LayerBound>* bounds) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "trajectory.csv");
    write_trajectory_csv(out, prob, res);
  }
  {
    std::ofstream out(dir / "events.csv");
    write_events_csv(out, prob, res);
  }
  write_text_file(dir / "metrics.json", metrics_json(label, prob, res, bounds).dump(2) + "\n");
}

}  // namespace ptalloc
