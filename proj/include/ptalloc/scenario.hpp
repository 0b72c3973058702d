#pragma once

#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptalloc/dynamics.hpp"
#include "ptalloc/error.hpp"
#include "ptalloc/etm.hpp"
#include "ptalloc/graph.hpp"
#include "ptalloc/objectives.hpp"
#include "ptalloc/problem.hpp"
#include "ptalloc/tbg.hpp"

namespace ptalloc {

using Json = nlohmann::json;

// One row of the microgrid parameter table.
struct AgentSpec {
  double demand_base = 0.0;  // P_d
  double reserve = 0.0;      // ϱ, so d = (1 + ϱ) P_d
  double p_min = 0.0, p_max = 0.0;
  double x0 = 0.0;
  std::vector<ObjectiveFn> objectives;

  double demand() const { return (1.0 + reserve) * demand_base; }
};

struct Scenario {
  std::string name = "scenario";
  Matrix adjacency;
  std::vector<AgentSpec> agents;
  std::vector<std::string> objective_names;
  double r_t = 0.2;
  double p = 2.0;
  TechnicalForm technical_form = TechnicalForm::SquaredDeviation;
  bool table_layout = true;  // objectives given as eco/env/tec coefficient rows
  SimConfig sim;
  unsigned seed = 1;

  std::size_t n_agents() const { return agents.size(); }
};

/// Every violated invariant, each naming its field. Empty when the scenario is valid.
inline std::vector<std::string> scenario_issues(const Scenario& sc) {
  std::vector<std::string> out;
  const std::size_t n = sc.agents.size();
  if (n == 0) out.push_back("agents: empty");
  if (static_cast<std::size_t>(sc.adjacency.rows()) != n || static_cast<std::size_t>(sc.adjacency.cols()) != n) {
    out.push_back("adjacency: must be " + std::to_string(n) + "x" + std::to_string(n));
  } else if (n > 0) {
    try {
      build_network(sc.adjacency);
    } catch (const Error& e) {
      out.push_back(std::string("adjacency: ") + e.what());
    }
  }
  double lo = 0.0, hi = 0.0, d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = sc.agents[i];
    const std::string at = "agents[" + std::to_string(i) + "]";
    if (!(a.p_min <= a.p_max)) out.push_back(at + ".P_min: exceeds P_max");
    if (!(a.x0 >= a.p_min && a.x0 <= a.p_max)) out.push_back(at + ".x0: outside [P_min, P_max]");
    if (a.objectives.size() != sc.objective_names.size()) out.push_back(at + ": objective count mismatch");
    for (std::size_t k = 0; k < a.objectives.size(); ++k) {
      const Interval dom(std::min(a.p_min, a.p_max), std::max(a.p_min, a.p_max));
      if (!(strong_convexity_modulus(a.objectives[k], dom) > 0.0)) {
        out.push_back(at + ".objectives[" + std::to_string(k) + "]: not strongly convex on [P_min, P_max]");
      }
    }
    lo += a.p_min;
    hi += a.p_max;
    d += a.demand();
  }
  if (n > 0 && (d < lo || d > hi)) {
    out.push_back("agents: total demand " + std::to_string(d) + " outside [sum P_min, sum P_max] = [" +
                  std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  const auto& s = sc.sim;
  if (!(s.t_pre1 > 0.0 && s.t_pre2 > 0.0 && s.t_pre3 > 0.0)) out.push_back("tbg.t_pre: must be positive");
  if (!(s.t_pre3 > std::max(s.t_pre1, s.t_pre2))) out.push_back("tbg.t_pre: t_pre3 must exceed max(t_pre1, t_pre2)");
  if (!(s.epsilon_reg > 0.0)) out.push_back("tbg.epsilon_reg: must be positive");
  if (!(sc.p >= 1.0)) out.push_back("p: must be at least 1");
  if (!(s.step > 0.0)) out.push_back("integrator.step: must be positive");
  if (!(s.t_end > 0.0)) out.push_back("integrator.t_end: must be positive");
  if (s.sub_etm.size() != sc.objective_names.size()) out.push_back("etm.subproblem.varsigma: one value per objective");
  for (std::size_t k = 0; k < s.sub_etm.size(); ++k) {
    for (const auto& msg : check_params(s.sub_etm[k])) {
      out.push_back("etm.subproblem[" + std::to_string(k) + "]: " + msg);
    }
  }
  for (const auto& msg : check_params(s.comp_etm)) out.push_back("etm.compromise: " + msg);
  return out;
}

inline Problem make_problem(const Scenario& sc) {
  Problem prob;
  prob.network = build_network(sc.adjacency);
  for (const auto& a : sc.agents) {
    prob.bounds.emplace_back(a.p_min, a.p_max);
    prob.demand.push_back(a.demand());
    prob.objectives.push_back(a.objectives);
  }
  prob.objective_names = sc.objective_names;
  prob.p = sc.p;
  prob.check();
  return prob;
}

namespace detail {

inline Json objective_to_json(const ObjectiveFn& f) {
  struct V {
    Json operator()(const Quadratic& q) const { return {{"type", "quadratic"}, {"a", q.a}, {"b", q.b}, {"c", q.c}}; }
    Json operator()(const ScaledQuadratic& q) const {
      return {{"type", "scaled_quadratic"}, {"scale", q.scale}, {"a", q.a}, {"b", q.b}, {"c", q.c}};
    }
    Json operator()(const Technical& t) const {
      return {{"type", "technical"}, {"a", t.a}, {"p_opt", t.p_opt}, {"form", to_string(t.form)}};
    }
  };
  return std::visit(V{}, f);
}

inline ObjectiveFn objective_from_json(const Json& j, const std::string& where) {
  const auto type = j.at("type").get<std::string>();
  if (type == "quadratic") return Quadratic{j.at("a"), j.at("b"), j.at("c")};
  if (type == "scaled_quadratic") return ScaledQuadratic{j.at("scale"), j.at("a"), j.at("b"), j.at("c")};
  if (type == "technical") {
    return Technical{j.at("a"), j.at("p_opt"), technical_form_from_string(j.value("form", "squared_deviation"))};
  }
  throw Error(Errc::ValidationError, where + ".type: unknown objective type '" + type + "'");
}

inline EtmParams etm_from_json(const Json& j, double varsigma) {
  EtmParams p;
  p.alpha = j.value("alpha", p.alpha);
  p.phi = j.value("phi", p.phi);
  p.delta = j.value("delta", p.delta);
  p.beta = j.value("beta", p.beta);
  p.eta0 = j.value("eta0", p.eta0);
  p.varsigma = varsigma;
  return p;
}

inline Json etm_to_json(const EtmParams& p) {
  return {{"alpha", p.alpha}, {"phi", p.phi}, {"delta", p.delta}, {"beta", p.beta}, {"eta0", p.eta0}};
}

}  // namespace detail

enum class LoadMode { Strict, Lenient };

/// Parses the JSON scenario document. Strict mode throws ValidationError on the
/// first violated invariant; lenient mode leaves that to scenario_issues().
inline Scenario scenario_from_json(const Json& j, LoadMode mode = LoadMode::Strict) {
  Scenario sc;
  std::string where = "";
  try {
    sc.name = j.value("name", sc.name);
    sc.r_t = j.value("r_t", sc.r_t);
    sc.p = j.value("p", sc.p);
    sc.seed = j.value("seed", sc.seed);
    sc.technical_form = technical_form_from_string(j.value("technical_form", std::string("squared_deviation")));

    where = "agents";
    const auto& agents = j.at("agents");
    sc.table_layout = !j.contains("objective_names");
    if (sc.table_layout) {
      sc.objective_names = {"eco", "env", "tec"};
    } else {
      sc.objective_names = j.at("objective_names").get<std::vector<std::string>>();
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
      where = "agents[" + std::to_string(i) + "]";
      const auto& a = agents[i];
      AgentSpec spec;
      spec.demand_base = a.at("P_d");
      spec.reserve = a.value("rho", 0.0);
      spec.p_min = a.at("P_min");
      spec.p_max = a.at("P_max");
      spec.x0 = a.value("x0", 0.5 * (spec.p_min + spec.p_max));
      if (sc.table_layout) {
        const auto eco = a.at("eco").get<std::vector<double>>();
        const auto env = a.at("env").get<std::vector<double>>();
        const auto& tec = a.at("tec");
        if (eco.size() != 3 || env.size() != 3) throw Error(Errc::ValidationError, where + ": eco/env need [a, b, c]");
        spec.objectives.push_back(Quadratic{eco[0], eco[1], eco[2]});
        spec.objectives.push_back(ScaledQuadratic{sc.r_t, env[0], env[1], env[2]});
        spec.objectives.push_back(Technical{tec.at("a"), tec.at("p_opt"), sc.technical_form});
      } else {
        const auto& objs = a.at("objectives");
        for (std::size_t k = 0; k < objs.size(); ++k) {
          spec.objectives.push_back(
              detail::objective_from_json(objs[k], where + ".objectives[" + std::to_string(k) + "]"));
        }
      }
      sc.agents.push_back(std::move(spec));
    }

    where = "adjacency";
    if (j.contains("adjacency")) {
      const auto rows = j.at("adjacency").get<std::vector<std::vector<double>>>();
      sc.adjacency = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) throw Error(Errc::ValidationError, "adjacency: not square");
        for (std::size_t c = 0; c < rows.size(); ++c) {
          sc.adjacency(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
      }
    } else {
      sc.adjacency = ring_adjacency(sc.agents.size());
    }

    where = "tbg";
    auto& s = sc.sim;
    const auto& tbg = j.at("tbg");
    s.tbg_kind = tbg_kind_from_string(tbg.value("kind", std::string("quadratic")));
    const auto tp = tbg.at("t_pre").get<std::vector<double>>();
    if (tp.size() != 3) throw Error(Errc::ValidationError, "tbg.t_pre: need [t_pre1, t_pre2, t_pre3]");
    s.t_pre1 = tp[0];
    s.t_pre2 = tp[1];
    s.t_pre3 = tp[2];
    s.epsilon_reg = tbg.value("epsilon_reg", s.epsilon_reg);
    s.sigma = tbg.value("sigma", s.sigma);

    where = "etm";
    const auto& etm = j.at("etm");
    s.etm_kind = etm_kind_from_string(etm.value("kind", std::string("dynamic_paper")));
    const auto& sub = etm.at("subproblem");
    const auto sig = sub.at("varsigma").get<std::vector<double>>();
    s.sub_etm.clear();
    for (double v : sig) s.sub_etm.push_back(detail::etm_from_json(sub, v));
    const auto& comp = etm.at("compromise");
    s.comp_etm = detail::etm_from_json(comp, comp.at("varsigma").get<double>());
    s.saturate_eta = etm.value("saturate", s.saturate_eta);

    where = "integrator";
    if (j.contains("integrator")) {
      const auto& in = j.at("integrator");
      s.step = in.value("step", s.step);
      s.substeps = in.value("substeps", s.substeps);
      s.stiffness_limit = in.value("stiffness_limit", s.stiffness_limit);
      s.t_end = in.value("t_end", s.t_end);
      s.stride = in.value("stride", s.stride);
    }
    where = "metrics";
    if (j.contains("metrics")) s.window = j.at("metrics").value("window", s.window);
    where = "initial";
    if (j.contains("initial")) {
      s.y0 = j.at("initial").value("y", s.y0);
      s.nu0 = j.at("initial").value("nu", s.nu0);
    }
    s.x0.clear();
    for (const auto& a : sc.agents) s.x0.push_back(a.x0);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(Errc::ValidationError, (where.empty() ? std::string("scenario") : where) + ": " + e.what());
  }

  if (mode == LoadMode::Strict) {
    const auto issues = scenario_issues(sc);
    if (!issues.empty()) throw Error(Errc::ValidationError, issues.front());
  }
  return sc;
}

inline Json scenario_to_json(const Scenario& sc) {
  Json j;
  j["name"] = sc.name;
  j["r_t"] = sc.r_t;
  j["p"] = sc.p;
  j["seed"] = sc.seed;
  j["technical_form"] = to_string(sc.technical_form);
  if (!sc.table_layout) j["objective_names"] = sc.objective_names;
  Json agents = Json::array();
  for (const auto& a : sc.agents) {
    Json ja{{"P_d", a.demand_base}, {"rho", a.reserve}, {"P_min", a.p_min}, {"P_max", a.p_max}, {"x0", a.x0}};
    if (sc.table_layout) {
      const auto& eco = std::get<Quadratic>(a.objectives.at(0));
      const auto& env = std::get<ScaledQuadratic>(a.objectives.at(1));
      const auto& tec = std::get<Technical>(a.objectives.at(2));
      ja["eco"] = {eco.a, eco.b, eco.c};
      ja["env"] = {env.a, env.b, env.c};
      ja["tec"] = {{"a", tec.a}, {"p_opt", tec.p_opt}};
    } else {
      Json objs = Json::array();
      for (const auto& f : a.objectives) objs.push_back(detail::objective_to_json(f));
      ja["objectives"] = objs;
    }
    agents.push_back(ja);
  }
  j["agents"] = agents;
  std::vector<std::vector<double>> adj(static_cast<std::size_t>(sc.adjacency.rows()));
  for (Eigen::Index r = 0; r < sc.adjacency.rows(); ++r) {
    for (Eigen::Index c = 0; c < sc.adjacency.cols(); ++c) adj[static_cast<std::size_t>(r)].push_back(sc.adjacency(r, c));
  }
  j["adjacency"] = adj;
  const auto& s = sc.sim;
  j["tbg"] = {{"kind", to_string(s.tbg_kind)},
              {"t_pre", {s.t_pre1, s.t_pre2, s.t_pre3}},
              {"epsilon_reg", s.epsilon_reg},
              {"sigma", s.sigma}};
  Json sub = s.sub_etm.empty() ? Json::object() : detail::etm_to_json(s.sub_etm.front());
  std::vector<double> sig;
  for (const auto& p : s.sub_etm) sig.push_back(p.varsigma);
  sub["varsigma"] = sig;
  Json comp = detail::etm_to_json(s.comp_etm);
  comp["varsigma"] = s.comp_etm.varsigma;
  j["etm"] = {{"kind", to_string(s.etm_kind)}, {"saturate", s.saturate_eta}, {"subproblem", sub}, {"compromise", comp}};
  j["integrator"] = {{"step", s.step},
                     {"substeps", s.substeps},
                     {"stiffness_limit", s.stiffness_limit},
                     {"t_end", s.t_end},
                     {"stride", s.stride}};
  j["metrics"] = {{"window", s.window}};
  j["initial"] = {{"y", s.y0}, {"nu", s.nu0}};
  return j;
}

inline Scenario load_scenario(const std::string& path, LoadMode mode = LoadMode::Strict) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open '" + path + "'");
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);  // comments allowed
  } catch (const Json::parse_error& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
  return scenario_from_json(j, mode);
}

inline void save_scenario(const Scenario& sc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::InvalidArgument, "cannot write '" + path + "'");
  out << scenario_to_json(sc).dump(2) << '\n';
}

/// Case presets: TBG kind and ETM variant per the six comparison configurations.
inline const std::vector<std::string>& case_labels() {
  static const std::vector<std::string> labels = {"case1", "case2", "case3", "case4", "case5", "case6"};
  return labels;
}

inline Scenario apply_case(Scenario sc, const std::string& label) {
  auto& s = sc.sim;
  s.epsilon_reg = 1e-7;
  if (label == "case1") {
    s.tbg_kind = TbgKind::Quadratic; s.etm_kind = EtmKind::DynamicPaper;
  } else if (label == "case2") {
    s.tbg_kind = TbgKind::ConstantBoost; s.etm_kind = EtmKind::DynamicPaper;
  } else if (label == "case3") {
    s.tbg_kind = TbgKind::PolynomialBlowup; s.etm_kind = EtmKind::DynamicPaper;
  } else if (label == "case4") {
    s.tbg_kind = TbgKind::PolynomialBlowup; s.etm_kind = EtmKind::DynamicPaper; s.epsilon_reg = 1e-9;
  } else if (label == "case5") {
    s.tbg_kind = TbgKind::Quadratic; s.etm_kind = EtmKind::Static;
  } else if (label == "case6") {
    s.tbg_kind = TbgKind::Quadratic; s.etm_kind = EtmKind::DynamicPrior;
  } else {
    throw Error(Errc::InvalidArgument, "unknown case '" + label + "' (case1..case6)");
  }
  sc.name = label;
  return sc;
}

}  // namespace ptalloc
