// ptalloc: run, compare and check the event-triggered prescribed-time allocation algorithms.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ptalloc/bounds.hpp"
#include "ptalloc/dynamics.hpp"
#include "ptalloc/oracle.hpp"
#include "ptalloc/report.hpp"
#include "ptalloc/scenario.hpp"
#include "ptalloc/validate.hpp"

namespace fs = std::filesystem;
using namespace ptalloc;

namespace {

struct Common {
  std::vector<std::string> scenarios;
  std::string out;
  std::optional<double> step;
  std::optional<double> window;
  std::vector<std::string> cases;
};

void add_common(CLI::App* cmd, Common& c, bool many) {
  if (many) {
    cmd->add_option("--scenario", c.scenarios, "scenario file (repeatable)")->required();
    cmd->add_option("--case", c.cases, "case preset case1..case6 (repeatable)");
  } else {
    cmd->add_option("--scenario", c.scenarios, "scenario file")->required()->expected(1);
    cmd->add_option("--case", c.cases, "case preset case1..case6")->expected(0, 1);
  }
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--step", c.step, "integration step h [s]")->check(CLI::PositiveNumber);
  cmd->add_option("--window", c.window, "event-count window [s]")->check(CLI::PositiveNumber);
}

Scenario prepare(const std::string& path, const std::string& case_label, const Common& c,
                 LoadMode mode = LoadMode::Strict) {
  Scenario sc = load_scenario(path, mode);
  if (!case_label.empty()) sc = apply_case(std::move(sc), case_label);
  if (c.step) sc.sim.step = *c.step;
  if (c.window) sc.sim.window = *c.window;
  return sc;
}

struct CaseOutcome {
  CaseRow row;
  RunMetrics metrics;
};

CaseOutcome run_one(const Scenario& sc, const std::string& label, const std::string& out_dir, bool verbose) {
  const Problem prob = make_problem(sc);
  const auto ref = solve_reference(prob);
  const auto bounds = layer_bounds(prob, sc.sim, ref);
  if (verbose) {
    for (const auto& b : bounds) {
      if (!b.sigma_ok) {
        std::fprintf(stderr, "warning: %s varsigma above the sufficient limit %.4g (bound uncertified)\n",
                     b.layer.c_str(), b.constants.sigma_max);
      }
    }
  }
  auto cfg = sc.sim;
  cfg.record_trajectory = !out_dir.empty();
  const auto res = run_algorithm1(prob, cfg, &ref);
  if (!out_dir.empty()) write_run_artifacts(out_dir, label, prob, res, &bounds);
  CaseOutcome o;
  o.row = {label, to_string(sc.sim.tbg_kind), to_string(sc.sim.etm_kind), res.metrics.agent_totals,
           res.metrics.total, res.metrics.ce_at_tpre3};
  o.metrics = res.metrics;
  return o;
}

int cmd_run(const Common& c) {
  const std::string label = c.cases.empty() ? "" : c.cases.front();
  const Scenario sc = prepare(c.scenarios.front(), label, c);
  const std::string name = label.empty() ? sc.name : label;
  const auto o = run_one(sc, name, c.out, true);
  const auto& m = o.metrics;
  std::printf("case %s: events %zu (sub %zu, compromise %zu) in %.3g s, CE %.6g kW\n", name.c_str(), m.total,
              m.total_sub, m.total_comp, m.window, m.ce_at_tpre3);
  std::printf("x(t_end) =");
  for (double x : m.x_final) std::printf(" %.4f", x);
  std::printf("\n|x(t_end) - x*|inf = %.3g kW, min inter-event %.3g s, min eta %.4g, %.2f s wall\n",
              m.distance_to_oracle.value_or(NAN), m.min_inter_event, m.min_eta, m.wall_seconds);
  if (!c.out.empty()) std::printf("artifacts in %s\n", c.out.c_str());
  return 0;
}

int cmd_oracle(const Common& c) {
  const std::string label = c.cases.empty() ? "" : c.cases.front();
  const Scenario sc = prepare(c.scenarios.front(), label, c);
  const Problem prob = make_problem(sc);
  const auto ref = solve_reference(prob);
  auto j = reference_json(prob, ref);
  std::vector<ScalarFn> gu = preference_gradients(ref.preferences);
  const auto kkt = verify_kkt(ref.compromise, gu, prob.bounds, prob.total_demand());
  j["kkt"] = {{"balance", kkt.balance}, {"stationarity", kkt.stationarity}, {"feasibility", kkt.feasibility}};
  const auto text = j.dump(2) + "\n";
  std::cout << text;
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text_file(fs::path(c.out) / "oracle.json", text);
  }
  return 0;
}

int cmd_compare(const Common& c) {
  std::vector<std::pair<Scenario, std::string>> jobs;
  for (const auto& path : c.scenarios) {
    if (c.cases.empty()) {
      Scenario sc = prepare(path, "", c);
      jobs.emplace_back(sc, sc.name);
    } else {
      for (const auto& label : c.cases) jobs.emplace_back(prepare(path, label, c), label);
    }
  }
  if (jobs.size() < 2) {
    std::fprintf(stderr, "compare needs at least two cases (repeat --case or --scenario)\n");
    return 2;
  }
  std::vector<std::future<CaseOutcome>> futures;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    std::string dir;
    if (!c.out.empty()) dir = (fs::path(c.out) / (std::to_string(j) + "_" + jobs[j].second)).string();
    futures.push_back(std::async(std::launch::async, [&, j, dir] { return run_one(jobs[j].first, jobs[j].second, dir, false); }));
  }
  std::vector<CaseRow> rows;
  for (auto& f : futures) rows.push_back(f.get().row);
  write_compare_text(std::cout, rows);
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream csv(fs::path(c.out) / "compare.csv");
    write_compare_csv(csv, rows);
    std::ofstream txt(fs::path(c.out) / "compare.txt");
    write_compare_text(txt, rows);
  }
  return 0;
}

int cmd_validate(const Common& c) {
  const std::string label = c.cases.empty() ? "" : c.cases.front();
  const Scenario sc = prepare(c.scenarios.front(), label, c, LoadMode::Lenient);
  const auto rep = validate_scenario(sc);
  std::ostringstream os;
  for (const auto& r : rep.results) {
    const char* tag = r.informational ? (r.passed ? "INFO" : "WARN") : (r.passed ? "PASS" : "FAIL");
    os << tag << "  " << r.name << "  " << r.detail << '\n';
  }
  std::cout << os.str();
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text_file(fs::path(c.out) / "validate.txt", os.str());
  }
  return rep.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered prescribed-time multiobjective allocation"};
  app.require_subcommand(1);
  Common run_opts, oracle_opts, compare_opts, validate_opts;
  auto* run = app.add_subcommand("run", "simulate one case and write trajectory, events and metrics");
  add_common(run, run_opts, false);
  auto* oracle = app.add_subcommand("oracle", "centralized reference solution");
  add_common(oracle, oracle_opts, false);
  auto* compare = app.add_subcommand("compare", "run several cases and tabulate communications and CE");
  add_common(compare, compare_opts, true);
  auto* validate = app.add_subcommand("validate", "property suite; nonzero exit if any property fails");
  add_common(validate, validate_opts, false);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return cmd_run(run_opts);
    if (*oracle) return cmd_oracle(oracle_opts);
    if (*compare) return cmd_compare(compare_opts);
    if (*validate) return cmd_validate(validate_opts);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == Errc::InvariantViolation || e.code() == Errc::NonFiniteState ? 3 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
