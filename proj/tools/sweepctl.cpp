// sweepctl: command-line front end for scenario simulation, solving and verification.
//
// Exit codes: 0 success, 1 usage or input error, 2 infeasible, 3 verification failed.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "sweep/sweep.hpp"

namespace {

using sweep::io::json;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kUsage = 1, kInfeasible = 2, kVerifyFailed = 3 };

struct Flags {
  std::string scenario;
  std::optional<double> h;
  std::optional<int> grid_K;
  std::optional<unsigned> seed;
  std::optional<double> tol;
  std::optional<double> penalty_k;
  std::string out{"."};
  std::string controls;
};

void add_common(CLI::App* cmd, Flags& f, bool controls) {
  cmd->set_help_flag("--help", "print this help and exit");
  cmd->add_option("scenario", f.scenario, "scenario file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--h", f.h, "fine integration step");
  cmd->add_option("--grid-K", f.grid_K, "number of upper control pieces");
  cmd->add_option("--seed", f.seed, "multistart seed");
  cmd->add_option("--tol", f.tol, "verification tolerance");
  cmd->add_option("--penalty-k", f.penalty_k, "penalty stiffness");
  cmd->add_option("--out", f.out, "output directory");
  if (controls) cmd->add_option("--controls", f.controls, "trajectory table with controls")->check(CLI::ExistingFile);
}

sweep::Scenario load(const Flags& f) {
  sweep::Scenario sc = sweep::io::parse_scenario(f.scenario);
  if (f.h) sc.solver.h = *f.h;
  if (f.grid_K) sc.solver.grid_K = *f.grid_K;
  if (f.seed) sc.solver.seed = *f.seed;
  if (f.tol) sc.solver.tol = *f.tol;
  if (f.penalty_k) sc.solver.penalty_k = *f.penalty_k;
  sc.validate();
  return sc;
}

json flags_json(const std::string& command, const Flags& f, const sweep::Scenario& sc) {
  return {{"command", command},
          {"scenario", f.scenario},
          {"h", sweep::io::round12(sc.solver.h > 0.0 ? sc.solver.h : sc.T / sweep::kDefaultSteps)},
          {"grid_K", sc.solver.grid_K},
          {"seed", sc.solver.seed},
          {"tol", sweep::io::round12(sc.solver.tol)},
          {"penalty_k", sweep::io::round12(sc.solver.penalty_k)},
          {"out", f.out},
          {"controls", f.controls}};
}

sweep::Controls rest_controls(const sweep::Scenario& sc, const sweep::Grid& g) {
  sweep::Controls c;
  for (const auto& p : sc.participants) c.push_back(sweep::ControlProfile::constant(g, p.V.project(sweep::VecX::Zero(2))));
  return c;
}

sweep::Controls rest_lower(const sweep::Scenario& sc, const sweep::Grid& g) {
  sweep::Controls c;
  for (const auto& p : sc.participants) c.push_back(sweep::ControlProfile::constant(g, p.U.project(sweep::VecX::Zero(p.U.dim()))));
  return c;
}

sweep::BilevelSolution from_controls(const sweep::Scenario& sc, const std::string& path, const std::string& method) {
  auto cf = sweep::io::read_controls_csv(sweep::io::read_file(path), sc, path);
  std::vector<sweep::Vec2> x0 = cf.x0.empty() ? sc.default_x0() : cf.x0;
  return sweep::assemble_solution(sc, std::move(cf.v), std::move(cf.u), std::move(x0), method);
}

void write_outputs(const Flags& f, const json& summary, const std::string* csv) {
  const fs::path dir(f.out);
  if (csv) sweep::io::atomic_write(dir / "trajectory.csv", *csv);
  sweep::io::atomic_write(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
}

json base_summary(const std::string& command, const Flags& f, const sweep::Scenario& sc) {
  json s;
  s["command"] = command;
  s["scenario"] = {{"name", sc.name}, {"hash", sweep::io::scenario_hash(sc)}};
  s["flags"] = flags_json(command, f, sc);
  return s;
}

int cmd_simulate(const Flags& f) {
  const auto sc = load(f);
  sweep::BilevelSolution sol;
  if (f.controls.empty()) {
    const sweep::Grid g = sweep::Grid::uniform(sc.T, sc.steps());
    sol = sweep::assemble_solution(sc, rest_controls(sc, g), rest_lower(sc, g), sc.default_x0(), "simulate");
  } else {
    sol = from_controls(sc, f.controls, "simulate");
  }
  const auto penalty = sweep::integrate_lower_penalty(sc, sol.y, sol.u, sol.x0, {sc.solver.penalty_k, 0.0});
  double gap = 0.0;
  for (int i = 0; i < sc.N(); ++i) gap = std::max(gap, (penalty.terminal(i) - sol.x.terminal(i)).norm());
  json s = base_summary("simulate", f, sc);
  s["solution"] = sweep::io::solution_json(sc, sol);
  s["penalty_terminal_gap"] = sweep::io::round12(gap);
  const std::string csv = sweep::io::trajectory_csv(sol);
  const int code = sol.audit.ok() ? kOk : kInfeasible;
  s["exit_code"] = code;
  write_outputs(f, s, &csv);
  return code;
}

int cmd_solve(const Flags& f) {
  const auto sc = load(f);
  std::vector<double> rho;
  for (const auto& p : sc.participants) rho.push_back(p.rho);
  const auto sol = sweep::solve_bilevel_direct(sc, sc.solver.grid_K, rho, sc.solver.seed);
  json s = base_summary("solve", f, sc);
  s["solution"] = sweep::io::solution_json(sc, sol);
  s["exit_code"] = kOk;
  const std::string csv = sweep::io::trajectory_csv(sol);
  write_outputs(f, s, &csv);
  return kOk;
}

int cmd_casestudy(const Flags& f) {
  const auto sc = load(f);
  const auto r = sweep::solve_twodisk_parametric(sc);
  const auto& p = r.params;
  json s = base_summary("casestudy", f, sc);
  s["parameters"] = {{"t_a", sweep::io::round12(p.t_a)},
                     {"t_b", sweep::io::round12(p.t_b)},
                     {"v_bar", sweep::io::round12(p.v_bar)},
                     {"J_H", sweep::io::round12(p.J_H())},
                     {"terminal_gap", sweep::io::round12(p.gamma(p.T))},
                     {"lead", p.lead + 1},
                     {"trail", p.trail + 1}};
  s["solution"] = sweep::io::solution_json(sc, r.solution);
  const int code = r.solution.audit.ok(1e-3) ? kOk : kInfeasible;
  s["exit_code"] = code;
  const std::string csv = sweep::io::trajectory_csv(r.solution);
  write_outputs(f, s, &csv);
  return code;
}

int cmd_verify(const Flags& f) {
  const auto sc = load(f);
  if (f.controls.empty()) throw CLI::RequiredError("--controls");
  const auto sol = from_controls(sc, f.controls, "supplied");
  sweep::FitOptions opt;
  opt.tol = sc.solver.tol;
  const auto fit = sweep::fit_multipliers(sc, sol, opt);
  json s = base_summary("verify", f, sc);
  s["solution"] = sweep::io::solution_json(sc, sol);
  s["achieved_ratio"] = sweep::io::round12(fit.achieved);
  s["nco"] = sweep::io::nco_json(fit.report);
  const int code = fit.verified ? kOk : kVerifyFailed;
  s["exit_code"] = code;
  write_outputs(f, s, nullptr);
  return code;
}

int cmd_h5check(const Flags& f) {
  const auto sc = load(f);
  sweep::BilevelSolution sol;
  std::string source = "controls";
  if (!f.controls.empty()) {
    sol = from_controls(sc, f.controls, "supplied");
  } else {
    try {
      sol = sweep::solve_twodisk_parametric(sc).solution;
      source = "casestudy";
    } catch (const sweep::Error& e) {
      if (e.kind() != sweep::ErrorKind::UnsupportedFamily) throw;
      const sweep::Grid g = sweep::Grid::uniform(sc.T, sc.steps());
      sol = sweep::assemble_solution(sc, rest_controls(sc, g), rest_lower(sc, g), sc.default_x0(), "rest");
      source = "rest";
    }
  }
  json s = base_summary("h5check", f, sc);
  s["path"] = source;
  const auto samples = sweep::contact_samples(sol.y, sol.x);
  json parts = json::array();
  bool confirmed = !samples.empty();
  if (!samples.empty()) {
    const auto bounds = sweep::h5_bounds(sc, samples);
    for (int i = 0; i < sc.N(); ++i) {
      const auto& b = bounds[static_cast<std::size_t>(i)];
      json pj = {{"participant", i + 1}, {"samples", b.samples}, {"M", sweep::io::round12(sc.at(i).M)}};
      if (b.samples > 0) {
        pj["M_bar"] = sweep::io::round12(b.M_bar);
        pj["m_bar"] = sweep::io::round12(b.m_bar);
        pj["bracketed"] = b.brackets(sc.at(i).M);
        confirmed = confirmed && b.brackets(sc.at(i).M);
      }
      parts.push_back(pj);
    }
  }
  s["participants"] = parts;
  s["confirmed"] = confirmed;
  const int code = confirmed ? kOk : kVerifyFailed;
  s["exit_code"] = code;
  write_outputs(f, s, nullptr);
  return code;
}

int report_error(const std::string& kind, const std::string& message, int code) {
  json e = {{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}};
  std::cerr << e.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sweeping-process crowd scenarios: simulate, solve and verify"};
  app.set_help_flag("--help", "print this help and exit");
  app.require_subcommand(1);
  Flags f;
  auto* simulate = app.add_subcommand("simulate", "forward integration of supplied (or resting) controls");
  auto* solve = app.add_subcommand("solve", "direct bilevel solve");
  auto* casestudy = app.add_subcommand("casestudy", "closed-form two-disk solution");
  auto* verify = app.add_subcommand("verify", "fit and check optimality multipliers for supplied controls");
  auto* h5check = app.add_subcommand("h5check", "bracket the truncation bound along a contact path");
  add_common(simulate, f, true);
  add_common(solve, f, false);
  add_common(casestudy, f, false);
  add_common(verify, f, true);
  add_common(h5check, f, true);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return report_error("usage", e.what(), kUsage);
  }
  try {
    if (simulate->parsed()) return cmd_simulate(f);
    if (solve->parsed()) return cmd_solve(f);
    if (casestudy->parsed()) return cmd_casestudy(f);
    if (verify->parsed()) return cmd_verify(f);
    return cmd_h5check(f);
  } catch (const CLI::Error& e) {
    return report_error("usage", e.what(), kUsage);
  } catch (const sweep::Error& e) {
    using K = sweep::ErrorKind;
    switch (e.kind()) {
      case K::Infeasible:
      case K::InfeasibleControl:
      case K::InfeasiblePoint:
      case K::TruncationViolation:
      case K::AuditFailed:
        return report_error(sweep::to_string(e.kind()), e.detail(), kInfeasible);
      case K::IndeterminateWitness:
        return report_error(sweep::to_string(e.kind()), e.detail(), kVerifyFailed);
      default:
        return report_error(sweep::to_string(e.kind()), e.detail(), kUsage);
    }
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), kUsage);
  }
}
