#pragma once

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include "sweep/casestudy.hpp"
#include "sweep/inner.hpp"

namespace sweep {

struct BilevelSolution {
  Controls v;
  Controls u;
  std::vector<Vec2> x0;
  Trajectory y;
  Trajectory x;
  double J_H{0.0};
  std::vector<double> J_L;
  std::vector<double> phi;
  std::string method;
  FeasibilityReport audit;
};

// Simulates (v, u, x0), audits it and fills the costs.
inline BilevelSolution assemble_solution(const Scenario& sc, Controls v, Controls u, std::vector<Vec2> x0, std::string method,
                                         const CatchupOptions& opt = {}) {
  BilevelSolution s;
  auto sim = simulate(sc, v, u, x0, opt);
  s.y = std::move(sim.y);
  s.x = std::move(sim.x);
  s.audit = check_feasibility(sc, s.y, s.x, u, v);
  s.J_H = cost_upper(s.y.terminal_states());
  for (const auto& p : u) s.J_L.push_back(cost_lower(p));
  s.v = std::move(v);
  s.u = std::move(u);
  s.x0 = std::move(x0);
  s.method = std::move(method);
  return s;
}

struct PenalizedValue {
  double value{0.0};
  double J_H{0.0};
  double penalty{0.0};
  std::vector<double> phi;
};

struct Candidate {
  Controls v;
  Controls u;
  std::vector<Vec2> x0;
};

// J_H + Σ ρ_i (J_L(u_i) − φ_i(v_i)); a candidate cheaper than the search lowers φ to its own cost.
inline PenalizedValue penalized_objective(const Scenario& sc, const Candidate& c, const std::vector<double>& rho,
                                          const InnerOptions& inner = {}) {
  if (static_cast<int>(rho.size()) != sc.N()) throw Error(ErrorKind::Dimension, "penalized_objective: one rho per participant");
  for (double r : rho) if (!(r >= 0.0)) throw Error(ErrorKind::Validation, "penalized_objective: rho must be nonnegative");
  const auto sim = simulate(sc, c.v, c.u, c.x0);
  PenalizedValue out;
  out.J_H = cost_upper(sim.y.terminal_states());
  for (int i = 0; i < sc.N(); ++i) {
    const double JL = cost_lower(c.u[static_cast<std::size_t>(i)]);
    const double phi = std::min(JL, value_function(sc, i, c.v[static_cast<std::size_t>(i)], inner).phi);
    out.phi.push_back(phi);
    out.penalty += rho[static_cast<std::size_t>(i)] * (JL - phi);
  }
  out.value = out.J_H + out.penalty;
  return out;
}

struct CaseStudyResult {
  CaseStudyParams params;
  BilevelSolution solution;
};

inline CaseStudyResult solve_twodisk_parametric(const Scenario& sc) {
  CaseStudyResult r;
  r.params = solve_twodisk_params(sc);
  const Grid grid = Grid::uniform(sc.T, sc.steps());
  auto cf = closed_form_controls(r.params, grid);
  r.solution = assemble_solution(sc, std::move(cf.v), std::move(cf.u), sc.default_x0(), "parametric");
  r.solution.phi = r.solution.J_L;
  return r;
}

struct DirectOptions {
  int starts{8};
  int max_evaluations{4000};
  double violation_weight{1e3};
  InnerOptions inner;
};

namespace detail {

inline Controls decode_upper(const Scenario& sc, const VecX& theta, const Grid& coarse, const Grid& fine) {
  Controls v;
  int off = 0;
  for (int i = 0; i < sc.N(); ++i) {
    const auto& V = sc.at(i).V;
    const int cd = V.chart_dim();
    ControlProfile p{coarse, {}};
    for (int k = 0; k < coarse.intervals(); ++k, off += cd) p.values.push_back(V.project(V.from_unit(theta.segment(off, cd))));
    v.push_back(p.resampled(fine));
  }
  return v;
}

}  // namespace detail

// Flattened direct search over K-piece upper controls. The search scores each
// candidate with the greedy inner march; the returned solution re-solves the
// inner problems with the full multi-start value function.
inline BilevelSolution solve_bilevel_direct(const Scenario& sc, int K, const std::vector<double>& rho, unsigned seed,
                                            const DirectOptions& opt = {}) {
  if (K < 2) throw Error(ErrorKind::Validation, "solve_bilevel_direct: K >= 2 required");
  if (static_cast<int>(rho.size()) != sc.N()) throw Error(ErrorKind::Dimension, "solve_bilevel_direct: one rho per participant");
  for (double r : rho) if (!(r >= 0.0)) throw Error(ErrorKind::Validation, "solve_bilevel_direct: rho must be nonnegative");
  const Grid fine = Grid::uniform(sc.T, sc.steps());
  const Grid coarse = Grid::uniform(sc.T, K);
  int dim = 0;
  for (const auto& p : sc.participants) dim += K * p.V.chart_dim();

  struct Scored {
    VecX theta;
    double score;
  };
  std::vector<Scored> archive;

  auto score = [&](const VecX& theta) {
    const Controls v = detail::decode_upper(sc, theta, coarse, fine);
    const Trajectory y = integrate_upper(sc, v);
    double overlap = 0.0;
    for (int k = 0; k < y.nodes(); ++k) {
      for (int i = 0; i < sc.N(); ++i) {
        for (int j = i + 1; j < sc.N(); ++j) overlap = std::max(overlap, 2.0 * sc.R - (y.at(k, i) - y.at(k, j)).norm());
      }
    }
    double excess = 0.0;
    for (int i = 0; i < sc.N(); ++i) {
      const auto& p = sc.at(i);
      std::vector<Vec2> ypath;
      for (int k = 0; k < y.nodes(); ++k) ypath.push_back(y.at(k, i));
      const std::vector<VecX> rest{p.U.project(VecX::Zero(p.U.dim()))};
      excess += detail::march(sc, i, ypath, fine, p.x0 ? *p.x0 : p.y0, rest).excess;
    }
    // Clipped at 1e-12 so roundoff-level contact does not steer the search.
    const double viol = std::max(0.0, overlap - 1e-12 * sc.R) + excess;
    const double s = cost_upper(y.terminal_states()) + opt.violation_weight * viol;
    archive.push_back({theta, viol > 0.0 ? std::numeric_limits<double>::infinity() : s});
    return s;
  };

  std::vector<VecX> starts;
  VecX rest(dim);
  int off = 0;
  for (const auto& p : sc.participants) {
    const VecX z = p.V.to_unit(p.V.project(VecX::Zero(2)));
    for (int k = 0; k < K; ++k, off += p.V.chart_dim()) rest.segment(off, p.V.chart_dim()) = z;
  }
  starts.push_back(rest);
  for (int s = 1; s < opt.starts; ++s) starts.push_back(optim::halton(static_cast<std::uint64_t>(s), dim, seed));

  optim::NelderMeadOptions nm;
  nm.initial_step = 0.25;
  nm.max_evaluations = opt.max_evaluations;
  optim::CompassOptions polish{0.0625, 1e-6, opt.max_evaluations};
  for (const auto& s0 : starts) {
    auto r = optim::nelder_mead(score, s0, nm);
    r = optim::nelder_mead(score, r.x, nm);
    optim::compass_search(score, r.x, polish);
  }

  std::stable_sort(archive.begin(), archive.end(), [](const Scored& a, const Scored& b) { return a.score < b.score; });
  int attempts = 0;
  for (const auto& cand : archive) {
    if (!std::isfinite(cand.score) || ++attempts > 64) break;
    Controls v = detail::decode_upper(sc, cand.theta, coarse, fine);
    Controls u;
    std::vector<Vec2> x0;
    std::vector<double> phi;
    try {
      for (int i = 0; i < sc.N(); ++i) {
        auto inner = value_function(sc, i, v[static_cast<std::size_t>(i)], opt.inner);
        phi.push_back(inner.phi);
        u.push_back(std::move(inner.u));
        x0.push_back(inner.x0);
      }
      auto sol = assemble_solution(sc, std::move(v), std::move(u), std::move(x0), "direct");
      if (!sol.audit.ok()) continue;
      sol.phi = std::move(phi);
      return sol;
    } catch (const Error&) {
      continue;
    }
  }
  throw Error(ErrorKind::Infeasible, "solve_bilevel_direct: no feasible candidate found");
}

}  // namespace sweep
