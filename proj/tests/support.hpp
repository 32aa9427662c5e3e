#pragma once

#include <string>

#include "sweep/sweep.hpp"

namespace sweep::testing {

inline std::string scenario_path(const std::string& name) { return std::string(SWEEP_SCENARIO_DIR) + "/" + name; }

// The bundled two-disk scenario, optionally with a different fine step count.
inline Scenario twodisk(int steps = kDefaultSteps, double rho = 1.0) {
  Scenario sc = io::parse_scenario(scenario_path("twodisk.scn"));
  sc.solver.h = sc.T / steps;
  for (auto& p : sc.participants) p.rho = rho;
  sc.validate();
  return sc;
}

inline Vec2 exit_direction() { return Vec2(-std::sqrt(0.5), std::sqrt(0.5)); }

inline Participant free_walker(const Vec2& y0, double speed = 20.0) {
  Participant p;
  p.y0 = y0;
  p.x0 = y0;
  p.drift = DriftSpec::affine(Mat2::Zero(), MatX::Identity(2, 2), Vec2::Zero());
  p.U = ControlSet::ball(10.0);
  p.V = ControlSet::ball(speed);
  p.M = 2.0;
  p.rho = 1.0;
  return p;
}

inline Scenario single(const Participant& p, double R = 3.0, double T = 2.0, int steps = 400) {
  Scenario sc;
  sc.name = "single";
  sc.R = R;
  sc.T = T;
  sc.participants = {p};
  sc.solver.h = T / steps;
  sc.validate();
  return sc;
}

inline Controls constant_controls(const Scenario& sc, const std::vector<VecX>& values) {
  const Grid g = Grid::uniform(sc.T, sc.steps());
  Controls c;
  for (const auto& v : values) c.push_back(ControlProfile::constant(g, v));
  return c;
}

inline VecX vec(std::initializer_list<double> xs) {
  VecX v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

}  // namespace sweep::testing
