#pragma once

// Closed-form solver for the two-disk exit family: two touching disks aligned
// with the exit direction, scaled-linear drift, unit control interval and a
// segment of admissible velocities along the same line.

#include <array>
#include <cmath>

#include "sweep/dynamics.hpp"
#include "sweep/optim.hpp"

namespace sweep {

// Position of the lead representative along the exit axis: constant until t_a,
// linear on [t_a, t_b], then a decaying exponential.
struct GammaDescriptor {
  double hold{0.0};        // γ on [0, t_a]
  double intercept{0.0};   // γ = intercept + slope·t on [t_a, t_b]
  double slope{0.0};
  double amplitude{0.0};   // γ = amplitude·e^{−rate(t−t_b)} + offset on [t_b, T]
  double rate{0.0};
  double offset{0.0};
};

struct CaseStudyParams {
  double t_a{0.0};
  double t_b{0.0};
  double v_bar{0.0};
  GammaDescriptor gamma2;

  double k{0.0};   // drift gain, f = −k·u·x
  double R{0.0};
  double M{0.0};
  double T{0.0};
  double L0{0.0};  // initial distance of the lead center to the exit
  double V{0.0};   // speed bound (segment halflength)
  Vec2 vhat{Vec2::UnitX()};
  int lead{1};     // participant nearer to the exit (0-based)
  int trail{0};

  [[nodiscard]] double gamma(double t) const {
    if (t <= t_a) return gamma2.hold;
    if (t <= t_b) return gamma2.intercept + gamma2.slope * t;
    return gamma2.amplitude * std::exp(-gamma2.rate * (t - t_b)) + gamma2.offset;
  }

  // Coefficient of y_lead(T) along v̂.
  [[nodiscard]] double terminal_offset() const { return gamma(T) - R; }

  [[nodiscard]] double J_H() const {
    const double g = terminal_offset();
    return 0.5 * (g * g + (g + 2.0 * R) * (g + 2.0 * R));
  }

  [[nodiscard]] Vec2 y(int who, double t) const {
    const double a = t <= t_b ? L0 - v_bar * t : gamma(t) - R;
    return (a + (who == trail ? 2.0 * R : 0.0)) * vhat;
  }
  [[nodiscard]] Vec2 x(int who, double t) const { return (gamma(t) + (who == trail ? 2.0 * R : 0.0)) * vhat; }

  void validate() const {
    const bool ok = 0.0 < t_a && t_a < t_b && t_b < T && std::abs(v_bar * t_a - R) <= 1e-9 * R;
    if (!ok) throw Error(ErrorKind::Validation, "case-study parameters violate 0 < t_a < t_b < T or v̄·t_a = R");
  }
};

namespace detail {

struct TwoDiskFamily {
  int lead{1};
  int trail{0};
  Vec2 vhat;
  double k, R, M, T, L0, V;
};

inline TwoDiskFamily match_twodisk_family(const Scenario& sc) {
  auto reject = [](const std::string& why) -> void { throw Error(ErrorKind::UnsupportedFamily, "two-disk family: " + why); };
  if (sc.N() != 2) reject("N must be 2");
  const double tol = 1e-9 * (1.0 + sc.R);
  TwoDiskFamily fam{};
  fam.lead = sc.at(0).y0.norm() <= sc.at(1).y0.norm() ? 0 : 1;
  fam.trail = 1 - fam.lead;
  const auto& L = sc.at(fam.lead);
  const auto& Tr = sc.at(fam.trail);
  fam.L0 = L.y0.norm();
  if (!(fam.L0 > 0.0)) reject("lead disk must start away from the exit");
  fam.vhat = L.y0 / fam.L0;
  if ((Tr.y0 - L.y0 - 2.0 * sc.R * fam.vhat).norm() > tol * (1.0 + fam.L0)) reject("centers must be collinear with the exit and touching");
  for (const auto* p : {&L, &Tr}) {
    if (p->drift.family != DriftSpec::Family::scaled_linear || !(p->drift.c < 0.0)) reject("drift must be scaled_linear with c < 0");
    if (!(p->U == ControlSet::interval(0.0, 1.0))) reject("U must be [0,1]");
    if (p->V.shape() != ControlSet::Shape::segment) reject("V must be a segment");
    if (std::abs(std::abs(p->V.direction().dot(fam.vhat)) - 1.0) > 1e-9) reject("V must be aligned with the exit axis");
    if (!p->x0 || (*p->x0 - p->y0).norm() > tol) reject("x0 must equal y0");
  }
  if (L.drift.c != Tr.drift.c || L.M != Tr.M || L.V.halflength() != Tr.V.halflength()) reject("participants must share drift, cap and V");
  fam.k = -L.drift.c;
  fam.R = sc.R;
  fam.M = L.M;
  fam.T = sc.T;
  fam.V = L.V.halflength();
  return fam;
}

inline CaseStudyParams twodisk_params(const TwoDiskFamily& f, double t_b) {
  CaseStudyParams p;
  p.k = f.k;
  p.R = f.R;
  p.M = f.M;
  p.T = f.T;
  p.L0 = f.L0;
  p.V = f.V;
  p.vhat = f.vhat;
  p.lead = f.lead;
  p.trail = f.trail;
  p.t_b = t_b;
  // Continuity of γ at t_b: L0 + R − v̄ t_b = (v̄ − M)/k.
  p.v_bar = (f.L0 + f.R + f.M / f.k) / (t_b + 1.0 / f.k);
  p.t_a = f.R / p.v_bar;
  p.gamma2 = {f.L0, f.L0 + f.R, -p.v_bar, p.v_bar / f.k, f.k, -f.M / f.k};
  return p;
}

}  // namespace detail

// 1-D search over t_b: golden section to 1e-6, then Newton on g(t_b) = −R.
inline CaseStudyParams solve_twodisk_params(const Scenario& sc) {
  const auto fam = detail::match_twodisk_family(sc);
  auto J = [&](double tb) { return detail::twodisk_params(fam, tb).J_H(); };
  double tb = optim::golden_section(J, 0.0, fam.T, 1e-6);
  auto resid = [&](double t) { return detail::twodisk_params(fam, t).terminal_offset() + fam.R; };
  for (int it = 0; it < 20; ++it) {
    const auto p = detail::twodisk_params(fam, tb);
    const double r = resid(tb);
    const double dv = -p.v_bar / (tb + 1.0 / fam.k);
    const double dr = std::exp(-fam.k * (fam.T - tb)) * (dv + fam.k * p.v_bar) / fam.k;
    if (!(std::abs(dr) > 0.0)) break;
    const double next = tb - r / dr;
    if (!(next > 0.0 && next < fam.T) || std::abs(resid(next)) >= std::abs(r)) break;
    tb = next;
    if (std::abs(resid(tb)) < 1e-14) break;
  }
  auto p = detail::twodisk_params(fam, tb);
  auto reject = [](const std::string& why) { throw Error(ErrorKind::UnsupportedFamily, "two-disk family: " + why); };
  if (!(p.t_a < p.t_b)) reject("contact time must precede the switching time");
  if (!(p.v_bar > p.M)) reject("speed must exceed the truncation cap");
  if (p.v_bar > p.V * (1.0 + 1e-12)) reject("required speed exceeds the admissible velocity segment");
  if (p.gamma(p.T) < 0.0) reject("lead representative would cross the exit");
  return p;
}

struct ClosedFormControls {
  Controls v;
  Controls u;
};

// Controls of both participants at time s, taken as the limit from the left.
inline void closed_form_at(const CaseStudyParams& p, double s, std::array<Vec2, 2>& v, std::array<double, 2>& u) {
  const double g = p.gamma(s);
  if (s <= p.t_a) {
    v = {-p.v_bar * p.vhat, -p.v_bar * p.vhat};
    u = {0.0, 0.0};
    return;
  }
  if (s <= p.t_b) {
    v = {-p.v_bar * p.vhat, -p.v_bar * p.vhat};
    u[static_cast<std::size_t>(p.lead)] = (p.v_bar - p.M) / (p.k * g);
    u[static_cast<std::size_t>(p.trail)] = (p.v_bar - p.M) / (p.k * (g + 2.0 * p.R));
    return;
  }
  const Vec2 vel = -(p.k * g + p.M) * p.vhat;
  v = {vel, vel};
  u[static_cast<std::size_t>(p.lead)] = 1.0;
  u[static_cast<std::size_t>(p.trail)] = g / (g + 2.0 * p.R);
}

// Piecewise-constant controls on the grid, sampled at the right end of each cell.
inline ClosedFormControls closed_form_controls(const CaseStudyParams& p, const Grid& grid) {
  ClosedFormControls out;
  out.v.assign(2, ControlProfile{grid, {}});
  out.u.assign(2, ControlProfile{grid, {}});
  for (int k = 0; k < grid.intervals(); ++k) {
    std::array<Vec2, 2> v;
    std::array<double, 2> u;
    closed_form_at(p, grid.time(k + 1), v, u);
    for (std::size_t i = 0; i < 2; ++i) {
      out.v[i].values.emplace_back(VecX(v[i]));
      out.u[i].values.emplace_back(VecX::Constant(1, std::clamp(u[i], 0.0, 1.0)));
    }
  }
  return out;
}

}  // namespace sweep
