#pragma once

// Forward simulation of the upper translation ODE and the lower sweeping
// inclusion, feasibility audit, costs and the H5 truncation bracket.

#include <cmath>
#include <limits>
#include <vector>

#include "sweep/scenario.hpp"
#include "sweep/trajectory.hpp"

namespace sweep {

inline constexpr double kControlTol = 1e-9;

namespace detail {

inline void require_controls(const Scenario& sc, const Controls& c, const Grid& g, const char* what) {
  if (static_cast<int>(c.size()) != sc.N()) throw Error(ErrorKind::Dimension, std::string(what) + ": one profile per participant required");
  for (const auto& p : c) {
    if (p.intervals() != g.intervals()) throw Error(ErrorKind::Dimension, std::string(what) + ": control grid does not match the trajectory grid");
  }
}

inline bool on_boundary(double r, double R) { return r >= R * (1.0 - kActiveRel); }

}  // namespace detail

inline Trajectory integrate_upper(const Scenario& sc, const Controls& v) {
  if (static_cast<int>(v.size()) != sc.N()) throw Error(ErrorKind::Dimension, "integrate_upper: one profile per participant required");
  const Grid& g = v.front().grid;
  g.validate();
  detail::require_controls(sc, v, g, "integrate_upper");
  Trajectory y{g, {}, {}};
  VecX s(2 * sc.N());
  for (int i = 0; i < sc.N(); ++i) s.segment<2>(2 * i) = sc.at(i).y0;
  y.states.push_back(s);
  for (int k = 0; k < g.intervals(); ++k) {
    for (int i = 0; i < sc.N(); ++i) {
      const VecX& vk = v[static_cast<std::size_t>(i)][k];
      if (!sc.at(i).V.contains(vk, kControlTol)) {
        throw Error(ErrorKind::InfeasibleControl, "upper control of participant " + std::to_string(i + 1) +
                                                      " outside V at t=" + std::to_string(g.time(k)));
      }
      s.segment<2>(2 * i) += g.step(k) * vk.head<2>();
    }
    y.states.push_back(s);
  }
  return y;
}

struct CatchupOptions {
  bool enforce_cap{true};  // false: report corrections but never throw on ‖ξ‖ > M
};

struct LowerPath {
  std::vector<Vec2> x;
  std::vector<char> contact;
  std::vector<double> correction;  // ‖ξ_k‖ on interval k
};

// Catch-up scheme for one participant: x_{k+1} = P_{D+y_{k+1}}(x_k + h f(x_k,u_k)).
inline LowerPath catchup_participant(const Scenario& sc, int i, const Trajectory& y, const ControlProfile& u,
                                     const Vec2& x0, const CatchupOptions& opt = {}) {
  const auto& p = sc.at(i);
  const Grid& g = y.grid;
  if (u.intervals() != g.intervals()) throw Error(ErrorKind::Dimension, "catch-up: control grid does not match the trajectory grid");
  const Disk start = sc.disk(y.at(0, i));
  if (!start.contains(x0, start.active_tol())) throw Error(ErrorKind::InfeasiblePoint, "catch-up: x0 outside D + y0");
  LowerPath out;
  out.x.reserve(static_cast<std::size_t>(g.intervals()) + 1);
  out.x.push_back(x0);
  out.contact.push_back(detail::on_boundary((x0 - y.at(0, i)).norm(), sc.R));
  const double cap = p.M * (1.0 + 1e-9) + 1e-12;
  Vec2 x = x0;
  for (int k = 0; k < g.intervals(); ++k) {
    const VecX& uk = u[k];
    if (!p.U.contains(uk, kControlTol)) {
      throw Error(ErrorKind::InfeasibleControl, "lower control of participant " + std::to_string(i + 1) +
                                                    " outside U at t=" + std::to_string(g.time(k)));
    }
    const double h = g.step(k);
    const Vec2 free = x + h * p.drift(x, uk);
    const Vec2 yc = y.at(k + 1, i);
    const double r = (free - yc).norm();
    const bool active = r > sc.R;
    const Vec2 next = active ? Vec2(yc + sc.R * (free - yc) / r) : free;
    const double xi = (free - next).norm() / h;
    if (opt.enforce_cap && xi > cap) throw TruncationError(i + 1, g.time(k + 1), xi, p.M);
    out.correction.push_back(xi);
    out.contact.push_back(active || detail::on_boundary((next - yc).norm(), sc.R));
    out.x.push_back(next);
    x = next;
  }
  return out;
}

inline Trajectory integrate_lower_catchup(const Scenario& sc, const Trajectory& y, const Controls& u,
                                          const std::vector<Vec2>& x0, const CatchupOptions& opt = {}) {
  detail::require_controls(sc, u, y.grid, "integrate_lower_catchup");
  if (static_cast<int>(x0.size()) != sc.N()) throw Error(ErrorKind::Dimension, "integrate_lower_catchup: one x0 per participant required");
  Trajectory x{y.grid, std::vector<VecX>(static_cast<std::size_t>(y.nodes()), VecX(2 * sc.N())), {}};
  for (int i = 0; i < sc.N(); ++i) {
    LowerPath path = catchup_participant(sc, i, y, u[static_cast<std::size_t>(i)], x0[static_cast<std::size_t>(i)], opt);
    for (int k = 0; k < y.nodes(); ++k) x.states[static_cast<std::size_t>(k)].segment<2>(2 * i) = path.x[static_cast<std::size_t>(k)];
    x.contact.push_back(std::move(path.contact));
  }
  return x;
}

struct PenaltyOptions {
  double stiffness{1e3};
  double substep{0.0};  // 0: largest stable substep dividing each cell
};

// Lipschitz penalty field g_k(x) = min(k·max(0, ‖d‖ − R(1 − 1/√k)), M)·d/‖d‖, d = x − y.
inline Vec2 penalty_field(const Vec2& d, double R, double k, double cap) {
  const double r = d.norm();
  if (r <= 0.0) return Vec2::Zero();
  const double mag = std::min(k * std::max(0.0, r - R * (1.0 - 1.0 / std::sqrt(k))), cap);
  return mag * d / r;
}

// Explicit Euler on ẋ = f(x,u) − g_k(x − y(t)), with y linear inside each cell.
inline Trajectory integrate_lower_penalty(const Scenario& sc, const Trajectory& y, const Controls& u,
                                          const std::vector<Vec2>& x0, const PenaltyOptions& opt) {
  detail::require_controls(sc, u, y.grid, "integrate_lower_penalty");
  const double k = opt.stiffness;
  if (!(k > 0.0)) throw Error(ErrorKind::Validation, "penalty stiffness must be positive");
  const double max_sub = 1.0 / (2.0 * k);
  if (opt.substep > max_sub * (1.0 + 1e-12)) {
    throw Error(ErrorKind::Stability, "penalty substep " + std::to_string(opt.substep) + " exceeds 1/(2k) = " + std::to_string(max_sub));
  }
  const double target = opt.substep > 0.0 ? opt.substep : max_sub;
  const Grid& g = y.grid;
  Trajectory x{g, std::vector<VecX>(static_cast<std::size_t>(y.nodes()), VecX(2 * sc.N())), {}};
  for (int i = 0; i < sc.N(); ++i) {
    const auto& p = sc.at(i);
    std::vector<char> contact(static_cast<std::size_t>(y.nodes()), 0);
    Vec2 xi = x0[static_cast<std::size_t>(i)];
    x.states[0].segment<2>(2 * i) = xi;
    for (int c = 0; c < g.intervals(); ++c) {
      const double h = g.step(c);
      const int n = std::max(1, static_cast<int>(std::ceil(h / target - 1e-9)));
      const double s = h / n;
      const VecX& uc = u[static_cast<std::size_t>(i)][c];
      const Vec2 ya = y.at(c, i);
      const Vec2 yb = y.at(c + 1, i);
      for (int j = 0; j < n; ++j) {
        const Vec2 yt = ya + (static_cast<double>(j) / n) * (yb - ya);
        xi += s * (p.drift(xi, uc) - penalty_field(xi - yt, sc.R, k, p.M));
      }
      x.states[static_cast<std::size_t>(c) + 1].segment<2>(2 * i) = xi;
      contact[static_cast<std::size_t>(c) + 1] = penalty_field(xi - yb, sc.R, k, p.M).norm() > 0.0;
    }
    x.contact.push_back(std::move(contact));
  }
  return x;
}

struct Violation {
  double value{0.0};
  double time{0.0};
  int participant{-1};  // 1-based, -1 when no violation

  void offer(double v, double t, int who) {
    if (v > value) {
      value = v;
      time = t;
      participant = who;
    }
  }
};

struct FeasibilityReport {
  Violation overlap;
  Violation confinement;
  Violation control_U;
  Violation control_V;

  [[nodiscard]] double worst() const {
    return std::max({overlap.value, confinement.value, control_U.value, control_V.value});
  }
  [[nodiscard]] bool ok(double tol = kReportTol) const { return worst() <= tol; }
};

inline FeasibilityReport check_feasibility(const Scenario& sc, const Trajectory& y, const Trajectory& x,
                                           const Controls& u, const Controls& v) {
  FeasibilityReport rep;
  const Grid& g = y.grid;
  for (int k = 0; k < y.nodes(); ++k) {
    const double t = g.time(k);
    for (int i = 0; i < sc.N(); ++i) {
      for (int j = i + 1; j < sc.N(); ++j) rep.overlap.offer(2.0 * sc.R - (y.at(k, i) - y.at(k, j)).norm(), t, i + 1);
      if (k < x.nodes()) rep.confinement.offer((x.at(k, i) - y.at(k, i)).norm() - sc.R, t, i + 1);
    }
  }
  for (int i = 0; i < sc.N() && i < static_cast<int>(u.size()); ++i) {
    const auto& p = u[static_cast<std::size_t>(i)];
    for (int k = 0; k < p.intervals(); ++k) rep.control_U.offer(sc.at(i).U.distance(p[k]), p.grid.time(k), i + 1);
  }
  for (int i = 0; i < sc.N() && i < static_cast<int>(v.size()); ++i) {
    const auto& p = v[static_cast<std::size_t>(i)];
    for (int k = 0; k < p.intervals(); ++k) rep.control_V.offer(sc.at(i).V.distance(p[k]), p.grid.time(k), i + 1);
  }
  return rep;
}

inline double cost_upper(const std::vector<Vec2>& yT) {
  double acc = 0.0;
  for (const auto& y : yT) acc += 0.5 * y.squaredNorm();
  return acc;
}

inline double cost_lower(const ControlProfile& u) {
  double acc = 0.0;
  for (int k = 0; k < u.intervals(); ++k) acc += u.grid.step(k) * u[k].squaredNorm();
  return acc;
}

struct ContactSample {
  int participant{0};  // 0-based
  Vec2 x{Vec2::Zero()};
  Vec2 y{Vec2::Zero()};
};

struct H5Bound {
  double M_bar{std::numeric_limits<double>::quiet_NaN()};
  double m_bar{std::numeric_limits<double>::quiet_NaN()};
  int samples{0};

  [[nodiscard]] bool brackets(double M) const { return samples > 0 && m_bar < M && M < M_bar; }
};

// Nodes flagged as contact by the lower trajectory.
inline std::vector<ContactSample> contact_samples(const Trajectory& y, const Trajectory& x) {
  std::vector<ContactSample> out;
  for (int i = 0; i < x.N(); ++i) {
    for (int k = 0; k < x.nodes(); ++k) {
      if (x.in_contact(k, i)) out.push_back({i, x.at(k, i), y.at(k, i)});
    }
  }
  return out;
}

// H5 bracket with ζ the unit outward normal of each sample; M̄ takes the min and m̄ the max over samples.
inline std::vector<H5Bound> h5_bounds(const Scenario& sc, const std::vector<ContactSample>& samples) {
  if (samples.empty()) throw Error(ErrorKind::Validation, "h5_bounds: empty contact sample set");
  std::vector<H5Bound> out(static_cast<std::size_t>(sc.N()));
  for (const auto& s : samples) {
    if (s.participant < 0 || s.participant >= sc.N()) throw Error(ErrorKind::Dimension, "h5_bounds: participant index out of range");
    const auto& p = sc.at(s.participant);
    const Vec2 d = s.x - s.y;
    const double r = d.norm();
    if (std::abs(r - sc.R) > kReportTol * (1.0 + sc.R)) throw Error(ErrorKind::InfeasiblePoint, "h5_bounds: sample not on the disk boundary");
    const Vec2 zeta = d / r;
    const double base = zeta.dot(p.drift.f0(s.x));
    const VecX gu = p.drift.dfdu(s.x).transpose() * zeta;
    const double fmax = base + p.U.support(gu);
    const double fmin = base + p.U.min_linear(gu);
    const VecX z = zeta;
    const double Mb = fmax - p.V.min_linear(z);
    const double mb = fmin - p.V.support(z);
    auto& b = out[static_cast<std::size_t>(s.participant)];
    if (b.samples == 0) {
      b.M_bar = Mb;
      b.m_bar = mb;
    } else {
      b.M_bar = std::min(b.M_bar, Mb);
      b.m_bar = std::max(b.m_bar, mb);
    }
    ++b.samples;
  }
  return out;
}

struct Simulation {
  Trajectory y;
  Trajectory x;
};

inline Simulation simulate(const Scenario& sc, const Controls& v, const Controls& u, const std::vector<Vec2>& x0,
                           const CatchupOptions& opt = {}) {
  Simulation s;
  s.y = integrate_upper(sc, v);
  s.x = integrate_lower_catchup(sc, s.y, u, x0, opt);
  return s;
}

}  // namespace sweep
