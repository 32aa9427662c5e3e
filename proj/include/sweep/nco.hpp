#pragma once

// Grid residuals for the optimality system of the bilevel problem: adjoint
// inclusions, boundary conditions, both maximum conditions, monotonicity of the
// measure multipliers and relation (A^i) for the lower levels.
//
// Interval k is evaluated with the drift at (x_k, u_k), the controls u_k, v_k,
// the costates at node k+1, the BV multipliers of interval k and the geometry
// (offsets, normals, activity) at node k+1.

#include <limits>
#include <string>
#include <vector>

#include "sweep/bilevel.hpp"
#include "sweep/multipliers.hpp"

namespace sweep {

inline constexpr double kRepActive = 1e-6;  // activity tolerance for constancy checks
inline constexpr double kNontrivTol = 1e-6;
inline constexpr double kKinkRel = 1e-8;

namespace nco_detail {

inline bool lower_active(double R, const Vec2& d) { return R - d.norm() <= kRepActive; }
inline bool pair_active(double R, const Vec2& yi, const Vec2& yj) { return (yi - yj).norm() - 2.0 * R <= kRepActive; }

inline std::vector<Vec2> centers(const Trajectory& y, int k) {
  std::vector<Vec2> out;
  for (int i = 0; i < y.N(); ++i) out.push_back(y.at(k, i));
  return out;
}

// Selection set {θ·grad : θ ∈ [lo, hi]} of ∂_x σ on one interval (∂_y σ is its negative).
struct SigmaSet {
  Vec2 grad{Vec2::Zero()};
  double lo{0.0};
  double hi{0.0};

  [[nodiscard]] Vec2 at(double th) const { return th * grad; }
  [[nodiscard]] double nearest(const Vec2& s) const {
    const double gg = grad.squaredNorm();
    if (gg <= 0.0) return lo;
    return std::clamp(s.dot(grad) / gg, lo, hi);
  }
};

inline SigmaSet sigma_set(const Vec2& d, const Vec2& q, double nu, double R, double M, bool active) {
  const Segment2 seg = sigma_subgradient_x(d, q, nu, R, M, active, kKinkRel);
  if (seg.lo == seg.hi) {
    if (seg.lo.isZero(0.0)) return {};
    return {seg.lo, 1.0, 1.0};
  }
  return {seg.hi, 0.0, 1.0};
}

struct Cell {
  double h{0.0};
  Vec2 x0, x1, y1, d0, d1, v;
  VecX u;
  Vec2 f, f0;
  Mat2 fx;
  MatX fu;
  bool active1{false};
};

inline Cell make_cell(const Scenario& sc, const BilevelSolution& s, int i, int k, const VecX& u) {
  const auto& drift = sc.at(i).drift;
  Cell c;
  c.h = s.y.grid.step(k);
  c.x0 = s.x.at(k, i);
  c.x1 = s.x.at(k + 1, i);
  c.y1 = s.y.at(k + 1, i);
  c.d0 = c.x0 - s.y.at(k, i);
  c.d1 = c.x1 - c.y1;
  c.v = s.v[static_cast<std::size_t>(i)][k].head<2>();
  c.u = u;
  c.f = drift(c.x0, u);
  c.f0 = drift.f0(c.x0);
  c.fx = drift.dfdx(c.x0, u);
  c.fu = drift.dfdu(c.x0);
  c.active1 = lower_active(sc.R, c.d1);
  return c;
}

// Right-hand sides of the two adjoint inclusions without the σ selection:
// −q̇_L ∈ cL + S and −q̇_H ∈ cH − S.
struct Pieces {
  Vec2 cL;
  Vec2 cH;
  SigmaSet S;
};

inline Pieces pieces(const Scenario& sc, int i, const Cell& c, const Vec2& q_next, double nu, const Vec2& pair_term) {
  const Vec2 P = q_next - nu * c.d1;
  return {c.fx.transpose() * P - nu * c.f + nu * c.v, nu * c.f - nu * c.v + pair_term,
          sigma_set(c.d1, q_next, nu, sc.R, sc.at(i).M, c.active1)};
}

struct JointResidual {
  double rL{0.0};
  double rH{0.0};
};

// Distance of (aL, aH) to {(cL + s, cH − s) : s ∈ S} with one shared selection s.
inline JointResidual joint_residual(const Pieces& p, const Vec2& aL, const Vec2& aH) {
  const Vec2 eL = aL - p.cL;
  const Vec2 eH = aH - p.cH;
  const Vec2 s = p.S.at(p.S.nearest(0.5 * (eL - eH)));
  return {(eL - s).norm(), (eH + s).norm()};
}

// One backward step; at a kink the selection keeps q_L − ν d unchanged across the cell when possible.
inline void backward_step(const Pieces& p, const Cell& c, double nu, const Vec2& qL_next, const Vec2& qH_next, Vec2& qL,
                          Vec2& qH) {
  double th = p.S.lo;
  if (p.S.hi > p.S.lo) th = p.S.nearest(nu * (c.d0 - c.d1) / c.h - p.cL);
  const Vec2 s = p.S.at(th);
  qL = qL_next + c.h * (p.cL + s);
  qH = qH_next + c.h * (p.cH - s);
}

inline Vec2 pair_jacobian_term(const std::vector<Vec2>& ys, int i, const Vec2& v, const std::function<double(int)>& weight) {
  Vec2 acc = Vec2::Zero();
  for (int j = 0; j < static_cast<int>(ys.size()); ++j) {
    if (j == i) continue;
    const double w = weight(j);
    if (w != 0.0) acc += w * contact_jacobian(ys[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]) * v;
  }
  return acc;
}

// Distance of r to the normal cone of D + y at x (ray when active, {0} otherwise).
inline double distance_to_disk_normal_cone(double R, const Vec2& d, const Vec2& r) {
  if (!lower_active(R, d)) return r.norm();
  const Vec2 n = d / d.norm();
  const double s = std::max(0.0, r.dot(n));
  return (r - s * n).norm();
}

// BV path check: nonnegativity, non-increase, and no jump at inactive nodes.
inline double bv_violation(const std::vector<double>& path, const std::function<bool(int)>& active_node) {
  double r = 0.0;
  for (double v : path) r = std::max(r, -v);
  for (std::size_t k = 1; k < path.size(); ++k) {
    const double jump = path[k] - path[k - 1];
    r = std::max(r, jump);
    if (!active_node(static_cast<int>(k))) r = std::max(r, std::abs(jump));
  }
  return r;
}

inline double total_variation(const std::vector<double>& path) {
  double tv = 0.0;
  for (std::size_t k = 1; k < path.size(); ++k) tv += std::abs(path[k] - path[k - 1]);
  return tv;
}

inline void require_grid(const BilevelSolution& s, int nodes, const char* what) {
  if (nodes != s.y.nodes() || s.x.nodes() != s.y.nodes()) {
    throw Error(ErrorKind::Dimension, std::string(what) + ": multiplier grid does not match the trajectory grid");
  }
}

}  // namespace nco_detail

struct AdjointResidual {
  double qL{0.0};
  double qH{0.0};
};

inline AdjointResidual adjoint_residual(const Scenario& sc, const BilevelSolution& s, const UpperMultipliers& m) {
  using namespace nco_detail;
  require_grid(s, static_cast<int>(m.q_L.size()), "adjoint_residual");
  AdjointResidual out;
  const int K = s.y.grid.intervals();
  for (int k = 0; k < K; ++k) {
    const auto ys1 = centers(s.y, k + 1);
    for (int i = 0; i < sc.N(); ++i) {
      const Cell c = make_cell(sc, s, i, k, s.u[static_cast<std::size_t>(i)][k]);
      const Vec2 pair = pair_jacobian_term(ys1, i, c.v, [&](int j) { return m.nu_H(i, j, k); });
      const Pieces p = pieces(sc, i, c, m.qL(k + 1, i), m.nuL(i, k), pair);
      const auto r = joint_residual(p, (m.qL(k, i) - m.qL(k + 1, i)) / c.h, (m.qH(k, i) - m.qH(k + 1, i)) / c.h);
      out.qL = std::max(out.qL, r.rL);
      out.qH = std::max(out.qH, r.rH);
    }
  }
  return out;
}

struct BoundaryResidual {
  double terminal_H{0.0};
  double terminal_L{0.0};
  double initial_L{0.0};

  [[nodiscard]] double worst() const { return std::max({terminal_H, terminal_L, initial_L}); }
};

inline BoundaryResidual boundary_residual(const Scenario& sc, const BilevelSolution& s, const UpperMultipliers& m) {
  using namespace nco_detail;
  require_grid(s, static_cast<int>(m.q_L.size()), "boundary_residual");
  const int K = s.y.grid.intervals();
  const auto yK = centers(s.y, K);
  BoundaryResidual out;
  double h2 = 0.0;
  double l2 = 0.0;
  for (int i = 0; i < sc.N(); ++i) {
    const Vec2 dK = s.x.at(K, i) - yK[static_cast<std::size_t>(i)];
    const double nu = m.nuL(i, K);
    const Vec2 pair = pairwise_unit_sum(yK, i, [&](int j) { return m.nu_H(i, j, K); });
    h2 += (m.qH(K, i) + m.lambda * yK[static_cast<std::size_t>(i)] + nu * dK + pair).squaredNorm();
    l2 += (m.qL(K, i) - nu * dK).squaredNorm();
    const Vec2 d0 = s.x.at(0, i) - s.y.at(0, i);
    out.initial_L = std::max(out.initial_L, distance_to_disk_normal_cone(sc.R, d0, m.qL(0, i) - m.nuL(i, 0) * d0));
  }
  out.terminal_H = std::sqrt(h2);
  out.terminal_L = std::sqrt(l2);
  return out;
}

struct GapResult {
  double value{0.0};
  double time{0.0};
  int participant{-1};  // 1-based; -1 when every gap is zero

  void offer(double v, double t, int who) {
    if (v > value) {
      value = v;
      time = t;
      participant = who;
    }
  }
};

// sup_u {−α‖u‖² + ⟨q_L − ν⋄(x − y), f(x,u)⟩} minus its value at u*, maximized over the grid.
inline GapResult max_condition_lower(const Scenario& sc, const BilevelSolution& s, const UpperMultipliers& m) {
  using namespace nco_detail;
  require_grid(s, static_cast<int>(m.q_L.size()), "max_condition_lower");
  GapResult out;
  const int K = s.y.grid.intervals();
  for (int k = 0; k < K; ++k) {
    for (int i = 0; i < sc.N(); ++i) {
      const auto& p = sc.at(i);
      const VecX& uk = s.u[static_cast<std::size_t>(i)][k];
      const Cell c = make_cell(sc, s, i, k, uk);
      const Vec2 P = m.qL(k + 1, i) - m.nuL(i, k) * c.d1;
      const VecX g = c.fu.transpose() * P;
      const double a = m.alpha[i];
      const VecX best = p.U.argmax_concave(g, a);
      const double gap = (g.dot(best) - a * best.squaredNorm()) - (g.dot(uk) - a * uk.squaredNorm());
      out.offer(std::max(0.0, gap), s.y.grid.time(k), i + 1);
    }
  }
  return out;
}

// Distance of q_H + ν_L⋄(x − y) + pairwise terms to α ∂φ − N_V(v*), using ζ[i][k] as the ∂φ element.
inline GapResult max_condition_upper(const Scenario& sc, const BilevelSolution& s, const UpperMultipliers& m,
                                     const std::vector<std::vector<Vec2>>& zeta) {
  using namespace nco_detail;
  require_grid(s, static_cast<int>(m.q_L.size()), "max_condition_upper");
  GapResult out;
  const int K = s.y.grid.intervals();
  for (int i = 0; i < sc.N(); ++i) {
    const double a = m.alpha[i];
    const bool have = static_cast<int>(zeta.size()) > i && static_cast<int>(zeta[static_cast<std::size_t>(i)].size()) == K;
    if (a != 0.0 && !have) {
      throw Error(ErrorKind::IndeterminateWitness, "max_condition_upper: participant " + std::to_string(i + 1) +
                                                       " needs a value-function subgradient (alpha > 0)");
    }
  }
  for (int k = 0; k < K; ++k) {
    const auto ys1 = centers(s.y, k + 1);
    for (int i = 0; i < sc.N(); ++i) {
      const Vec2 d1 = s.x.at(k + 1, i) - ys1[static_cast<std::size_t>(i)];
      Vec2 w = m.qH(k + 1, i) + m.nuL(i, k) * d1 + pairwise_unit_sum(ys1, i, [&](int j) { return m.nu_H(i, j, k); });
      const double a = m.alpha[i];
      if (a != 0.0) w -= a * zeta[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
      const VecX& vk = s.v[static_cast<std::size_t>(i)][k];
      out.offer(sc.at(i).V.distance_to_neg_normal_cone(vk, VecX(w)), s.y.grid.time(k), i + 1);
    }
  }
  return out;
}

inline double monotonicity_residual(const Scenario& sc, const BilevelSolution& s, const UpperMultipliers& m) {
  using namespace nco_detail;
  double r = 0.0;
  for (int i = 0; i < sc.N(); ++i) {
    r = std::max(r, bv_violation(m.nu_L[static_cast<std::size_t>(i)],
                                 [&](int k) { return lower_active(sc.R, s.x.at(k, i) - s.y.at(k, i)); }));
    for (int j = i + 1; j < sc.N(); ++j) {
      r = std::max(r, bv_violation(m.nu_H.path(i, j), [&](int k) { return pair_active(sc.R, s.y.at(k, i), s.y.at(k, j)); }));
    }
  }
  return r;
}

// ‖(q_H,q_L)‖_{L∞} + ‖(ν_H,ν_L)‖_{TV} + λ + |α|.
inline double nontriviality(const UpperMultipliers& m) {
  double sup = 0.0;
  for (std::size_t k = 0; k < m.q_H.size(); ++k) sup = std::max(sup, std::sqrt(m.q_H[k].squaredNorm() + m.q_L[k].squaredNorm()));
  double tv = 0.0;
  for (const auto& p : m.nu_L) tv += nco_detail::total_variation(p);
  for (int i = 0; i < m.N(); ++i) {
    for (int j = i + 1; j < m.N(); ++j) tv += nco_detail::total_variation(m.nu_H.path(i, j));
  }
  return sup + tv + m.lambda + m.alpha.norm();
}

inline double q_L_sup(const UpperMultipliers& m) {
  double sup = 0.0;
  for (const auto& q : m.q_L) sup = std::max(sup, q.norm());
  return sup;
}

// ---- relation (A^i) ----

struct LowerReport {
  std::string family;
  double nontriviality{0.0};
  double monotonicity{0.0};
  double adjoint{0.0};
  double primal{0.0};
  double upper_inclusion{0.0};
  double boundary{0.0};

  [[nodiscard]] bool nontrivial() const { return nontriviality >= kNontrivTol; }
  [[nodiscard]] double worst() const { return std::max({monotonicity, adjoint, primal, upper_inclusion, boundary}); }
};

namespace nco_detail {

// Maximizers of ⟨g, u⟩ − λ̄‖u‖² over U, as a projector onto that set.
struct MaximizerSet {
  bool single{true};
  VecX point;
  std::function<VecX(const VecX&)> project;
};

inline MaximizerSet maximizers(const ControlSet& U, const VecX& g, double lambda_bar, double thr) {
  MaximizerSet out;
  if (lambda_bar > 0.0) {
    out.point = U.argmax_concave(g, lambda_bar);
  } else if (g.norm() <= thr) {
    out.single = false;
    out.project = [&U](const VecX& u) { return U.project(u); };
  } else if (U.shape() == ControlSet::Shape::interval) {
    VecX lo = U.lo();
    VecX hi = U.hi();
    bool free = false;
    for (Eigen::Index c = 0; c < g.size(); ++c) {
      if (std::abs(g[c]) <= thr) { free = true; continue; }
      lo[c] = hi[c] = g[c] > 0.0 ? U.hi()[c] : U.lo()[c];
    }
    if (free) {
      out.single = false;
      out.project = [lo, hi](const VecX& u) { return VecX(u.cwiseMax(lo).cwiseMin(hi)); };
    } else {
      out.point = lo;
    }
  } else {
    out.point = U.argmax_linear(g);
  }
  return out;
}

// Distance of a to {f0 + G u − s n : u ∈ Û, s ∈ [slo, shi]}.
inline double primal_distance(const Vec2& a, const Vec2& f0, const MatX& G, const Vec2& n, double slo, double shi,
                              const MaximizerSet& Uh, const VecX& ustar) {
  const Vec2 r0 = a - f0;
  if (Uh.single) {
    const Vec2 r = r0 - G * Uh.point;
    const double s = std::clamp(-r.dot(n), slo, shi);
    return (r + s * n).norm();
  }
  VecX u = Uh.project(ustar);
  double s = std::clamp(-(r0 - G * u).dot(n), slo, shi);
  const double eta = 1.0 / (G.squaredNorm() + 1.0);
  for (int it = 0; it < 2000; ++it) {
    const Vec2 res = r0 - G * u + s * n;
    const VecX un = Uh.project(u + eta * G.transpose() * res);
    const double sn = std::clamp(s - eta * res.dot(n), slo, shi);
    const double change = (un - u).norm() + std::abs(sn - s);
    u = un;
    s = sn;
    if (change <= 1e-15) break;
  }
  return (r0 - G * u + s * n).norm();
}

inline double maximizer_threshold(const MatX& G, const Vec2& Q) { return 1e-8 * (1.0 + G.norm() * (1.0 + Q.norm())); }

}  // namespace nco_detail

inline LowerReport verify_lower(const Scenario& sc, const BilevelSolution& s, int i, const LowerWitness& w) {
  using namespace nco_detail;
  require_grid(s, static_cast<int>(w.p_L.size()), "verify_lower");
  const auto& P = sc.at(i);
  const int K = s.y.grid.intervals();
  LowerReport rep;
  rep.family = w.family;
  auto muH = [&](int j, int k) { return j == i || w.mu_H.empty() ? 0.0 : w.mu_H[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)]; };

  // a) nontriviality
  double sup = 0.0;
  for (int k = 0; k <= K; ++k) {
    sup = std::max(sup, std::sqrt(w.p_H[static_cast<std::size_t>(k)].squaredNorm() + w.p_L[static_cast<std::size_t>(k)].squaredNorm()));
  }
  double tv = total_variation(w.mu_L);
  for (int j = 0; j < sc.N(); ++j) if (j != i && !w.mu_H.empty()) tv += total_variation(w.mu_H[static_cast<std::size_t>(j)]);
  rep.nontriviality = sup + tv + w.lambda_bar;

  // b) monotonicity and constancy
  rep.monotonicity = bv_violation(w.mu_L, [&](int k) { return lower_active(sc.R, s.x.at(k, i) - s.y.at(k, i)); });
  for (int j = 0; j < sc.N(); ++j) {
    if (j == i || w.mu_H.empty()) continue;
    rep.monotonicity = std::max(rep.monotonicity, bv_violation(w.mu_H[static_cast<std::size_t>(j)], [&](int k) {
                                  return pair_active(sc.R, s.y.at(k, i), s.y.at(k, j));
                                }));
  }

  // c) adjoint and primal inclusions, d) upper-control inclusion
  for (int k = 0; k < K; ++k) {
    const auto ys1 = centers(s.y, k + 1);
    const VecX& ustar = s.u[static_cast<std::size_t>(i)][k];
    const double mu = w.mu_L[static_cast<std::size_t>(k)];
    const Vec2 pLn = w.p_L[static_cast<std::size_t>(k) + 1];
    const Vec2 pHn = w.p_H[static_cast<std::size_t>(k) + 1];
    Cell c = make_cell(sc, s, i, k, ustar);
    const Vec2 Q = pLn - mu * c.d1;
    const MaximizerSet Uh = maximizers(P.U, c.fu.transpose() * Q, w.lambda_bar, maximizer_threshold(c.fu, Q));
    const VecX uhat = Uh.single ? Uh.point : Uh.project(ustar);
    const Cell ch = make_cell(sc, s, i, k, uhat);
    const Vec2 pair = pair_jacobian_term(ys1, i, ch.v, [&](int j) { return muH(j, k); });
    const Pieces pc = pieces(sc, i, ch, pLn, mu, pair);
    const auto r = joint_residual(pc, (w.p_L[static_cast<std::size_t>(k)] - pLn) / c.h, (w.p_H[static_cast<std::size_t>(k)] - pHn) / c.h);
    rep.adjoint = std::max({rep.adjoint, r.rL, r.rH});

    const Vec2 n = c.d1.norm() > 0.0 ? Vec2(c.d1 / c.d1.norm()) : Vec2::UnitX();
    const double slo = c.active1 ? P.M * pc.S.lo : 0.0;
    const double shi = c.active1 ? P.M * pc.S.hi : 0.0;
    rep.primal = std::max(rep.primal, primal_distance((c.x1 - c.x0) / c.h, c.f0, c.fu, n, slo, shi, Uh, ustar));

    Vec2 lhs = pHn + mu * c.d1 + pairwise_unit_sum(ys1, i, [&](int j) { return muH(j, k); });
    if (w.lambda_bar > 0.0 && static_cast<int>(w.zeta.size()) == K) lhs += w.lambda_bar * w.zeta[static_cast<std::size_t>(k)];
    rep.upper_inclusion = std::max(rep.upper_inclusion, P.V.distance_to_neg_normal_cone(s.v[static_cast<std::size_t>(i)][k], VecX(lhs)));
  }

  // e) boundary conditions
  const auto yK = centers(s.y, K);
  const Vec2 dK = s.x.at(K, i) - yK[static_cast<std::size_t>(i)];
  const double muK = w.mu_L[static_cast<std::size_t>(K)];
  const Vec2 pairK = pairwise_unit_sum(yK, i, [&](int j) { return muH(j, K); });
  const Vec2 d0 = s.x.at(0, i) - s.y.at(0, i);
  rep.boundary = std::max({(w.p_L[static_cast<std::size_t>(K)] - muK * dK).norm(),
                           (w.p_H[static_cast<std::size_t>(K)] + muK * dK + pairK).norm(),
                           distance_to_disk_normal_cone(sc.R, d0, w.p_L[0] - w.mu_L[0] * d0)});
  return rep;
}

// ---- report ----

struct NCOReport {
  double tol{0.0};
  double nontriviality{0.0};
  double q_L_sup{0.0};
  double adjoint_qL{0.0};
  double adjoint_qH{0.0};
  BoundaryResidual boundary;
  GapResult max_lower;
  GapResult max_upper;
  double monotonicity{0.0};
  std::vector<LowerReport> A;
  std::string family;
  std::vector<std::string> notes;

  struct Item {
    std::string name;
    double residual;
    bool pass;
  };

  [[nodiscard]] bool nontrivial() const { return nontriviality >= kNontrivTol; }

  [[nodiscard]] std::vector<Item> items() const {
    std::vector<Item> out;
    out.push_back({"nontriviality", nontriviality, nontrivial()});
    auto add = [&](const std::string& n, double r) { out.push_back({n, r, r <= tol}); };
    add("adjoint_qL", adjoint_qL);
    add("adjoint_qH", adjoint_qH);
    add("boundary", boundary.worst());
    add("max_lower", max_lower.value);
    add("max_upper", max_upper.value);
    add("monotonicity", monotonicity);
    for (std::size_t i = 0; i < A.size(); ++i) {
      const std::string tag = "A_" + std::to_string(i + 1);
      out.push_back({tag + ".nontriviality", A[i].nontriviality, A[i].nontrivial()});
      add(tag + ".monotonicity", A[i].monotonicity);
      add(tag + ".adjoint", A[i].adjoint);
      add(tag + ".primal", A[i].primal);
      add(tag + ".upper_inclusion", A[i].upper_inclusion);
      add(tag + ".boundary", A[i].boundary);
    }
    return out;
  }

  [[nodiscard]] bool all_pass() const {
    for (const auto& it : items()) if (!it.pass) return false;
    return true;
  }

  // Largest residual/tol over the Theorem 1 conditions (infinite if nontriviality fails).
  [[nodiscard]] double upper_ratio() const {
    if (!nontrivial()) return std::numeric_limits<double>::infinity();
    return std::max({adjoint_qL, adjoint_qH, boundary.worst(), max_lower.value, max_upper.value, monotonicity}) / tol;
  }
};

inline std::vector<std::vector<Vec2>> zeta_from_witnesses(const LowerMultipliers& lower) {
  std::vector<std::vector<Vec2>> z;
  for (const auto& w : lower) z.push_back(w.lambda_bar > 0.0 ? w.zeta : std::vector<Vec2>{});
  return z;
}

inline NCOReport verify(const Scenario& sc, const BilevelSolution& s, const UpperMultipliers& m, const LowerMultipliers& lower,
                        double tol_base, const std::vector<std::vector<Vec2>>& zeta_override = {}) {
  NCOReport rep;
  rep.tol = tol_base * (1.0 + m.q_norm_inf());
  rep.nontriviality = nontriviality(m);
  rep.q_L_sup = q_L_sup(m);
  const auto adj = adjoint_residual(sc, s, m);
  rep.adjoint_qL = adj.qL;
  rep.adjoint_qH = adj.qH;
  rep.boundary = boundary_residual(sc, s, m);
  rep.max_lower = max_condition_lower(sc, s, m);
  auto zeta = zeta_override.empty() ? zeta_from_witnesses(lower) : zeta_override;
  try {
    rep.max_upper = max_condition_upper(sc, s, m, zeta);
  } catch (const Error& e) {
    rep.max_upper.value = std::numeric_limits<double>::infinity();
    rep.notes.emplace_back(e.what());
  }
  rep.monotonicity = monotonicity_residual(sc, s, m);
  for (int i = 0; i < static_cast<int>(lower.size()); ++i) rep.A.push_back(verify_lower(sc, s, i, lower[static_cast<std::size_t>(i)]));
  rep.notes.emplace_back("value-function subgradients use the stored inner minimizers as the optimal set");
  return rep;
}

// ---- witness construction ----

// Upper multipliers from constant ν levels by backward integration of the adjoint selections.
inline UpperMultipliers build_upper(const Scenario& sc, const BilevelSolution& s, double lambda, const std::vector<double>& nuL_level,
                                    double nuH_level) {
  using namespace nco_detail;
  const int N = sc.N();
  const int K = s.y.grid.intervals();
  UpperMultipliers m = UpperMultipliers::zeros(N, K);
  m.lambda = lambda;
  for (int i = 0; i < N; ++i) {
    m.alpha[i] = lambda * sc.at(i).rho;
    std::fill(m.nu_L[static_cast<std::size_t>(i)].begin(), m.nu_L[static_cast<std::size_t>(i)].end(), nuL_level[static_cast<std::size_t>(i)]);
    for (int j = i + 1; j < N; ++j) m.nu_H.fill(i, j, nuH_level);
  }
  const auto yK = centers(s.y, K);
  for (int i = 0; i < N; ++i) {
    const Vec2 dK = s.x.at(K, i) - yK[static_cast<std::size_t>(i)];
    const double nu = m.nuL(i, K);
    const Vec2 pair = pairwise_unit_sum(yK, i, [&](int j) { return m.nu_H(i, j, K); });
    m.q_H[static_cast<std::size_t>(K)].segment<2>(2 * i) = -lambda * yK[static_cast<std::size_t>(i)] - nu * dK - pair;
    m.q_L[static_cast<std::size_t>(K)].segment<2>(2 * i) = nu * dK;
  }
  for (int k = K - 1; k >= 0; --k) {
    const auto ys1 = centers(s.y, k + 1);
    for (int i = 0; i < N; ++i) {
      const Cell c = make_cell(sc, s, i, k, s.u[static_cast<std::size_t>(i)][k]);
      const Vec2 pair = pair_jacobian_term(ys1, i, c.v, [&](int j) { return m.nu_H(i, j, k); });
      const double nu = m.nuL(i, k);
      const Pieces p = pieces(sc, i, c, m.qL(k + 1, i), nu, pair);
      Vec2 qL, qH;
      backward_step(p, c, nu, m.qL(k + 1, i), m.qH(k + 1, i), qL, qH);
      m.q_L[static_cast<std::size_t>(k)].segment<2>(2 * i) = qL;
      m.q_H[static_cast<std::size_t>(k)].segment<2>(2 * i) = qH;
    }
  }
  return m;
}

// Abnormal witness: λ̄ = 0, μ_L ≡ 1, μ_H ≡ 0.
inline LowerWitness build_lower_abnormal(const Scenario& sc, const BilevelSolution& s, int i) {
  using namespace nco_detail;
  const int K = s.y.grid.intervals();
  LowerWitness w;
  w.family = "abnormal";
  w.lambda_bar = 0.0;
  w.mu_L.assign(static_cast<std::size_t>(K) + 1, 1.0);
  w.mu_H.assign(static_cast<std::size_t>(sc.N()), std::vector<double>(static_cast<std::size_t>(K) + 1, 0.0));
  w.p_L.assign(static_cast<std::size_t>(K) + 1, Vec2::Zero());
  w.p_H = w.p_L;
  const Vec2 dK = s.x.at(K, i) - s.y.at(K, i);
  w.p_L[static_cast<std::size_t>(K)] = dK;
  w.p_H[static_cast<std::size_t>(K)] = -dK;
  for (int k = K - 1; k >= 0; --k) {
    const VecX& ustar = s.u[static_cast<std::size_t>(i)][k];
    Cell c = make_cell(sc, s, i, k, ustar);
    const Vec2 pLn = w.p_L[static_cast<std::size_t>(k) + 1];
    const Vec2 Q = pLn - c.d1;
    const MaximizerSet Uh = maximizers(sc.at(i).U, c.fu.transpose() * Q, 0.0, maximizer_threshold(c.fu, Q));
    if (Uh.single) c = make_cell(sc, s, i, k, Uh.point);
    const Pieces p = pieces(sc, i, c, pLn, 1.0, Vec2::Zero());
    backward_step(p, c, 1.0, pLn, w.p_H[static_cast<std::size_t>(k) + 1], w.p_L[static_cast<std::size_t>(k)], w.p_H[static_cast<std::size_t>(k)]);
  }
  return w;
}

// Normal witness: λ̄ = 1, μ_H ≡ 0, μ_L fitted to the stationarity of the u-supremum, then ζ from condition d).
inline LowerWitness build_lower_normal(const Scenario& sc, const BilevelSolution& s, int i) {
  using namespace nco_detail;
  const int K = s.y.grid.intervals();
  const double lb = 1.0;
  LowerWitness w;
  w.family = "normal";
  w.lambda_bar = lb;
  w.mu_L.assign(static_cast<std::size_t>(K) + 1, 0.0);
  w.mu_H.assign(static_cast<std::size_t>(sc.N()), std::vector<double>(static_cast<std::size_t>(K) + 1, 0.0));
  w.p_L.assign(static_cast<std::size_t>(K) + 1, Vec2::Zero());
  w.p_H = w.p_L;
  w.zeta.assign(static_cast<std::size_t>(K), Vec2::Zero());
  for (int k = K - 1; k >= 0; --k) {
    const VecX& ustar = s.u[static_cast<std::size_t>(i)][k];
    const Cell c0 = make_cell(sc, s, i, k, ustar);
    const Vec2 pLn = w.p_L[static_cast<std::size_t>(k) + 1];
    const Vec2 pHn = w.p_H[static_cast<std::size_t>(k) + 1];
    const double mu_next = w.mu_L[static_cast<std::size_t>(k) + 1];
    double mu = mu_next;
    if (c0.active1) {
      const VecX a = c0.fu.transpose() * c0.d1;
      const VecX b = c0.fu.transpose() * pLn - 2.0 * lb * ustar;
      if (a.squaredNorm() > 0.0) mu = std::max(mu_next, a.dot(b) / a.squaredNorm());
    }
    w.mu_L[static_cast<std::size_t>(k)] = mu;
    const Vec2 Q = pLn - mu * c0.d1;
    const VecX uhat = sc.at(i).U.argmax_concave(c0.fu.transpose() * Q, lb);
    const Cell c = make_cell(sc, s, i, k, uhat);
    const Pieces p = pieces(sc, i, c, pLn, mu, Vec2::Zero());
    backward_step(p, c, mu, pLn, pHn, w.p_L[static_cast<std::size_t>(k)], w.p_H[static_cast<std::size_t>(k)]);
    w.zeta[static_cast<std::size_t>(k)] = -(pHn + mu * c0.d1) / lb;
  }
  return w;
}

// Block-averaged ∂φ/∂v by central differences of the value function; one value per interval.
inline std::vector<Vec2> fd_zeta(const Scenario& sc, int i, const ControlProfile& v, int blocks, double eps,
                                 const InnerOptions& inner = {}) {
  const auto& V = sc.at(i).V;
  const int K = v.intervals();
  blocks = std::max(1, std::min(blocks, K));
  std::vector<Vec2> dirs;
  if (V.shape() == ControlSet::Shape::segment) dirs.push_back(V.direction()); else dirs = {Vec2::UnitX(), Vec2::UnitY()};
  std::vector<Vec2> out(static_cast<std::size_t>(K), Vec2::Zero());
  for (int b = 0; b < blocks; ++b) {
    const int k0 = static_cast<int>((static_cast<long long>(b) * K) / blocks);
    const int k1 = static_cast<int>((static_cast<long long>(b + 1) * K) / blocks);
    const double dur = v.grid.time(k1) - v.grid.time(k0);
    Vec2 z = Vec2::Zero();
    for (const Vec2& e : dirs) {
      ControlProfile plus = v;
      ControlProfile minus = v;
      for (int k = k0; k < k1; ++k) {
        plus[k].head<2>() += eps * e;
        minus[k].head<2>() -= eps * e;
      }
      const double dphi = value_function(sc, i, plus, inner).phi - value_function(sc, i, minus, inner).phi;
      z += dphi / (2.0 * eps * dur) * e;
    }
    for (int k = k0; k < k1; ++k) out[static_cast<std::size_t>(k)] = z;
  }
  return out;
}

struct FitOptions {
  std::vector<std::string> families{"abnormal", "normal"};
  double tol{1e-3};
  int search_evaluations{150};
};

struct FitResult {
  UpperMultipliers upper;
  LowerMultipliers lower;
  NCOReport report;
  std::string family;
  double achieved{std::numeric_limits<double>::infinity()};  // largest residual/tol of Theorem 1 conditions
  bool verified{false};
};

// Searches the supplied witness families and returns the best one with its report.
inline FitResult fit_multipliers(const Scenario& sc, const BilevelSolution& s, const FitOptions& opt = {}) {
  if (!s.audit.ok()) {
    throw Error(ErrorKind::AuditFailed, "fit_multipliers: candidate violates constraints (worst " + std::to_string(s.audit.worst()) + ")");
  }
  const int N = sc.N();
  LowerMultipliers abnormal, normal;
  std::vector<LowerReport> rep_ab, rep_no;
  for (int i = 0; i < N; ++i) {
    abnormal.push_back(build_lower_abnormal(sc, s, i));
    normal.push_back(build_lower_normal(sc, s, i));
    rep_ab.push_back(verify_lower(sc, s, i, abnormal.back()));
    rep_no.push_back(verify_lower(sc, s, i, normal.back()));
  }
  const auto zeta = zeta_from_witnesses(normal);

  FitResult best;
  for (const auto& fam : opt.families) {
    const bool is_abnormal = fam == "abnormal";
    if (!is_abnormal && fam != "normal") throw Error(ErrorKind::Validation, "fit_multipliers: unknown family " + fam);
    const int dim = is_abnormal ? (N > 1 ? 1 : 0) : N;
    const double scale = is_abnormal ? 1.0 : 10.0;
    auto build = [&](const VecX& theta) {
      if (is_abnormal) return build_upper(sc, s, 0.0, std::vector<double>(static_cast<std::size_t>(N), 1.0), dim > 0 ? theta[0] : 0.0);
      std::vector<double> lv;
      for (int i = 0; i < N; ++i) lv.push_back(scale * theta[i]);
      return build_upper(sc, s, 1.0, lv, 0.0);
    };
    LowerMultipliers chosen;
    for (int i = 0; i < N; ++i) {
      const bool needs_zeta = !is_abnormal && sc.at(i).rho > 0.0;
      const bool prefer_ab = !needs_zeta && rep_ab[static_cast<std::size_t>(i)].worst() < rep_no[static_cast<std::size_t>(i)].worst();
      chosen.push_back(prefer_ab ? abnormal[static_cast<std::size_t>(i)] : normal[static_cast<std::size_t>(i)]);
    }
    auto score = [&](const VecX& theta) {
      const auto m = build(theta);
      return verify(sc, s, m, chosen, opt.tol, zeta).upper_ratio();
    };
    VecX theta = VecX::Zero(dim);
    double val = score(theta);
    if (val > 1.0 && dim > 0) {
      const auto r = optim::compass_search(score, theta, {0.25, 1e-4, opt.search_evaluations});
      if (r.value < val) {
        theta = r.x;
        val = r.value;
      }
    }
    if (val < best.achieved || best.family.empty()) {
      best.upper = build(theta);
      best.lower = chosen;
      best.report = verify(sc, s, best.upper, chosen, opt.tol, zeta);
      best.report.family = fam;
      best.family = fam;
      best.achieved = val;
    }
  }
  best.verified = best.report.all_pass();
  return best;
}

}  // namespace sweep
