#pragma once

// Lower-level value function: minimal control effort that keeps the catch-up
// scheme within its truncation cap, searched over block-constant targets.

#include <cmath>
#include <vector>

#include "sweep/dynamics.hpp"
#include "sweep/optim.hpp"

namespace sweep {

struct InnerOptions {
  int blocks{8};
  int starts{8};
  unsigned seed{0};
  bool greedy_only{false};
  optim::CompassOptions search{0.125, 1e-3, 600};
};

struct InnerResult {
  double phi{0.0};
  Vec2 x0{Vec2::Zero()};
  ControlProfile u;
  double excess{0.0};  // total cap excess of the best candidate; 0 when feasible
  int evaluations{0};
};

namespace detail {

struct StepChoice {
  VecX u;
  double excess{0.0};
};

// Exact projection of z onto {u : ‖w + B u‖ ≤ rho} by bisection on the multiplier.
// Returns false if the set is empty.
inline bool project_ellipsoid(const MatX& B, const Vec2& w, double rho, const VecX& z, VecX& out) {
  if ((w + B * z).norm() <= rho) {
    out = z;
    return true;
  }
  // BᵀB = V diag(σ²) Vᵀ from the SVD of B; each trial multiplier then costs O(m²).
  const Eigen::JacobiSVD<MatX> svd(B, Eigen::ComputeFullV);
  const MatX& V = svd.matrixV();
  VecX ev = VecX::Zero(z.size());
  ev.head(svd.singularValues().size()) = svd.singularValues().array().square().matrix();
  const VecX a = V.transpose() * z;
  const VecX c = V.transpose() * (B.transpose() * w);
  auto solve = [&](double lam) -> VecX {
    return V * ((a - lam * c).array() / (1.0 + lam * ev.array())).matrix();
  };
  double hi = 1.0;
  VecX u = solve(hi);
  while ((w + B * u).norm() > rho && hi < 1e14) {
    hi *= 4.0;
    u = solve(hi);
  }
  if ((w + B * u).norm() > rho) return false;
  double lo = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const VecX cand = solve(mid);
    if ((w + B * cand).norm() > rho) lo = mid; else { hi = mid; u = cand; }
  }
  out = u;
  return true;
}

// argmin over U of ‖w + B u‖ by projected gradient.
inline VecX least_violation(const ControlSet& U, const MatX& B, const Vec2& w) {
  VecX u = U.project(VecX::Zero(U.dim()));
  const double L = std::max(1e-300, B.squaredNorm());
  for (int it = 0; it < 500; ++it) {
    const VecX next = U.project(u - (B.transpose() * (w + B * u)) / L);
    if ((next - u).norm() <= 1e-14 * (1.0 + u.norm())) break;
    u = next;
  }
  return u;
}

// Control closest to target keeping the next catch-up correction within the cap.
inline StepChoice feasible_control(const ControlSet& U, const MatX& B, const Vec2& w, double rho, const VecX& target) {
  if (U.shape() == ControlSet::Shape::interval && U.dim() == 1) {
    const double lo = U.lo()[0];
    const double hi = U.hi()[0];
    const Vec2 b = B.col(0);
    const double bb = b.squaredNorm();
    const double wb = w.dot(b);
    const double ww = w.squaredNorm();
    const double disc = wb * wb - bb * (ww - rho * rho);
    if (bb > 0.0 && disc >= 0.0) {
      const double sq = std::sqrt(disc);
      const double r1 = (-wb - sq) / bb;
      const double r2 = (-wb + sq) / bb;
      const double a = std::max(lo, r1);
      const double c = std::min(hi, r2);
      if (a <= c) return {VecX::Constant(1, std::clamp(target[0], a, c)), 0.0};
    } else if (bb == 0.0 && std::sqrt(ww) <= rho) {
      return {VecX::Constant(1, std::clamp(target[0], lo, hi)), 0.0};
    }
    const double best = bb > 0.0 ? std::clamp(-wb / bb, lo, hi) : std::clamp(0.0, lo, hi);
    return {VecX::Constant(1, best), std::max(0.0, (w + best * b).norm() - rho)};
  }
  // If either single projection lands in the other set it is the projection onto the intersection.
  VecX x = U.project(target);
  if ((w + B * x).norm() <= rho) return {x, 0.0};
  {
    VecX e;
    if (project_ellipsoid(B, w, rho, target, e) && U.contains(e, 1e-12)) return {e, 0.0};
  }
  // Dykstra between U and the cap ellipsoid, finished on the ellipsoid.
  VecX p = VecX::Zero(x.size());
  VecX q = VecX::Zero(x.size());
  VecX y = x;
  bool nonempty = true;
  for (int it = 0; it < 300; ++it) {
    VecX ynew;
    if (!project_ellipsoid(B, w, rho, x + p, ynew)) {
      nonempty = false;
      break;
    }
    p = x + p - ynew;
    const VecX xnew = U.project(ynew + q);
    q = ynew + q - xnew;
    const double change = (xnew - x).norm() + (ynew - y).norm();
    x = xnew;
    y = ynew;
    if (change <= 1e-13 * (1.0 + x.norm())) break;
  }
  if (nonempty) {
    VecX u;
    if (project_ellipsoid(B, w, rho, x, u) && U.distance(u) <= 1e-10 * U.scale()) return {u, 0.0};
  }
  const VecX u = least_violation(U, B, w);
  return {u, std::max(0.0, (w + B * u).norm() - rho)};
}

struct MarchResult {
  ControlProfile u;
  double cost{0.0};
  double excess{0.0};
};

// Greedy forward march: at each step pick the admissible control nearest to the block target.
inline MarchResult march(const Scenario& sc, int i, const std::vector<Vec2>& ypath, const Grid& grid, const Vec2& x0,
                         const std::vector<VecX>& block_targets) {
  const auto& p = sc.at(i);
  const int K = grid.intervals();
  const int blocks = static_cast<int>(block_targets.size());
  MarchResult r;
  r.u.grid = grid;
  r.u.values.reserve(static_cast<std::size_t>(K));
  Vec2 x = x0;
  for (int k = 0; k < K; ++k) {
    const double h = grid.step(k);
    const Vec2 yn = ypath[static_cast<std::size_t>(k) + 1];
    const Vec2 w = x + h * p.drift.f0(x) - yn;
    const MatX B = h * p.drift.dfdu(x);
    const int b = std::min(blocks - 1, static_cast<int>((static_cast<long long>(k) * blocks) / K));
    StepChoice c = feasible_control(p.U, B, w, sc.R + h * p.M, block_targets[static_cast<std::size_t>(b)]);
    const Vec2 free = x + h * p.drift(x, c.u);
    const double dist = (free - yn).norm();
    x = dist > sc.R ? Vec2(yn + sc.R * (free - yn) / dist) : free;
    r.cost += h * c.u.squaredNorm();
    r.excess += c.excess;
    r.u.values.push_back(std::move(c.u));
  }
  return r;
}

inline bool lexicographically_less(const ControlProfile& a, const ControlProfile& b) {
  for (int k = 0; k < std::min(a.intervals(), b.intervals()); ++k) {
    for (Eigen::Index c = 0; c < a[k].size(); ++c) {
      if (a[k][c] != b[k][c]) return a[k][c] < b[k][c];
    }
  }
  return false;
}

inline std::vector<Vec2> upper_path(const Scenario& sc, int i, const ControlProfile& v) {
  std::vector<Vec2> y;
  y.reserve(static_cast<std::size_t>(v.intervals()) + 1);
  y.push_back(sc.at(i).y0);
  for (int k = 0; k < v.intervals(); ++k) {
    if (!sc.at(i).V.contains(v[k], kControlTol)) {
      throw Error(ErrorKind::InfeasibleControl, "upper control of participant " + std::to_string(i + 1) + " outside V");
    }
    y.push_back(y.back() + v.grid.step(k) * v[k].head<2>());
  }
  return y;
}

}  // namespace detail

// φ^i(v_i): best lower-level effort found over block-constant targets (and x0 when free).
inline InnerResult value_function(const Scenario& sc, int i, const ControlProfile& v, const InnerOptions& opt = {}) {
  const auto& p = sc.at(i);
  const auto ypath = detail::upper_path(sc, i, v);
  const Grid& grid = v.grid;
  const int cd = p.U.chart_dim();
  const int blocks = std::max(1, std::min(opt.blocks, grid.intervals()));
  const bool free_x0 = !p.x0;
  const int dim = blocks * cd + (free_x0 ? 2 : 0);
  const double heavy = 1e6;

  auto decode = [&](const VecX& theta, std::vector<VecX>& targets, Vec2& x0) {
    targets.clear();
    for (int b = 0; b < blocks; ++b) targets.push_back(p.U.from_unit(theta.segment(b * cd, cd)));
    if (free_x0) {
      const double s = std::sqrt(theta[blocks * cd]);
      const double a = 2.0 * M_PI * theta[blocks * cd + 1];
      x0 = p.y0 + sc.R * s * Vec2(std::cos(a), std::sin(a));
    } else {
      x0 = *p.x0;
    }
  };

  InnerResult best;
  bool have = false;
  double best_score = 0.0;
  int evals = 0;
  auto consider = [&](const VecX& theta) {
    std::vector<VecX> targets;
    Vec2 x0;
    decode(theta, targets, x0);
    auto m = detail::march(sc, i, ypath, grid, x0, targets);
    const double score = m.cost + heavy * m.excess;
    const bool better = !have || score < best_score ||
                        (score == best_score && detail::lexicographically_less(m.u, best.u));
    if (better) {
      have = true;
      best_score = score;
      best.phi = m.cost;
      best.x0 = x0;
      best.excess = m.excess;
      best.u = std::move(m.u);
    }
    return score;
  };
  auto objective = [&](const VecX& theta) {
    ++evals;
    return consider(theta);
  };

  VecX rest(dim);
  for (int b = 0; b < blocks; ++b) rest.segment(b * cd, cd) = p.U.to_unit(p.U.project(VecX::Zero(p.U.dim())));
  if (free_x0) rest.tail(2).setZero();
  objective(rest);
  if (!opt.greedy_only) {
    optim::compass_search(objective, rest, opt.search);
    for (int s = 1; s <= opt.starts; ++s) optim::compass_search(objective, optim::halton(static_cast<std::uint64_t>(s), dim, opt.seed), opt.search);
  }
  best.evaluations = evals;
  if (best.excess > 1e-9 * (1.0 + sc.R)) {
    throw Error(ErrorKind::Infeasible, "value_function: no control keeps participant " + std::to_string(i + 1) +
                                           " confined (cap excess " + std::to_string(best.excess) + ")");
  }
  return best;
}

}  // namespace sweep
