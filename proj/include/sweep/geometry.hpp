#pragma once

// Disk geometry and the algebraic kernels of the optimality system: truncated
// normal cones, projections, the pair Jacobian d^{ij}, the blockwise product
// and the support term sigma.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "sweep/errors.hpp"

namespace sweep {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Relative tolerance for geometric predicates (contact detection).
inline constexpr double kActiveRel = 1e-9;

struct Disk {
  Vec2 center{Vec2::Zero()};
  double radius{1.0};

  Disk() = default;
  Disk(Vec2 c, double r) : center(std::move(c)), radius(r) {
    if (!(r > 0.0)) throw Error(ErrorKind::Validation, "disk radius must be positive");
  }

  [[nodiscard]] double active_tol() const { return kActiveRel * radius; }
  [[nodiscard]] bool contains(const Vec2& x, double slack = 0.0) const {
    return (x - center).norm() <= radius + slack;
  }
};

// N^M_A(z) = N_A(z) ∩ M·B_1(0) for a disk: either {0} or the segment {s·n : s ∈ [0, cap]}.
struct ConeSection {
  enum class Kind { zero, ray };
  Kind kind{Kind::zero};
  Vec2 direction{Vec2::Zero()};
  double cap{0.0};

  [[nodiscard]] bool is_ray() const { return kind == Kind::ray; }

  [[nodiscard]] bool contains(const Vec2& xi, double tol = 1e-12) const {
    if (kind == Kind::zero) return xi.norm() <= tol;
    const double s = xi.dot(direction);
    const Vec2 perp = xi - s * direction;
    return perp.norm() <= tol && s >= -tol && s <= cap + tol;
  }
};

inline ConeSection truncated_normal_cone(const Disk& disk, const Vec2& x, double cap) {
  if (cap < 0.0) throw Error(ErrorKind::Validation, "cone cap must be nonnegative");
  const Vec2 d = x - disk.center;
  const double r = d.norm();
  const double eps = disk.active_tol();
  if (r > disk.radius + eps) throw Error(ErrorKind::InfeasiblePoint, "point lies outside the disk");
  ConeSection out;
  out.cap = cap;
  if (r < disk.radius - eps) return out;
  out.kind = ConeSection::Kind::ray;
  out.direction = d / r;
  return out;
}

inline Vec2 project_to_disk(const Disk& disk, const Vec2& x) {
  const Vec2 d = x - disk.center;
  const double r = d.norm();
  if (r <= disk.radius) return x;
  return disk.center + disk.radius * d / r;
}

// d^{ij} = ‖Δ‖⁻¹ I − ΔΔᵀ/‖Δ‖³ with Δ = y_i − y_j: the derivative of Δ/‖Δ‖.
inline Mat2 contact_jacobian(const Vec2& yi, const Vec2& yj) {
  const Vec2 delta = yi - yj;
  const double n = delta.norm();
  if (n <= 1e-12 * (1.0 + yi.norm())) {
    throw Error(ErrorKind::SingularConfiguration, "coincident centers in contact_jacobian");
  }
  return Mat2::Identity() / n - delta * delta.transpose() / (n * n * n);
}

inline Vec2 unit_offset(const Vec2& yi, const Vec2& yj) {
  const Vec2 delta = yi - yj;
  const double n = delta.norm();
  if (n <= 1e-12 * (1.0 + yi.norm())) {
    throw Error(ErrorKind::SingularConfiguration, "coincident centers in pairwise term");
  }
  return delta / n;
}

// a ⋄ b: block i of b (length m) scaled by a_i.
inline VecX diamond(const VecX& a, const VecX& b) {
  const auto k = a.size();
  if (k == 0 || b.size() == 0 || b.size() % k != 0) {
    throw Error(ErrorKind::Dimension, "diamond: length(b) must be a positive multiple of length(a)");
  }
  const auto m = b.size() / k;
  VecX out(b.size());
  for (Eigen::Index i = 0; i < k; ++i) out.segment(i * m, m) = a[i] * b.segment(i * m, m);
  return out;
}

// Boundary branch of sigma, extended off the boundary: (cap/R)·max(0, −⟨q − νd, d⟩).
inline double sigma_piece(const Vec2& d, const Vec2& q, double nu, double radius, double cap) {
  return cap / radius * std::max(0.0, -(q - nu * d).dot(d));
}

// sup over ξ ∈ −N^cap_{D}(d) of ⟨q − νd, ξ⟩ for the disk of the given radius centred at 0.
inline double sigma_support(const Vec2& offset, const Vec2& q, double nu, double radius, double cap) {
  const double r = offset.norm();
  const double eps = kActiveRel * radius;
  if (r > radius + eps) throw Error(ErrorKind::InfeasiblePoint, "sigma_support: offset outside the disk");
  if (r < radius - eps) return 0.0;
  return sigma_piece(offset, q, nu, radius, cap);
}

// A segment {lo + θ(hi − lo) : θ ∈ [0,1]}; degenerate when lo == hi.
struct Segment2 {
  Vec2 lo{Vec2::Zero()};
  Vec2 hi{Vec2::Zero()};

  static Segment2 point(const Vec2& p) { return {p, p}; }

  [[nodiscard]] Segment2 shifted(const Vec2& c) const { return {lo + c, hi + c}; }
  [[nodiscard]] Segment2 negated() const { return {-lo, -hi}; }

  [[nodiscard]] double theta_nearest(const Vec2& p) const {
    const Vec2 e = hi - lo;
    const double ee = e.squaredNorm();
    if (ee <= 0.0) return 0.0;
    return std::clamp((p - lo).dot(e) / ee, 0.0, 1.0);
  }
  [[nodiscard]] Vec2 at(double theta) const { return lo + theta * (hi - lo); }
  [[nodiscard]] double distance(const Vec2& p) const { return (p - at(theta_nearest(p))).norm(); }
};

// Clarke subdifferential of sigma with respect to x (∂_y is its negative) for an
// offset d = x − y. Inactive offsets give {0}; at the kink of max(0,·) the whole
// segment conv{0, ∇} is returned.
inline Segment2 sigma_subgradient_x(const Vec2& d, const Vec2& q, double nu, double radius, double cap,
                                    bool on_boundary, double kink_tol = 1e-9) {
  if (!on_boundary) return Segment2::point(Vec2::Zero());
  const double s = -(q - nu * d).dot(d);
  const Vec2 grad = cap / radius * (-q + 2.0 * nu * d);
  const double scale = 1.0 + q.norm() * d.norm() + std::abs(nu) * d.squaredNorm();
  if (s > kink_tol * scale) return Segment2::point(grad);
  if (s < -kink_tol * scale) return Segment2::point(Vec2::Zero());
  return {Vec2::Zero(), grad};
}

// Central finite-difference gradient of sigma_piece in d (step 1e-6).
inline Vec2 sigma_piece_gradient_fd(const Vec2& d, const Vec2& q, double nu, double radius, double cap,
                                    double step = 1e-6) {
  Vec2 g;
  for (int c = 0; c < 2; ++c) {
    Vec2 e = Vec2::Zero();
    e[c] = step;
    g[c] = (sigma_piece(d + e, q, nu, radius, cap) - sigma_piece(d - e, q, nu, radius, cap)) / (2.0 * step);
  }
  return g;
}

}  // namespace sweep
