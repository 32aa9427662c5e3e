#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "sweep/geometry.hpp"

namespace sweep {

// Compact convex control set: coordinate box, centred segment in the plane, or centred ball.
class ControlSet {
 public:
  enum class Shape { interval, segment, ball };

  static ControlSet interval(VecX lo, VecX hi) {
    if (lo.size() == 0 || lo.size() != hi.size()) throw Error(ErrorKind::Dimension, "interval bounds size mismatch");
    for (Eigen::Index c = 0; c < lo.size(); ++c) {
      if (!(lo[c] <= hi[c])) throw Error(ErrorKind::Validation, "interval requires lo <= hi");
    }
    ControlSet s;
    s.shape_ = Shape::interval;
    s.lo_ = std::move(lo);
    s.hi_ = std::move(hi);
    return s;
  }
  static ControlSet interval(double lo, double hi) {
    return interval(VecX::Constant(1, lo), VecX::Constant(1, hi));
  }
  static ControlSet segment(const Vec2& direction, double halflength) {
    const double n = direction.norm();
    if (!(n > 0.0)) throw Error(ErrorKind::Validation, "segment direction must be nonzero");
    if (!(halflength >= 0.0)) throw Error(ErrorKind::Validation, "segment halflength must be nonnegative");
    ControlSet s;
    s.shape_ = Shape::segment;
    s.direction_ = direction / n;
    s.halflength_ = halflength;
    return s;
  }
  static ControlSet ball(double radius, int dim = 2) {
    if (!(radius >= 0.0)) throw Error(ErrorKind::Validation, "ball radius must be nonnegative");
    if (dim < 1) throw Error(ErrorKind::Dimension, "ball dimension must be positive");
    ControlSet s;
    s.shape_ = Shape::ball;
    s.radius_ = radius;
    s.dim_ = dim;
    return s;
  }

  [[nodiscard]] Shape shape() const { return shape_; }
  [[nodiscard]] const VecX& lo() const { return lo_; }
  [[nodiscard]] const VecX& hi() const { return hi_; }
  [[nodiscard]] const Vec2& direction() const { return direction_; }
  [[nodiscard]] double halflength() const { return halflength_; }
  [[nodiscard]] double radius() const { return radius_; }

  [[nodiscard]] int dim() const {
    switch (shape_) {
      case Shape::interval: return static_cast<int>(lo_.size());
      case Shape::segment: return 2;
      case Shape::ball: return dim_;
    }
    return 0;
  }

  [[nodiscard]] double scale() const {
    switch (shape_) {
      case Shape::interval: return 1.0 + std::max(lo_.cwiseAbs().maxCoeff(), hi_.cwiseAbs().maxCoeff());
      case Shape::segment: return 1.0 + halflength_;
      case Shape::ball: return 1.0 + radius_;
    }
    return 1.0;
  }

  [[nodiscard]] VecX project(const VecX& u) const {
    check_dim(u);
    switch (shape_) {
      case Shape::interval: return u.cwiseMax(lo_).cwiseMin(hi_);
      case Shape::segment: {
        const double a = std::clamp(u.head<2>().dot(direction_), -halflength_, halflength_);
        return a * direction_;
      }
      case Shape::ball: {
        const double n = u.norm();
        return n <= radius_ ? u : VecX(u * (radius_ / n));
      }
    }
    return u;
  }

  [[nodiscard]] double distance(const VecX& u) const { return (u - project(u)).norm(); }
  [[nodiscard]] bool contains(const VecX& u, double tol = 1e-9) const { return distance(u) <= tol * scale(); }

  // argmax of the linear map u ↦ ⟨g, u⟩.
  [[nodiscard]] VecX argmax_linear(const VecX& g) const {
    check_dim(g);
    switch (shape_) {
      case Shape::interval: {
        VecX u(g.size());
        for (Eigen::Index c = 0; c < g.size(); ++c) u[c] = g[c] > 0.0 ? hi_[c] : (g[c] < 0.0 ? lo_[c] : std::clamp(0.0, lo_[c], hi_[c]));
        return u;
      }
      case Shape::segment: {
        const double s = g.head<2>().dot(direction_);
        return (s > 0.0 ? halflength_ : (s < 0.0 ? -halflength_ : 0.0)) * direction_;
      }
      case Shape::ball: {
        const double n = g.norm();
        return n > 0.0 ? VecX(g * (radius_ / n)) : VecX(VecX::Zero(dim_));
      }
    }
    return g;
  }

  [[nodiscard]] double support(const VecX& g) const { return g.dot(argmax_linear(g)); }
  [[nodiscard]] double min_linear(const VecX& g) const { return -support(-g); }

  // argmax of ⟨g, u⟩ − w‖u‖²; exact for every shape since the objective is isotropic.
  [[nodiscard]] VecX argmax_concave(const VecX& g, double w) const {
    if (w <= 0.0) return argmax_linear(g);
    return project(g / (2.0 * w));
  }

  // Distance from w to −N_V(v), the negated normal cone at v ∈ V.
  [[nodiscard]] double distance_to_neg_normal_cone(const VecX& v, const VecX& w) const {
    check_dim(v);
    check_dim(w);
    const double tol = 1e-9 * scale();
    switch (shape_) {
      case Shape::interval: {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < v.size(); ++c) {
          const bool at_lo = v[c] <= lo_[c] + tol;
          const bool at_hi = v[c] >= hi_[c] - tol;
          double e = 0.0;
          if (at_lo && at_hi) e = 0.0;
          else if (at_lo) e = std::max(0.0, -w[c]);  // −N = [0, ∞)
          else if (at_hi) e = std::max(0.0, w[c]);   // −N = (−∞, 0]
          else e = std::abs(w[c]);
          acc += e * e;
        }
        return std::sqrt(acc);
      }
      case Shape::segment: {
        if (halflength_ <= tol) return 0.0;
        const double a = v.head<2>().dot(direction_);
        const double s = w.head<2>().dot(direction_);
        if (a >= halflength_ - tol) return std::max(0.0, s);
        if (a <= -halflength_ + tol) return std::max(0.0, -s);
        return std::abs(s);
      }
      case Shape::ball: {
        if (radius_ <= tol) return 0.0;
        const double n = v.norm();
        if (n < radius_ - tol) return w.norm();
        const VecX ray = -v / n;
        const double s = std::max(0.0, w.dot(ray));
        return (w - s * ray).norm();
      }
    }
    return 0.0;
  }

  // Chart used by the direct solver: parameters in the unit cube map into the set.
  [[nodiscard]] int chart_dim() const { return shape_ == Shape::segment ? 1 : dim(); }
  [[nodiscard]] VecX from_unit(const VecX& theta) const {
    switch (shape_) {
      case Shape::interval: return lo_ + theta.cwiseProduct(hi_ - lo_);
      case Shape::segment: return (-halflength_ + 2.0 * halflength_ * theta[0]) * direction_;
      case Shape::ball: return project((2.0 * theta.array() - 1.0).matrix() * radius_);
    }
    return theta;
  }
  [[nodiscard]] VecX to_unit(const VecX& u) const {
    switch (shape_) {
      case Shape::interval: {
        VecX t(u.size());
        for (Eigen::Index c = 0; c < u.size(); ++c) {
          const double w = hi_[c] - lo_[c];
          t[c] = w > 0.0 ? (u[c] - lo_[c]) / w : 0.5;
        }
        return t;
      }
      case Shape::segment: {
        VecX t(1);
        t[0] = halflength_ > 0.0 ? (u.head<2>().dot(direction_) + halflength_) / (2.0 * halflength_) : 0.5;
        return t;
      }
      case Shape::ball:
        return radius_ > 0.0 ? VecX(((u / radius_).array() + 1.0) / 2.0) : VecX(VecX::Constant(dim_, 0.5));
    }
    return u;
  }

  [[nodiscard]] std::string shape_name() const {
    switch (shape_) {
      case Shape::interval: return "interval";
      case Shape::segment: return "segment";
      case Shape::ball: return "ball";
    }
    return "?";
  }

  bool operator==(const ControlSet& o) const {
    if (shape_ != o.shape_) return false;
    switch (shape_) {
      case Shape::interval: return lo_ == o.lo_ && hi_ == o.hi_;
      case Shape::segment: return direction_ == o.direction_ && halflength_ == o.halflength_;
      case Shape::ball: return radius_ == o.radius_ && dim_ == o.dim_;
    }
    return false;
  }

 private:
  void check_dim(const VecX& u) const {
    if (u.size() != dim()) throw Error(ErrorKind::Dimension, "control dimension mismatch for " + shape_name() + " set");
  }

  Shape shape_{Shape::interval};
  VecX lo_;
  VecX hi_;
  Vec2 direction_{Vec2::UnitX()};
  double halflength_{0.0};
  double radius_{0.0};
  int dim_{2};
};

}  // namespace sweep
