#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sweep/control_set.hpp"
#include "sweep/geometry.hpp"

namespace sweep {

// Lower-level drift. Both families are affine in u: f(x,u) = f0(x) + G(x)·u.
struct DriftSpec {
  enum class Family { scaled_linear, affine };

  Family family{Family::scaled_linear};
  double c{0.0};               // scaled_linear: f = c·u·x, scalar u
  Mat2 A{Mat2::Zero()};        // affine: f = A x + B u + b
  MatX B{MatX::Zero(2, 1)};
  Vec2 b{Vec2::Zero()};

  static DriftSpec scaled_linear(double c) {
    DriftSpec d;
    d.family = Family::scaled_linear;
    d.c = c;
    return d;
  }
  static DriftSpec affine(const Mat2& A, const MatX& B, const Vec2& b) {
    if (B.rows() != 2 || B.cols() < 1) throw Error(ErrorKind::Dimension, "affine drift needs a 2×m input matrix");
    DriftSpec d;
    d.family = Family::affine;
    d.A = A;
    d.B = B;
    d.b = b;
    return d;
  }

  [[nodiscard]] int control_dim() const { return family == Family::scaled_linear ? 1 : static_cast<int>(B.cols()); }

  [[nodiscard]] Vec2 f0(const Vec2& x) const { return family == Family::scaled_linear ? Vec2::Zero() : Vec2(A * x + b); }

  // ∂_u f, a 2×m matrix (constant in u for both families).
  [[nodiscard]] MatX dfdu(const Vec2& x) const {
    if (family == Family::scaled_linear) return MatX(c * x);
    return B;
  }

  [[nodiscard]] Vec2 operator()(const Vec2& x, const VecX& u) const {
    if (u.size() != control_dim()) throw Error(ErrorKind::Dimension, "drift control dimension mismatch");
    if (family == Family::scaled_linear) return c * u[0] * x;
    return A * x + B * u + b;
  }

  [[nodiscard]] Mat2 dfdx(const Vec2& /*x*/, const VecX& u) const {
    if (family == Family::scaled_linear) return c * u[0] * Mat2::Identity();
    return A;
  }

  bool operator==(const DriftSpec& o) const {
    if (family != o.family) return false;
    if (family == Family::scaled_linear) return c == o.c;
    return A == o.A && B.rows() == o.B.rows() && B.cols() == o.B.cols() && B == o.B && b == o.b;
  }
};

struct Participant {
  Vec2 y0{Vec2::Zero()};
  std::optional<Vec2> x0;  // empty: free initial point, chosen by the inner solver
  DriftSpec drift;
  ControlSet U{ControlSet::interval(0.0, 1.0)};
  ControlSet V{ControlSet::ball(1.0, 2)};
  double M{1.0};
  double rho{1.0};

  bool operator==(const Participant&) const = default;
};

struct SolverSettings {
  int grid_K{8};          // coarse intervals for the direct solver
  double h{0.0};          // fine step; 0 means T/2400
  unsigned seed{0};
  double tol{1e-3};
  double penalty_k{1e3};

  bool operator==(const SolverSettings&) const = default;
};

inline constexpr int kDefaultSteps = 2400;
inline constexpr double kReportTol = 1e-6;

struct Scenario {
  std::string name{"scenario"};
  double R{1.0};
  double T{1.0};
  std::vector<Participant> participants;
  SolverSettings solver;

  [[nodiscard]] int N() const { return static_cast<int>(participants.size()); }
  [[nodiscard]] const Participant& at(int i) const { return participants.at(static_cast<std::size_t>(i)); }

  [[nodiscard]] int steps() const {
    if (solver.h <= 0.0) return kDefaultSteps;
    return std::max(1, static_cast<int>(std::lround(T / solver.h)));
  }

  [[nodiscard]] Disk disk(const Vec2& center) const { return Disk(center, R); }

  [[nodiscard]] bool all_fixed_x0() const {
    for (const auto& p : participants) if (!p.x0) return false;
    return true;
  }

  [[nodiscard]] std::vector<Vec2> initial_centers() const {
    std::vector<Vec2> out;
    for (const auto& p : participants) out.push_back(p.y0);
    return out;
  }

  // Fixed x0 where given, else the disk center.
  [[nodiscard]] std::vector<Vec2> default_x0() const {
    std::vector<Vec2> out;
    for (const auto& p : participants) out.push_back(p.x0 ? *p.x0 : p.y0);
    return out;
  }

  // Throws Validation naming the first violated invariant.
  void validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::Validation, what); };
    if (participants.empty()) fail("N >= 1 required");
    if (participants.size() > 8) fail("N <= 8 supported");
    if (!(R > 0.0) || !std::isfinite(R)) fail("R > 0 required");
    if (!(T > 0.0) || !std::isfinite(T)) fail("T > 0 required");
    if (solver.grid_K < 2) fail("solver.grid_K >= 2 required");
    if (solver.h < 0.0 || solver.h > T) fail("solver.h must lie in (0, T]");
    if (!(solver.tol > 0.0)) fail("solver.tol > 0 required");
    if (!(solver.penalty_k > 0.0)) fail("solver.penalty_k > 0 required");
    const double slack = 1e-9 * R;
    for (int i = 0; i < N(); ++i) {
      const auto& p = at(i);
      const std::string tag = "participant " + std::to_string(i + 1) + ": ";
      if (!p.y0.allFinite()) fail(tag + "y0 must be finite");
      if (!(p.M > 0.0)) fail(tag + "M > 0 required (truncation cap)");
      if (!(p.rho >= 0.0)) fail(tag + "rho >= 0 required");
      if (p.U.dim() != p.drift.control_dim()) fail(tag + "U dimension must match the drift control dimension");
      if (p.V.dim() != 2) fail(tag + "V must be a subset of R^2");
      if (p.x0 && (*p.x0 - p.y0).norm() > R + slack) fail(tag + "x0 must lie in D + y0 (confinement)");
      for (int j = i + 1; j < N(); ++j) {
        if ((p.y0 - at(j).y0).norm() < 2.0 * R - slack) {
          fail("non-overlap violated between participants " + std::to_string(i + 1) + " and " +
               std::to_string(j + 1) + ": |y0_i - y0_j| < 2R");
        }
      }
    }
  }

  bool operator==(const Scenario&) const = default;
};

}  // namespace sweep
