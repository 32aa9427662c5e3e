#include <gtest/gtest.h>

#include <random>

#include "sweep/geometry.hpp"

using namespace sweep;

namespace {
const Vec2 vhat(-std::sqrt(2.0) / 2.0, std::sqrt(2.0) / 2.0);
}

TEST(TruncatedNormalCone, InteriorPointIsZero) {
  const auto c = truncated_normal_cone(Disk({0, 0}, 3), {1, 0}, 6);
  EXPECT_FALSE(c.is_ray());
}

TEST(TruncatedNormalCone, BoundaryPointIsRadialRay) {
  const auto c = truncated_normal_cone(Disk({0, 0}, 3), {3, 0}, 6);
  ASSERT_TRUE(c.is_ray());
  EXPECT_NEAR(c.direction.x(), 1.0, 1e-15);
  EXPECT_NEAR(c.direction.y(), 0.0, 1e-15);
  EXPECT_EQ(c.cap, 6.0);
}

TEST(TruncatedNormalCone, ContactGeometryOfTwoDiskExample) {
  const Vec2 center(-48, 48);
  const auto c = truncated_normal_cone(Disk(center, 3), center + 3.0 * vhat, 6);
  ASSERT_TRUE(c.is_ray());
  EXPECT_NEAR((c.direction - vhat).norm(), 0.0, 1e-12);
}

TEST(TruncatedNormalCone, OutsidePointThrows) {
  try {
    truncated_normal_cone(Disk({0, 0}, 3), {3.1, 0}, 6);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InfeasiblePoint);
  }
}

TEST(TruncatedNormalCone, AgreesWithNormalConeInequality) {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Disk disk({1.5, -2.0}, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = ang(rng);
    const Vec2 x = disk.center + disk.radius * Vec2(std::cos(a), std::sin(a));
    const auto c = truncated_normal_cone(disk, x, 6.0);
    ASSERT_TRUE(c.is_ray());
    for (int s = 0; s < 20; ++s) {
      const Vec2 xi = unit(rng) * c.cap * c.direction;
      EXPECT_TRUE(c.contains(xi, 1e-12));
      const double b = ang(rng);
      const Vec2 z = disk.center + disk.radius * std::sqrt(unit(rng)) * Vec2(std::cos(b), std::sin(b));
      EXPECT_LE(xi.dot(z - x), 1e-9);
    }
  }
}

TEST(ProjectToDisk, Examples) {
  EXPECT_EQ(project_to_disk(Disk({0, 0}, 3), {1, 1}), Vec2(1, 1));
  EXPECT_NEAR((project_to_disk(Disk({0, 0}, 3), {6, 0}) - Vec2(3, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((project_to_disk(Disk({2, 0}, 3), {-4, 0}) - Vec2(-1, 0)).norm(), 0.0, 1e-15);
}

TEST(ProjectToDisk, IdempotentAndNonexpansive) {
  std::mt19937 rng(11);
  std::normal_distribution<double> n(0.0, 5.0);
  const Disk disk({0.3, 0.7}, 3.0);
  for (int t = 0; t < 10000; ++t) {
    const Vec2 a(n(rng), n(rng));
    const Vec2 b(n(rng), n(rng));
    const Vec2 pa = project_to_disk(disk, a);
    const Vec2 pb = project_to_disk(disk, b);
    EXPECT_LE((pa - pb).norm(), (a - b).norm() + 1e-12);
    EXPECT_NEAR((project_to_disk(disk, pa) - pa).norm(), 0.0, 1e-12);
  }
}

TEST(ContactJacobian, Examples) {
  const Mat2 d1 = contact_jacobian({6, 0}, {0, 0});
  EXPECT_NEAR(d1(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(d1(0, 1), 0.0, 1e-15);
  EXPECT_NEAR(d1(1, 1), 1.0 / 6.0, 1e-15);
  const Mat2 d2 = contact_jacobian({0, 6}, {0, 0});
  EXPECT_NEAR(d2(0, 0), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(d2(1, 1), 0.0, 1e-15);
}

TEST(ContactJacobian, CoincidentCentersThrow) {
  try {
    contact_jacobian({1, 1}, {1, 1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingularConfiguration);
  }
}

TEST(ContactJacobian, SymmetricPsdAndAnnihilatesOffset) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  for (int t = 0; t < 10000; ++t) {
    const Vec2 yi(u(rng), u(rng));
    const Vec2 yj(u(rng), u(rng));
    const Mat2 d = contact_jacobian(yi, yj);
    EXPECT_LE((d * (yi - yj)).norm(), 1e-12);
    EXPECT_NEAR(d(0, 1), d(1, 0), 1e-15);
    EXPECT_GE(d.trace(), 0.0);
    EXPECT_GE(d.determinant(), -1e-14);
  }
}

TEST(Diamond, Examples) {
  VecX a(2), b(4);
  a << 1, 1;
  b << 3, 4, 5, 6;
  EXPECT_EQ(diamond(a, b), b);
  a << 2, 0;
  b << 1, 1, 7, 7;
  VecX expect(4);
  expect << 2, 2, 0, 0;
  EXPECT_EQ(diamond(a, b), expect);
}

TEST(Diamond, MatchesBlockwiseExpansion) {
  VecX nu(2), off(4);
  nu << 0.5, 2.0;
  off << 1, -2, 3, 4;
  const VecX r = diamond(nu, off);
  for (int i = 0; i < 2; ++i) {
    for (int c = 0; c < 2; ++c) EXPECT_DOUBLE_EQ(r[2 * i + c], nu[i] * off[2 * i + c]);
  }
}

TEST(Diamond, BadLengthsThrow) {
  EXPECT_THROW(diamond(VecX::Ones(2), VecX::Ones(3)), Error);
  EXPECT_THROW(diamond(VecX(), VecX::Ones(3)), Error);
}

TEST(Diamond, Bilinear) {
  std::mt19937 rng(5);
  std::normal_distribution<double> n;
  for (int t = 0; t < 100; ++t) {
    VecX a1(3), a2(3), b1(6), b2(6);
    for (auto* v : {&a1, &a2}) for (int c = 0; c < 3; ++c) (*v)[c] = n(rng);
    for (auto* v : {&b1, &b2}) for (int c = 0; c < 6; ++c) (*v)[c] = n(rng);
    const double s = n(rng);
    EXPECT_LE((diamond(a1 + s * a2, b1) - diamond(a1, b1) - s * diamond(a2, b1)).norm(), 1e-12);
    EXPECT_LE((diamond(a1, b1 + s * b2) - diamond(a1, b1) - s * diamond(a1, b2)).norm(), 1e-12);
    EXPECT_EQ(diamond(VecX::Ones(3), b1), b1);
  }
}

TEST(SigmaSupport, Examples) {
  EXPECT_EQ(sigma_support({1, 0}, {-1, 0}, 0, 3, 6), 0.0);
  EXPECT_NEAR(sigma_support({3, 0}, {-1, 0}, 0, 3, 6), 6.0, 1e-15);
  EXPECT_EQ(sigma_support({3, 0}, {1, 0}, 0, 3, 6), 0.0);
}

TEST(SigmaSupport, MatchesSupremumOverSegment) {
  std::mt19937 rng(9);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  for (int t = 0; t < 1000; ++t) {
    const double a = ang(rng);
    const Vec2 d = 3.0 * Vec2(std::cos(a), std::sin(a));
    const Vec2 q(n(rng), n(rng));
    const double nu = std::abs(n(rng));
    double brute = 0.0;
    for (int s = 0; s <= 600; ++s) brute = std::max(brute, (q - nu * d).dot(-(6.0 * s / 600.0) * d / 3.0));
    EXPECT_NEAR(sigma_support(d, q, nu, 3, 6), brute, 1e-9);
  }
}

TEST(SigmaSupport, NonnegativeEverywhereSampled) {
  std::mt19937 rng(13);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 10000; ++t) {
    const double a = 2.0 * M_PI * u(rng);
    const double r = u(rng) < 0.5 ? 3.0 : 3.0 * u(rng);
    const Vec2 d = r * Vec2(std::cos(a), std::sin(a));
    EXPECT_GE(sigma_support(d, {n(rng), n(rng)}, std::abs(n(rng)), 3, 6), 0.0);
  }
}

TEST(SigmaSupport, OutsideThrows) { EXPECT_THROW(sigma_support({4, 0}, {1, 0}, 0, 3, 6), Error); }

TEST(SigmaSubgradient, MatchesFiniteDifferencesAtSmoothPoints) {
  std::mt19937 rng(17);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
  int checked = 0;
  while (checked < 500) {
    const double a = ang(rng);
    const Vec2 d = 3.0 * Vec2(std::cos(a), std::sin(a));
    const Vec2 q(n(rng), n(rng));
    const double nu = std::abs(n(rng));
    const double s = -(q - nu * d).dot(d);
    if (std::abs(s) < 1e-3) continue;
    const Segment2 sel = sigma_subgradient_x(d, q, nu, 3, 6, true);
    ASSERT_NEAR((sel.hi - sel.lo).norm(), 0.0, 0.0);
    const Vec2 fd = sigma_piece_gradient_fd(d, q, nu, 3, 6);
    EXPECT_LE((sel.lo - fd).norm(), 1e-5 * (1.0 + fd.norm()));
    ++checked;
  }
}

TEST(SigmaSubgradient, KinkGivesClarkeSegment) {
  const Vec2 d(3, 0);
  const Vec2 q(3, 1);  // ⟨q − νd, d⟩ = 0 with ν = 1
  const Segment2 sel = sigma_subgradient_x(d, q, 1.0, 3, 6, true);
  EXPECT_EQ(sel.lo, Vec2::Zero());
  EXPECT_NEAR((sel.hi - 2.0 * (-q + 2.0 * d)).norm(), 0.0, 1e-12);
  EXPECT_EQ(sigma_subgradient_x(d, q, 1.0, 3, 6, false).hi, Vec2::Zero());
}
