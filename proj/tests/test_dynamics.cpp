#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace sweep;
using namespace sweep::testing;

namespace {

double terminal_error(const Scenario& sc, const CaseStudyResult& r) {
  double e = 0.0;
  for (int i = 0; i < 2; ++i) {
    e += (r.solution.y.terminal(i) - r.params.y(i, sc.T)).squaredNorm();
    e += (r.solution.x.terminal(i) - r.params.x(i, sc.T)).squaredNorm();
  }
  return std::sqrt(e);
}

}  // namespace

TEST(IntegrateUpper, RestKeepsCenters) {
  const auto sc = twodisk();
  const auto y = integrate_upper(sc, constant_controls(sc, {VecX::Zero(2), VecX::Zero(2)}));
  for (int k = 0; k < y.nodes(); k += 97) {
    EXPECT_EQ(y.at(k, 0), sc.at(0).y0);
    EXPECT_EQ(y.at(k, 1), sc.at(1).y0);
  }
}

TEST(IntegrateUpper, LinearMotionTowardExit) {
  const auto sc = twodisk();
  const double vbar = 11.86;
  const VecX v = -vbar * exit_direction();
  const auto y = integrate_upper(sc, constant_controls(sc, {v, v}));
  for (int k = 0; k < y.nodes(); k += 50) {
    const double t = y.grid.time(k);
    EXPECT_LE((y.at(k, 1) - (sc.at(1).y0 - t * vbar * exit_direction())).norm(), 1e-9);
    if (vbar * t < 48.0 * std::sqrt(2.0)) EXPECT_NEAR(y.at(k, 1).norm(), 48.0 * std::sqrt(2.0) - vbar * t, 1e-9);
  }
}

TEST(IntegrateUpper, EqualControlsPreserveDistance) {
  const auto sc = twodisk();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> a(-10.0, 10.0);
  const Grid g = Grid::uniform(sc.T, sc.steps());
  ControlProfile v{g, {}};
  for (int k = 0; k < g.intervals(); ++k) v.values.push_back(VecX(a(rng) * exit_direction()));
  const auto y = integrate_upper(sc, {v, v});
  for (int k = 0; k < y.nodes(); ++k) EXPECT_NEAR((y.at(k, 0) - y.at(k, 1)).norm(), 6.0, 1e-12);
}

TEST(IntegrateUpper, RejectsControlOutsideV) {
  const auto sc = twodisk();
  const VecX v = Vec2(1.0, 1.0);  // orthogonal to the exit segment
  try {
    integrate_upper(sc, constant_controls(sc, {v, v}));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InfeasibleControl);
  }
}

TEST(Catchup, RestingDiskWithZeroControlStays) {
  const auto sc = twodisk();
  const auto s = simulate(sc, constant_controls(sc, {VecX::Zero(2), VecX::Zero(2)}),
                          constant_controls(sc, {VecX::Zero(1), VecX::Zero(1)}), sc.default_x0());
  for (int i = 0; i < 2; ++i) EXPECT_EQ(s.x.terminal(i), sc.at(i).y0);
}

TEST(Catchup, CaseStudyStaysOnBoundaryAfterContact) {
  const auto sc = twodisk();
  const auto r = solve_twodisk_parametric(sc);
  const double h = sc.T / sc.steps();
  for (int k = 0; k < r.solution.x.nodes(); ++k) {
    const double t = r.solution.x.grid.time(k);
    if (t < r.params.t_a + h) continue;
    for (int i = 0; i < 2; ++i) EXPECT_NEAR((r.solution.x.at(k, i) - r.solution.y.at(k, i)).norm(), 3.0, 10.0 * h);
  }
}

TEST(Catchup, ContactStartsAtTa) {
  const auto sc = twodisk();
  const auto r = solve_twodisk_parametric(sc);
  const double h = sc.T / sc.steps();
  int first = -1;
  for (int k = 0; k < r.solution.x.nodes() && first < 0; ++k) {
    if (r.solution.x.in_contact(k, r.params.lead)) first = k;
  }
  ASSERT_GE(first, 0);
  EXPECT_NEAR(r.solution.x.grid.time(first), r.params.t_a, h + 1e-12);
  EXPECT_NEAR(r.params.v_bar * r.params.t_a, 3.0, 1e-9);
}

TEST(Catchup, ConfinementHoldsAtNodes) {
  const auto sc = twodisk();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> a(-14.0, 14.0);
  std::uniform_real_distribution<double> b(0.0, 0.1);
  const Grid g = Grid::uniform(sc.T, sc.steps());
  ControlProfile v{g, {}};
  ControlProfile u{g, {}};
  for (int k = 0; k < g.intervals(); ++k) {
    v.values.push_back(VecX(a(rng) * exit_direction()));
    u.values.push_back(VecX::Constant(1, b(rng)));
  }
  CatchupOptions opt;
  opt.enforce_cap = false;
  const auto s = simulate(sc, {v, v}, {u, u}, sc.default_x0(), opt);
  for (int k = 0; k < s.x.nodes(); ++k) {
    for (int i = 0; i < 2; ++i) EXPECT_LE((s.x.at(k, i) - s.y.at(k, i)).norm(), 3.0 * (1.0 + 1e-12));
  }
}

TEST(Catchup, TruncationViolationNamesParticipantAndTime) {
  auto sc = twodisk();
  for (auto& p : sc.participants) p.M = 1.0;
  const VecX v = -14.0 * exit_direction();
  try {
    simulate(sc, constant_controls(sc, {v, v}), constant_controls(sc, {VecX::Zero(1), VecX::Zero(1)}), sc.default_x0());
    FAIL() << "expected a truncation violation";
  } catch (const TruncationError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TruncationViolation);
    EXPECT_GE(e.participant, 1);
    EXPECT_LE(e.participant, 2);
    EXPECT_GT(e.required, e.cap);
    EXPECT_GT(e.time, 0.0);
  }
}

TEST(Catchup, FirstOrderConvergence) {
  double prev = -1.0;
  for (int steps : {1200, 2400, 4800}) {
    const auto sc = twodisk(steps);
    const double e = terminal_error(sc, solve_twodisk_parametric(sc));
    if (prev > 0.0) {
      EXPECT_GE(prev / e, 1.5);
      EXPECT_LE(prev / e, 2.5);
    }
    prev = e;
  }
}

TEST(Penalty, InteriorRunMatchesCatchup) {
  auto p = free_walker(Vec2::Zero());
  const auto sc = single(p, 3.0, 1.0, 200);
  const auto v = constant_controls(sc, {vec({1.0, 0.5})});
  const auto u = constant_controls(sc, {vec({1.2, 0.6})});
  const auto y = integrate_upper(sc, v);
  const auto xc = integrate_lower_catchup(sc, y, u, sc.default_x0());
  const auto xp = integrate_lower_penalty(sc, y, u, sc.default_x0(), {1e3, 0.0});
  EXPECT_NEAR((xc.terminal(0) - xp.terminal(0)).norm(), 0.0, 1e-9);
}

TEST(Penalty, DiscrepancyShrinksWithStiffness) {
  const auto sc = twodisk();
  const auto r = solve_twodisk_parametric(sc);
  double prev = std::numeric_limits<double>::infinity();
  for (double k : {1e2, 1e3, 1e4}) {
    const auto xp = integrate_lower_penalty(sc, r.solution.y, r.solution.u, sc.default_x0(), {k, 0.0});
    double gap = 0.0;
    for (int i = 0; i < 2; ++i) gap = std::max(gap, (xp.terminal(i) - r.solution.x.terminal(i)).norm());
    EXPECT_LE(gap, prev);
    prev = gap;
  }
}

TEST(Penalty, FieldNeverExceedsCap) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> a(-10.0, 10.0);
  for (int n = 0; n < 10000; ++n) {
    const Vec2 d(a(rng), a(rng));
    EXPECT_LE(penalty_field(d, 3.0, 1e4, 6.0).norm(), 6.0 + 1e-12);
  }
}

TEST(Penalty, UnstableSubstepRejected) {
  const auto sc = twodisk();
  const auto y = integrate_upper(sc, constant_controls(sc, {VecX::Zero(2), VecX::Zero(2)}));
  const auto u = constant_controls(sc, {VecX::Zero(1), VecX::Zero(1)});
  try {
    integrate_lower_penalty(sc, y, u, sc.default_x0(), {1e3, 1e-3});
    FAIL() << "expected a stability error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Stability);
  }
}

TEST(Feasibility, CaseStudyIsFeasible) {
  const auto sc = twodisk();
  const auto r = solve_twodisk_parametric(sc);
  EXPECT_LE(r.solution.audit.worst(), 1e-6);
}

TEST(Feasibility, CoincidentDisksOverlapByDiameter) {
  auto sc = twodisk();
  sc.participants[1].y0 = sc.participants[0].y0;
  sc.participants[1].x0 = sc.participants[0].x0;
  const auto v = constant_controls(sc, {VecX::Zero(2), VecX::Zero(2)});
  const auto u = constant_controls(sc, {VecX::Zero(1), VecX::Zero(1)});
  const auto y = integrate_upper(sc, v);
  const auto x = integrate_lower_catchup(sc, y, u, sc.default_x0());
  const auto rep = check_feasibility(sc, y, x, u, v);
  EXPECT_NEAR(rep.overlap.value, 6.0, 1e-12);
}

TEST(Feasibility, ControlOutsideUFlagged) {
  const auto sc = twodisk();
  const auto v = constant_controls(sc, {VecX::Zero(2), VecX::Zero(2)});
  const auto u = constant_controls(sc, {VecX::Constant(1, 1.5), VecX::Zero(1)});
  const auto y = integrate_upper(sc, v);
  const auto x = integrate_lower_catchup(sc, y, constant_controls(sc, {VecX::Zero(1), VecX::Zero(1)}), sc.default_x0());
  const auto rep = check_feasibility(sc, y, x, u, v);
  EXPECT_NEAR(rep.control_U.value, 0.5, 1e-12);
  EXPECT_EQ(rep.control_U.participant, 1);
  EXPECT_FALSE(rep.ok());
}

TEST(Costs, UpperCostAtExitPair) {
  const Vec2 e = exit_direction();
  EXPECT_NEAR(cost_upper({3.0 * e, -3.0 * e}), 9.0, 1e-12);
}

TEST(Costs, LowerCostQuadrature) {
  const Grid g = Grid::uniform(6.0, 600);
  EXPECT_DOUBLE_EQ(cost_lower(ControlProfile::constant(g, VecX::Zero(1))), 0.0);
  EXPECT_NEAR(cost_lower(ControlProfile::constant(g, VecX::Ones(1))), 6.0, 1e-12);
}

TEST(Costs, PermutationAndTimeReversal) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> a(-5.0, 5.0);
  std::vector<Vec2> yT;
  for (int i = 0; i < 5; ++i) yT.emplace_back(a(rng), a(rng));
  auto perm = yT;
  std::reverse(perm.begin(), perm.end());
  EXPECT_NEAR(cost_upper(yT), cost_upper(perm), 1e-12);

  const Grid g = Grid::uniform(6.0, 300);
  ControlProfile u{g, {}};
  for (int k = 0; k < g.intervals(); ++k) u.values.push_back(VecX::Constant(1, a(rng)));
  auto rev = u;
  std::reverse(rev.values.begin(), rev.values.end());
  EXPECT_NEAR(cost_lower(u), cost_lower(rev), 1e-10);
}

TEST(H5, CaseStudyBracket) {
  const auto sc = twodisk();
  const auto r = solve_twodisk_parametric(sc);
  const auto samples = contact_samples(r.solution.y, r.solution.x);
  ASSERT_FALSE(samples.empty());
  const auto b = h5_bounds(sc, samples);
  const int lead = r.params.lead;
  EXPECT_NEAR(b[static_cast<std::size_t>(lead)].M_bar, 10.0 * std::sqrt(2.0), 1e-6);
  // Strongest lower bound comes from the sample nearest the exit (smallest offset γ).
  double gmin = std::numeric_limits<double>::infinity();
  for (const auto& s : samples) {
    if (s.participant == lead) gmin = std::min(gmin, s.x.dot(exit_direction()));
  }
  EXPECT_NEAR(b[static_cast<std::size_t>(lead)].m_bar, -8.0 * std::max(gmin, 0.0) - 10.0 * std::sqrt(2.0), 1e-6);
  for (int i = 0; i < 2; ++i) EXPECT_TRUE(b[static_cast<std::size_t>(i)].brackets(6.0));
}

TEST(H5, FrozenDataCollapses) {
  Participant p = free_walker(Vec2::Zero());
  p.drift = DriftSpec::affine(Mat2::Zero(), MatX::Identity(2, 2), Vec2::Zero());
  p.U = ControlSet::ball(0.0);
  p.V = ControlSet::ball(0.0);
  const auto sc = single(p);
  const auto b = h5_bounds(sc, {{0, Vec2(3.0, 0.0), Vec2::Zero()}, {0, Vec2(0.0, -3.0), Vec2::Zero()}});
  EXPECT_NEAR(b[0].M_bar, 0.0, 1e-15);
  EXPECT_NEAR(b[0].m_bar, 0.0, 1e-15);
}

TEST(H5, EmptySampleSetRejected) {
  const auto sc = twodisk();
  EXPECT_THROW(h5_bounds(sc, {}), Error);
}
