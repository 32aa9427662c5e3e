#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace sweep;
using namespace sweep::testing;

namespace {

const char* kResting = R"({
  "meta": {"name": "resting"},
  "problem": {"N": 1, "R": 2, "T": 1},
  "participants": [
    {
      "y0": [0, 0],
      "x0": [1, 0],
      "drift": {"family": "scaled_linear", "params": {"c": -1}},
      "U": {"shape": "interval", "params": {"lo": 0, "hi": 1}},
      "V": {"shape": "ball", "params": {"radius": 1}},
      "M": 2
    }
  ],
  "solver": {"h": 0.125}
})";

std::string with(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  if (pos != std::string::npos) text.replace(pos, from.size(), to);
  return text;
}

Error parse_error(const std::string& text) {
  try {
    io::parse_scenario_text(text, "case");
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "expected the scenario to be rejected";
  return Error(ErrorKind::Validation, "none");
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "sweep_io_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(Expression, Arithmetic) {
  EXPECT_DOUBLE_EQ(io::eval_expression("1+2*3"), 7.0);
  EXPECT_DOUBLE_EQ(io::eval_expression("(1+2)*3"), 9.0);
  EXPECT_DOUBLE_EQ(io::eval_expression("2^3^2"), 512.0);
  EXPECT_DOUBLE_EQ(io::eval_expression("-48-3*sqrt(2)"), -48.0 - 3.0 * std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(io::eval_expression("pi/2"), M_PI / 2.0);
  EXPECT_DOUBLE_EQ(io::eval_expression(" 10 * sqrt( 2 ) "), 10.0 * std::sqrt(2.0));
}

TEST(Expression, RejectsGarbage) {
  for (const char* bad : {"", "1+", "sqrt(2", "foo", "1 2", "2*/3"}) {
    EXPECT_THROW(io::eval_expression(bad), Error) << bad;
  }
}

TEST(Scenario, TwoDiskLoads) {
  const auto sc = io::parse_scenario(scenario_path("twodisk.scn"));
  ASSERT_EQ(sc.N(), 2);
  EXPECT_EQ(sc.name, "twodisk");
  EXPECT_DOUBLE_EQ(sc.R, 3.0);
  EXPECT_DOUBLE_EQ(sc.T, 6.0);
  // The two disks start tangent.
  EXPECT_NEAR((sc.at(0).y0 - sc.at(1).y0).norm(), 2.0 * sc.R, 1e-12);
  EXPECT_EQ(sc.at(0).U.shape(), ControlSet::Shape::interval);
  EXPECT_EQ(sc.at(1).V.shape(), ControlSet::Shape::segment);
  EXPECT_NEAR((sc.at(1).V.direction() - exit_direction()).norm(), 0.0, 1e-15);
  EXPECT_EQ(sc.solver.grid_K, 8);
  EXPECT_EQ(sc.solver.seed, 0u);
}

TEST(Scenario, RoundTrip) {
  const auto sc = io::parse_scenario(scenario_path("twodisk.scn"));
  const std::string text = io::serialize_scenario(sc);
  const auto back = io::parse_scenario_text(text);
  EXPECT_EQ(back, sc);
  EXPECT_EQ(io::serialize_scenario(back), text);
  EXPECT_EQ(io::scenario_hash(back), io::scenario_hash(sc));

  const auto rest = io::parse_scenario_text(kResting);
  EXPECT_EQ(io::parse_scenario_text(io::serialize_scenario(rest)), rest);
}

TEST(Scenario, HashIsStableAndSensitive) {
  const auto a = io::parse_scenario_text(kResting);
  const auto b = io::parse_scenario_text(kResting);
  EXPECT_EQ(io::scenario_hash(a), io::scenario_hash(b));
  EXPECT_EQ(io::scenario_hash(a).size(), 16u);
  const auto c = io::parse_scenario_text(with(kResting, "\"M\": 2", "\"M\": 3"));
  EXPECT_NE(io::scenario_hash(a), io::scenario_hash(c));
  EXPECT_EQ(io::fnv1a64(""), 0xcbf29ce484222325ull);
  EXPECT_EQ(io::fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Scenario, OverlapRejected) {
  std::string text = io::read_file(scenario_path("twodisk.scn"));
  text = with(text, "\"y0\": [-48, 48],\n      \"x0\": [-48, 48]", "\"y0\": [-49, 49],\n      \"x0\": [-49, 49]");
  const Error e = parse_error(text);
  EXPECT_EQ(e.kind(), ErrorKind::Validation);
  EXPECT_NE(std::string(e.what()).find("non-overlap"), std::string::npos) << e.what();
}

TEST(Scenario, InvariantViolationsRejected) {
  struct Case {
    std::string from, to, needle;
    ErrorKind kind;
  };
  const std::vector<Case> cases{
      {"\"M\": 2", "\"M\": 0", "M > 0", ErrorKind::Validation},
      {"\"R\": 2", "\"R\": -1", "R > 0", ErrorKind::Validation},
      {"\"x0\": [1, 0]", "\"x0\": [5, 0]", "confinement", ErrorKind::Validation},
      {"\"N\": 1", "\"N\": 2", "problem.N", ErrorKind::Parse},
      {"\"M\": 2", "\"M\": 2, \"speed\": 1", "participants[0].speed", ErrorKind::Parse},
      {"\"M\": 2", "\"M\": \"2+\"", "participants[0].M", ErrorKind::Parse},
      {"\"lo\": 0", "\"lo\": 0, \"mid\": 0.5", "participants[0].U", ErrorKind::Parse},
      {"\"x0\": [1, 0]", "\"x0\": \"nowhere\"", "participants[0].x0", ErrorKind::Parse},
      {"\"h\": 0.125", "\"h\": 0.125, \"iters\": 3", "solver.iters", ErrorKind::Parse},
  };
  for (const auto& c : cases) {
    const Error e = parse_error(with(kResting, c.from, c.to));
    EXPECT_EQ(e.kind(), c.kind) << c.to << ": " << e.what();
    EXPECT_NE(std::string(e.what()).find(c.needle), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("case"), std::string::npos) << e.what();
  }
}

TEST(Scenario, FreeInitialPoint) {
  const auto sc = io::parse_scenario_text(with(kResting, "\"x0\": [1, 0]", "\"x0\": \"free\""));
  EXPECT_FALSE(sc.at(0).x0.has_value());
  EXPECT_EQ(io::parse_scenario_text(io::serialize_scenario(sc)), sc);
}

TEST(Scenario, MalformedJsonReportsPosition) {
  const std::string text = "{\n  \"problem\": {\"N\": 1,,}\n}";
  const Error e = parse_error(text);
  EXPECT_EQ(e.kind(), ErrorKind::Parse);
  EXPECT_NE(std::string(e.what()).find("case:2:"), std::string::npos) << e.what();
}

TEST(Scenario, MissingFile) {
  try {
    io::parse_scenario(scenario_path("does_not_exist.scn"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
  }
}

TEST(Csv, RestingScenarioHasConstantColumns) {
  const auto sc = io::parse_scenario_text(kResting);
  const auto v = constant_controls(sc, {vec({0.0, 0.0})});
  const auto u = constant_controls(sc, {vec({0.0})});
  const auto sim = simulate(sc, v, u, {*sc.at(0).x0});
  const std::string csv = io::trajectory_csv(sim.y, sim.x, u, v);

  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,y1_1,y1_2,x1_1,x1_2,u1_1,v1_1,v1_2,contact1");
  int rows = 0;
  while (std::getline(in, line)) {
    std::ostringstream expect;
    expect << io::fmt(sc.T * rows / sc.steps()) << ",0,0,1,0,0,0,0,0";
    EXPECT_EQ(line, expect.str());
    ++rows;
  }
  EXPECT_EQ(rows, sc.steps() + 1);
}

TEST(Csv, ControlsReadBack) {
  const auto sc = twodisk(48);
  const auto cs = solve_twodisk_parametric(sc);
  const auto& s = cs.solution;
  const auto file = io::read_controls_csv(io::trajectory_csv(s), sc);
  ASSERT_EQ(file.u.size(), 2u);
  ASSERT_EQ(file.x0.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(file.u[static_cast<std::size_t>(i)].intervals(), s.u[static_cast<std::size_t>(i)].intervals());
    EXPECT_LE((file.x0[static_cast<std::size_t>(i)] - s.x.at(0, i)).norm(), 1e-9);
    for (int k = 0; k < s.y.grid.intervals(); ++k) {
      EXPECT_NEAR(file.u[static_cast<std::size_t>(i)][k][0], s.u[static_cast<std::size_t>(i)][k][0], 1e-11);
      EXPECT_LE((file.v[static_cast<std::size_t>(i)][k] - s.v[static_cast<std::size_t>(i)][k]).norm(), 1e-10);
    }
  }
  // Resimulating the reread controls reproduces the terminal positions.
  const auto again = simulate(sc, file.v, file.u, file.x0);
  for (int i = 0; i < 2; ++i) EXPECT_LE((again.y.at(again.y.nodes() - 1, i) - s.y.at(s.y.nodes() - 1, i)).norm(), 1e-8);
}

TEST(Csv, BadControlsRejected) {
  const auto sc = io::parse_scenario_text(kResting);
  EXPECT_THROW(io::read_controls_csv("", sc), Error);
  EXPECT_THROW(io::read_controls_csv("t,u1_1,v1_1,v1_2\n0,0,0,0\n", sc), Error);
  EXPECT_THROW(io::read_controls_csv("t,u1_1,v1_1\n0,0,0\n1,0,0\n", sc), Error);
  try {
    io::read_controls_csv("t,u1_1,v1_1,v1_2\n0,0,0,0\n1,x,0,0\n", sc, "ctl.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Parse);
    EXPECT_NE(std::string(e.what()).find("ctl.csv:3"), std::string::npos) << e.what();
  }
}

TEST(Output, RepeatedRunsAreByteIdentical) {
  const auto sc = twodisk(96);
  const std::string a = io::trajectory_csv(solve_twodisk_parametric(sc).solution);
  const std::string b = io::trajectory_csv(solve_twodisk_parametric(sc).solution);
  EXPECT_EQ(a, b);
  EXPECT_EQ(io::solution_json(sc, solve_twodisk_parametric(sc).solution).dump(2), io::solution_json(sc, solve_twodisk_parametric(sc).solution).dump(2));
}

TEST(Output, AtomicWriteReplaces) {
  const auto path = scratch("out.txt");
  io::atomic_write(path, "first\n");
  io::atomic_write(path, "second\n");
  EXPECT_EQ(io::read_file(path.string()), "second\n");
  EXPECT_FALSE(std::filesystem::exists(path.string() + ".tmp"));
}

TEST(Output, Rounding) {
  EXPECT_EQ(io::fmt(0.1 + 0.2), "0.3");
  EXPECT_EQ(io::fmt(-48.0), "-48");
  EXPECT_DOUBLE_EQ(io::round12(1.0 / 3.0), 0.333333333333);
}
