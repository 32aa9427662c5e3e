#pragma once

// Scenario files, trajectory tables and run summaries.
//
// Scenario files are JSON. Any numeric field may be written as a number or as
// an expression string such as "48+3*sqrt(2)" (operators + - * / ^, parentheses,
// sqrt, pi). Unknown keys are rejected.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sweep/bilevel.hpp"
#include "sweep/nco.hpp"

namespace sweep::io {

using json = nlohmann::ordered_json;

// ---- expressions ----

namespace detail {

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : s_(text) {}

  double run() {
    const double v = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character '" + std::string(1, s_[pos_]) + "'");
    return v;
  }

 private:
  std::string_view s_;
  std::size_t pos_{0};

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorKind::Parse, "expression \"" + std::string(s_) + "\" at offset " + std::to_string(pos_) + ": " + msg);
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  double expr() {
    double v = term();
    for (;;) {
      if (eat('+')) v += term();
      else if (eat('-')) v -= term();
      else return v;
    }
  }
  double term() {
    double v = unary();
    for (;;) {
      if (eat('*')) v *= unary();
      else if (eat('/')) v /= unary();
      else return v;
    }
  }
  double unary() {
    if (eat('-')) return -unary();
    if (eat('+')) return unary();
    const double base = primary();
    if (eat('^')) return std::pow(base, unary());
    return base;
  }
  double primary() {
    skip();
    if (eat('(')) {
      const double v = expr();
      if (!eat(')')) fail("missing ')'");
      return v;
    }
    if (pos_ < s_.size() && std::isalpha(static_cast<unsigned char>(s_[pos_]))) {
      std::size_t end = pos_;
      while (end < s_.size() && std::isalnum(static_cast<unsigned char>(s_[end]))) ++end;
      const std::string name(s_.substr(pos_, end - pos_));
      pos_ = end;
      if (name == "pi") return M_PI;
      if (name == "sqrt") {
        if (!eat('(')) fail("sqrt needs '('");
        const double v = expr();
        if (!eat(')')) fail("missing ')'");
        if (v < 0.0) fail("sqrt of a negative value");
        return std::sqrt(v);
      }
      fail("unknown name '" + name + "'");
    }
    const char* begin = s_.data() + pos_;
    char* end = nullptr;
    const std::string tail(begin, s_.size() - pos_);
    const double v = std::strtod(tail.c_str(), &end);
    if (end == tail.c_str()) fail("expected a number");
    pos_ += static_cast<std::size_t>(end - tail.c_str());
    return v;
  }
};

}  // namespace detail

inline double eval_expression(std::string_view text) { return detail::ExprParser(text).run(); }

// ---- scenario parsing ----

namespace detail {

[[noreturn]] inline void field_error(const std::string& path, const std::string& msg) {
  throw Error(ErrorKind::Parse, "field '" + path + "': " + msg);
}

inline void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) field_error(path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) field_error(path.empty() ? k : path + "." + k, "unknown key");
  }
}

inline const json& need(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) field_error(path.empty() ? key : path + "." + key, "missing");
  return j.at(key);
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

inline double number(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return eval_expression(j.get<std::string>());
    } catch (const Error& e) {
      field_error(path, e.detail());
    }
  }
  field_error(path, "expected a number or expression string");
}

inline VecX vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) field_error(path, "expected a nonempty array");
  VecX v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<Eigen::Index>(k)] = number(j[k], path + "[" + std::to_string(k) + "]");
  return v;
}

inline Vec2 vec2(const json& j, const std::string& path) {
  const VecX v = vector(j, path);
  if (v.size() != 2) field_error(path, "expected 2 entries");
  return v;
}

inline VecX scalar_or_vector(const json& j, const std::string& path) {
  if (j.is_array()) return vector(j, path);
  VecX v(1);
  v[0] = number(j, path);
  return v;
}

inline MatX matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) field_error(path, "expected an array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].empty()) field_error(path + "[" + std::to_string(r) + "]", "expected a nonempty row");
    if (r == 0) cols = j[r].size();
    if (j[r].size() != cols) field_error(path, "ragged rows");
  }
  MatX m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          number(j[r][c], path + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    }
  }
  return m;
}

inline std::string string_field(const json& j, const std::string& path) {
  if (!j.is_string()) field_error(path, "expected a string");
  return j.get<std::string>();
}

inline DriftSpec parse_drift(const json& j, const std::string& path) {
  allow_keys(j, path, {"family", "params"});
  const std::string fam = string_field(need(j, path, "family"), join(path, "family"));
  const std::string pp = join(path, "params");
  const json& p = need(j, path, "params");
  if (fam == "scaled_linear") {
    allow_keys(p, pp, {"c"});
    return DriftSpec::scaled_linear(number(need(p, pp, "c"), join(pp, "c")));
  }
  if (fam == "affine") {
    allow_keys(p, pp, {"A", "B", "b"});
    const MatX A = matrix(need(p, pp, "A"), join(pp, "A"));
    if (A.rows() != 2 || A.cols() != 2) field_error(join(pp, "A"), "expected a 2x2 matrix");
    const MatX B = matrix(need(p, pp, "B"), join(pp, "B"));
    if (B.rows() != 2) field_error(join(pp, "B"), "expected 2 rows");
    const Vec2 b = p.contains("b") ? vec2(p.at("b"), join(pp, "b")) : Vec2::Zero();
    return DriftSpec::affine(A, B, b);
  }
  field_error(join(path, "family"), "unknown drift family '" + fam + "'");
}

inline ControlSet parse_set(const json& j, const std::string& path) {
  allow_keys(j, path, {"shape", "params"});
  const std::string shape = string_field(need(j, path, "shape"), join(path, "shape"));
  const std::string pp = join(path, "params");
  const json& p = need(j, path, "params");
  try {
    if (shape == "interval") {
      allow_keys(p, pp, {"lo", "hi"});
      const VecX lo = scalar_or_vector(need(p, pp, "lo"), join(pp, "lo"));
      const VecX hi = scalar_or_vector(need(p, pp, "hi"), join(pp, "hi"));
      return ControlSet::interval(lo, hi);
    }
    if (shape == "segment") {
      allow_keys(p, pp, {"direction", "halflength"});
      return ControlSet::segment(vec2(need(p, pp, "direction"), join(pp, "direction")),
                                 number(need(p, pp, "halflength"), join(pp, "halflength")));
    }
    if (shape == "ball") {
      allow_keys(p, pp, {"radius", "dim"});
      int dim = 2;
      if (p.contains("dim")) {
        if (!p.at("dim").is_number_integer()) field_error(join(pp, "dim"), "expected an integer");
        dim = p.at("dim").get<int>();
      }
      return ControlSet::ball(number(need(p, pp, "radius"), join(pp, "radius")), dim);
    }
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::Parse) throw;
    field_error(path, e.detail());
  }
  field_error(join(path, "shape"), "unknown set shape '" + shape + "'");
}

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1;
  int col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

inline Scenario parse_scenario_text(const std::string& text, const std::string& source = "<string>") {
  using namespace detail;
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw Error(ErrorKind::Parse, source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
  try {
    allow_keys(root, "", {"meta", "problem", "participants", "solver"});
    Scenario sc;
    if (root.contains("meta")) {
      allow_keys(root.at("meta"), "meta", {"name"});
      if (root.at("meta").contains("name")) sc.name = string_field(root.at("meta").at("name"), "meta.name");
    }
    const json& prob = need(root, "", "problem");
    allow_keys(prob, "problem", {"N", "R", "T"});
    sc.R = number(need(prob, "problem", "R"), "problem.R");
    sc.T = number(need(prob, "problem", "T"), "problem.T");
    const json& parts = need(root, "", "participants");
    if (!parts.is_array()) field_error("participants", "expected an array");
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::string path = "participants[" + std::to_string(i) + "]";
      const json& pj = parts[i];
      allow_keys(pj, path, {"y0", "x0", "drift", "U", "V", "M", "rho"});
      Participant p;
      p.y0 = vec2(need(pj, path, "y0"), path + ".y0");
      const json& x0 = need(pj, path, "x0");
      if (x0.is_string()) {
        if (x0.get<std::string>() != "free") field_error(path + ".x0", "expected a 2-vector or \"free\"");
        p.x0.reset();
      } else {
        p.x0 = vec2(x0, path + ".x0");
      }
      p.drift = parse_drift(need(pj, path, "drift"), path + ".drift");
      p.U = parse_set(need(pj, path, "U"), path + ".U");
      p.V = parse_set(need(pj, path, "V"), path + ".V");
      p.M = number(need(pj, path, "M"), path + ".M");
      if (pj.contains("rho")) p.rho = number(pj.at("rho"), path + ".rho");
      sc.participants.push_back(std::move(p));
    }
    if (prob.contains("N")) {
      const json& n = prob.at("N");
      if (!n.is_number_integer() || n.get<long long>() != static_cast<long long>(sc.participants.size())) {
        field_error("problem.N", "must equal the number of participants (" + std::to_string(sc.participants.size()) + ")");
      }
    }
    if (root.contains("solver")) {
      const json& s = root.at("solver");
      allow_keys(s, "solver", {"grid_K", "h", "seed", "tol", "penalty_k"});
      if (s.contains("grid_K")) {
        if (!s.at("grid_K").is_number_integer()) field_error("solver.grid_K", "expected an integer");
        sc.solver.grid_K = s.at("grid_K").get<int>();
      }
      if (s.contains("h")) sc.solver.h = number(s.at("h"), "solver.h");
      if (s.contains("seed")) {
        if (!s.at("seed").is_number_unsigned()) field_error("solver.seed", "expected a nonnegative integer");
        sc.solver.seed = s.at("seed").get<unsigned>();
      }
      if (s.contains("tol")) sc.solver.tol = number(s.at("tol"), "solver.tol");
      if (s.contains("penalty_k")) sc.solver.penalty_k = number(s.at("penalty_k"), "solver.penalty_k");
    }
    sc.validate();
    return sc;
  } catch (const Error& e) {
    throw Error(e.kind(), source + ": " + e.detail());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Parse, path + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Scenario parse_scenario(const std::string& path) { return parse_scenario_text(read_file(path), path); }

// ---- scenario serialization ----

namespace detail {

inline json to_json(const VecX& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

inline json to_json(const MatX& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(to_json(VecX(m.row(r).transpose())));
  return a;
}

inline json to_json(const ControlSet& s) {
  json j;
  j["shape"] = s.shape_name();
  switch (s.shape()) {
    case ControlSet::Shape::interval:
      j["params"] = {{"lo", to_json(s.lo())}, {"hi", to_json(s.hi())}};
      break;
    case ControlSet::Shape::segment:
      j["params"] = {{"direction", to_json(VecX(s.direction()))}, {"halflength", s.halflength()}};
      break;
    case ControlSet::Shape::ball:
      j["params"] = {{"radius", s.radius()}, {"dim", s.dim()}};
      break;
  }
  return j;
}

inline json to_json(const DriftSpec& d) {
  if (d.family == DriftSpec::Family::scaled_linear) return {{"family", "scaled_linear"}, {"params", {{"c", d.c}}}};
  return {{"family", "affine"}, {"params", {{"A", to_json(MatX(d.A))}, {"B", to_json(d.B)}, {"b", to_json(VecX(d.b))}}}};
}

}  // namespace detail

inline json scenario_json(const Scenario& sc) {
  using detail::to_json;
  json root;
  root["meta"] = {{"name", sc.name}};
  root["problem"] = {{"N", sc.N()}, {"R", sc.R}, {"T", sc.T}};
  json parts = json::array();
  for (const auto& p : sc.participants) {
    json pj;
    pj["y0"] = to_json(VecX(p.y0));
    pj["x0"] = p.x0 ? to_json(VecX(*p.x0)) : json("free");
    pj["drift"] = to_json(p.drift);
    pj["U"] = to_json(p.U);
    pj["V"] = to_json(p.V);
    pj["M"] = p.M;
    pj["rho"] = p.rho;
    parts.push_back(pj);
  }
  root["participants"] = parts;
  root["solver"] = {{"grid_K", sc.solver.grid_K},
                    {"h", sc.solver.h},
                    {"seed", sc.solver.seed},
                    {"tol", sc.solver.tol},
                    {"penalty_k", sc.solver.penalty_k}};
  return root;
}

// Canonical text; parsing it back gives an identical Scenario.
inline std::string serialize_scenario(const Scenario& sc) { return scenario_json(sc).dump(2) + "\n"; }

inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string scenario_hash(const Scenario& sc) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_scenario(sc))));
  return buf;
}

// ---- numbers and files ----

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// Value rounded to 12 significant digits, for structured output.
inline double round12(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(fmt(v).c_str(), nullptr);
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Validation, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorKind::Validation, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

// ---- trajectory tables ----
//
// Columns: t, y{i}_1, y{i}_2 (all i), x{i}_1, x{i}_2 (all i), u{i}_{c} (all i, c),
// v{i}_1, v{i}_2 (all i), contact{i} (all i). Participants are 1-based. The
// controls on row k act on [t_k, t_{k+1}); the last row repeats the final controls.

inline std::string trajectory_csv(const Trajectory& y, const Trajectory& x, const Controls& u, const Controls& v) {
  const int N = y.N();
  const int nodes = y.nodes();
  std::ostringstream out;
  out << "t";
  for (int i = 1; i <= N; ++i) out << ",y" << i << "_1,y" << i << "_2";
  for (int i = 1; i <= N; ++i) out << ",x" << i << "_1,x" << i << "_2";
  for (int i = 1; i <= N; ++i) {
    for (int c = 1; c <= u[static_cast<std::size_t>(i - 1)].dim(); ++c) out << ",u" << i << "_" << c;
  }
  for (int i = 1; i <= N; ++i) out << ",v" << i << "_1,v" << i << "_2";
  for (int i = 1; i <= N; ++i) out << ",contact" << i;
  out << "\n";
  for (int k = 0; k < nodes; ++k) {
    const int kc = std::min(k, nodes - 2);
    out << fmt(y.grid.time(k));
    for (int i = 0; i < N; ++i) out << "," << fmt(y.at(k, i)[0]) << "," << fmt(y.at(k, i)[1]);
    for (int i = 0; i < N; ++i) out << "," << fmt(x.at(k, i)[0]) << "," << fmt(x.at(k, i)[1]);
    for (int i = 0; i < N; ++i) {
      const VecX& uk = u[static_cast<std::size_t>(i)][kc];
      for (Eigen::Index c = 0; c < uk.size(); ++c) out << "," << fmt(uk[c]);
    }
    for (int i = 0; i < N; ++i) {
      const VecX& vk = v[static_cast<std::size_t>(i)][kc];
      out << "," << fmt(vk[0]) << "," << fmt(vk[1]);
    }
    for (int i = 0; i < N; ++i) out << "," << (x.in_contact(k, i) ? 1 : 0);
    out << "\n";
  }
  return out.str();
}

inline std::string trajectory_csv(const BilevelSolution& s) { return trajectory_csv(s.y, s.x, s.u, s.v); }

struct ControlFile {
  Controls u;
  Controls v;
  std::vector<Vec2> x0;  // from the first row when x columns are present, else empty
};

// Reads controls (and optionally x(0)) back from a trajectory table.
inline ControlFile read_controls_csv(const std::string& text, const Scenario& sc, const std::string& source = "<controls>") {
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::stringstream ss(l);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    return cells;
  };
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, source + ":1: empty controls file");
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
  auto find = [&](const std::string& name) {
    const auto it = col.find(name);
    if (it == col.end()) throw Error(ErrorKind::Parse, source + ":1: missing column '" + name + "'");
    return it->second;
  };
  const std::size_t tcol = find("t");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorKind::Parse, source + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) + " fields");
    }
    std::vector<double> row;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      char* end = nullptr;
      const double v = std::strtod(cells[c].c_str(), &end);
      if (end == cells[c].c_str() || *end != '\0') {
        throw Error(ErrorKind::Parse, source + ":" + std::to_string(lineno) + ": field '" + header[c] + "' is not a number");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw Error(ErrorKind::Parse, source + ": need at least two rows");
  Grid g;
  for (const auto& r : rows) g.t.push_back(r[tcol]);
  g.validate();
  const int K = static_cast<int>(rows.size()) - 1;
  ControlFile out;
  for (int i = 1; i <= sc.N(); ++i) {
    const int m = sc.at(i - 1).drift.control_dim();
    std::vector<std::size_t> uc;
    for (int c = 1; c <= m; ++c) uc.push_back(find("u" + std::to_string(i) + "_" + std::to_string(c)));
    const std::size_t v1 = find("v" + std::to_string(i) + "_1");
    const std::size_t v2 = find("v" + std::to_string(i) + "_2");
    ControlProfile up{g, {}};
    ControlProfile vp{g, {}};
    for (int k = 0; k < K; ++k) {
      const auto& r = rows[static_cast<std::size_t>(k)];
      VecX uk(m);
      for (int c = 0; c < m; ++c) uk[c] = r[uc[static_cast<std::size_t>(c)]];
      up.values.push_back(uk);
      vp.values.push_back(Vec2(r[v1], r[v2]));
    }
    out.u.push_back(std::move(up));
    out.v.push_back(std::move(vp));
  }
  bool have_x = true;
  for (int i = 1; i <= sc.N(); ++i) have_x = have_x && col.count("x" + std::to_string(i) + "_1") && col.count("x" + std::to_string(i) + "_2");
  if (have_x) {
    for (int i = 1; i <= sc.N(); ++i) {
      out.x0.emplace_back(rows[0][col["x" + std::to_string(i) + "_1"]], rows[0][col["x" + std::to_string(i) + "_2"]]);
    }
  }
  return out;
}

// ---- summaries ----

inline json vec_json(const Vec2& v) { return json::array({round12(v[0]), round12(v[1])}); }

inline json audit_json(const FeasibilityReport& a) {
  auto viol = [](const Violation& v) {
    return json{{"value", round12(v.value)}, {"time", round12(v.time)}, {"participant", v.participant}};
  };
  return {{"overlap", viol(a.overlap)},
          {"confinement", viol(a.confinement)},
          {"control_U", viol(a.control_U)},
          {"control_V", viol(a.control_V)},
          {"worst", round12(a.worst())},
          {"ok", a.ok()}};
}

inline json solution_json(const Scenario& sc, const BilevelSolution& s) {
  json j;
  j["method"] = s.method;
  j["J_H"] = round12(s.J_H);
  json jl = json::array();
  for (double v : s.J_L) jl.push_back(round12(v));
  j["J_L"] = jl;
  json phi = json::array();
  for (double v : s.phi) phi.push_back(round12(v));
  j["phi"] = phi;
  json term = json::array();
  for (int i = 0; i < sc.N(); ++i) term.push_back({{"y", vec_json(s.y.terminal(i))}, {"x", vec_json(s.x.terminal(i))}});
  j["terminal"] = term;
  j["audit"] = audit_json(s.audit);
  return j;
}

inline json nco_json(const NCOReport& r) {
  json j;
  j["family"] = r.family;
  j["tol"] = round12(r.tol);
  j["q_L_sup"] = round12(r.q_L_sup);
  json items = json::array();
  for (const auto& it : r.items()) items.push_back({{"condition", it.name}, {"residual", round12(it.residual)}, {"pass", it.pass}});
  j["conditions"] = items;
  j["max_lower_at"] = {{"time", round12(r.max_lower.time)}, {"participant", r.max_lower.participant}};
  j["max_upper_at"] = {{"time", round12(r.max_upper.time)}, {"participant", r.max_upper.participant}};
  j["notes"] = r.notes;
  j["pass"] = r.all_pass();
  return j;
}

}  // namespace sweep::io
