#pragma once

#include <vector>

#include "sweep/geometry.hpp"

namespace sweep {

struct Grid {
  std::vector<double> t;

  static Grid uniform(double T, int K) {
    if (K < 1 || !(T > 0.0)) throw Error(ErrorKind::Validation, "uniform grid needs K >= 1 and T > 0");
    Grid g;
    g.t.resize(static_cast<std::size_t>(K) + 1);
    for (int k = 0; k <= K; ++k) g.t[static_cast<std::size_t>(k)] = T * static_cast<double>(k) / K;
    g.t.back() = T;
    return g;
  }

  [[nodiscard]] int intervals() const { return static_cast<int>(t.size()) - 1; }
  [[nodiscard]] double step(int k) const { return t[static_cast<std::size_t>(k) + 1] - t[static_cast<std::size_t>(k)]; }
  [[nodiscard]] double time(int k) const { return t[static_cast<std::size_t>(k)]; }
  [[nodiscard]] double horizon() const { return t.back(); }

  // Interval index containing s, with [t_k, t_{k+1}) and the last interval closed.
  [[nodiscard]] int locate(double s) const {
    const int K = intervals();
    int lo = 0;
    int hi = K;
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (t[static_cast<std::size_t>(mid)] <= s) lo = mid; else hi = mid;
    }
    return std::min(lo, K - 1);
  }

  void validate() const {
    if (t.size() < 2) throw Error(ErrorKind::Validation, "grid needs at least one interval");
    for (std::size_t k = 1; k < t.size(); ++k) {
      if (!(t[k] > t[k - 1])) throw Error(ErrorKind::Validation, "grid must be strictly increasing");
    }
  }

  bool operator==(const Grid&) const = default;
};

// Piecewise-constant control: values[k] applies on [t_k, t_{k+1}).
struct ControlProfile {
  Grid grid;
  std::vector<VecX> values;

  static ControlProfile constant(const Grid& g, const VecX& value) {
    return {g, std::vector<VecX>(static_cast<std::size_t>(g.intervals()), value)};
  }

  [[nodiscard]] const VecX& operator[](int k) const { return values[static_cast<std::size_t>(k)]; }
  [[nodiscard]] VecX& operator[](int k) { return values[static_cast<std::size_t>(k)]; }
  [[nodiscard]] int intervals() const { return static_cast<int>(values.size()); }
  [[nodiscard]] int dim() const { return values.empty() ? 0 : static_cast<int>(values.front().size()); }
  [[nodiscard]] const VecX& at_time(double s) const { return (*this)[grid.locate(s)]; }

  // Resample onto a finer grid by evaluating at the midpoint of each target cell.
  [[nodiscard]] ControlProfile resampled(const Grid& target) const {
    ControlProfile out{target, {}};
    out.values.reserve(static_cast<std::size_t>(target.intervals()));
    for (int k = 0; k < target.intervals(); ++k) out.values.push_back(at_time(0.5 * (target.time(k) + target.time(k + 1))));
    return out;
  }
};

using Controls = std::vector<ControlProfile>;  // one profile per participant

// Sampled path of N planar states: states[k] stacks the N 2-vectors at t_k.
struct Trajectory {
  Grid grid;
  std::vector<VecX> states;
  std::vector<std::vector<char>> contact;  // contact[i][k]; empty for upper-level paths

  [[nodiscard]] int N() const { return states.empty() ? 0 : static_cast<int>(states.front().size() / 2); }
  [[nodiscard]] int nodes() const { return static_cast<int>(states.size()); }
  [[nodiscard]] Vec2 at(int k, int i) const { return states[static_cast<std::size_t>(k)].segment<2>(2 * i); }
  [[nodiscard]] Vec2 terminal(int i) const { return at(nodes() - 1, i); }
  [[nodiscard]] bool in_contact(int k, int i) const {
    return !contact.empty() && contact[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] != 0;
  }

  // Linear interpolation of participant i at time s.
  [[nodiscard]] Vec2 interpolate(int i, double s) const {
    const int k = grid.locate(s);
    const double w = std::clamp((s - grid.time(k)) / grid.step(k), 0.0, 1.0);
    return (1.0 - w) * at(k, i) + w * at(k + 1, i);
  }

  [[nodiscard]] std::vector<Vec2> terminal_states() const {
    std::vector<Vec2> out;
    for (int i = 0; i < N(); ++i) out.push_back(terminal(i));
    return out;
  }
};

}  // namespace sweep
