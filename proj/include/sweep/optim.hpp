#pragma once

// Small derivative-free optimizers on the unit box: Nelder-Mead with clamping,
// compass search, golden section, and Halton points for multi-start seeds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "sweep/geometry.hpp"

namespace sweep::optim {

using Objective = std::function<double(const VecX&)>;

struct Result {
  VecX x;
  double value{0.0};
  int evaluations{0};
};

inline VecX clamp_unit(const VecX& x) { return x.cwiseMax(0.0).cwiseMin(1.0); }

struct NelderMeadOptions {
  double initial_step{0.1};
  double ftol{1e-9};
  double xtol{1e-7};
  int max_evaluations{2000};
};

inline Result nelder_mead(const Objective& f, const VecX& start, const NelderMeadOptions& opt = {}) {
  const auto n = start.size();
  std::vector<VecX> pts;
  std::vector<double> vals;
  int evals = 0;
  auto eval = [&](const VecX& x) {
    ++evals;
    return f(x);
  };
  pts.push_back(clamp_unit(start));
  vals.push_back(eval(pts[0]));
  for (Eigen::Index j = 0; j < n; ++j) {
    VecX p = pts[0];
    p[j] += (p[j] + opt.initial_step <= 1.0) ? opt.initial_step : -opt.initial_step;
    pts.push_back(clamp_unit(p));
    vals.push_back(eval(pts.back()));
  }
  std::vector<std::size_t> order(pts.size());
  while (evals < opt.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    double spread = 0.0;
    for (const auto& p : pts) spread = std::max(spread, (p - pts[best]).cwiseAbs().maxCoeff());
    if (std::abs(vals[worst] - vals[best]) <= opt.ftol * (1.0 + std::abs(vals[best])) && spread <= opt.xtol) break;
    if (spread <= opt.xtol * 1e-3) break;
    VecX centroid = VecX::Zero(n);
    for (std::size_t i = 0; i < pts.size(); ++i) if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(n);
    const VecX xr = clamp_unit(centroid + (centroid - pts[worst]));
    const double fr = eval(xr);
    if (fr < vals[best]) {
      const VecX xe = clamp_unit(centroid + 2.0 * (centroid - pts[worst]));
      const double fe = eval(xe);
      if (fe < fr) { pts[worst] = xe; vals[worst] = fe; } else { pts[worst] = xr; vals[worst] = fr; }
      continue;
    }
    if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr < vals[worst];
    const VecX xc = outside ? VecX(centroid + 0.5 * (xr - centroid)) : VecX(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(xc);
    if (fc < std::min(fr, vals[worst])) {
      pts[worst] = xc;
      vals[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = eval(pts[i]);
    }
  }
  const auto it = std::min_element(vals.begin(), vals.end());
  return {pts[static_cast<std::size_t>(it - vals.begin())], *it, evals};
}

struct CompassOptions {
  double initial_step{0.125};
  double min_step{1e-4};
  int max_evaluations{4000};
};

// Coordinate pattern search on the unit box; accepts strict improvements only.
inline Result compass_search(const Objective& f, const VecX& start, const CompassOptions& opt = {}) {
  Result r{clamp_unit(start), 0.0, 1};
  r.value = f(r.x);
  double step = opt.initial_step;
  while (step >= opt.min_step && r.evaluations < opt.max_evaluations) {
    bool improved = false;
    for (Eigen::Index j = 0; j < r.x.size() && r.evaluations < opt.max_evaluations; ++j) {
      for (const double sgn : {1.0, -1.0}) {
        VecX c = r.x;
        c[j] = std::clamp(c[j] + sgn * step, 0.0, 1.0);
        if (c[j] == r.x[j]) continue;
        const double fc = f(c);
        ++r.evaluations;
        if (fc < r.value) {
          r.x = c;
          r.value = fc;
          improved = true;
          break;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return r;
}

// Golden-section minimization of a unimodal function on [a, b] down to the given bracket width.
inline double golden_section(const std::function<double(double)>& f, double a, double b, double width) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > width) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

inline double radical_inverse(std::uint64_t index, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % static_cast<std::uint64_t>(base));
    index /= static_cast<std::uint64_t>(base);
    f *= inv;
  }
  return r;
}

// Halton point `index` (1-based is customary) in [0,1)^dim; the seed rotates each coordinate (Cranley-Patterson).
inline VecX halton(std::uint64_t index, int dim, unsigned seed = 0) {
  static constexpr int primes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
                                   101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
                                   197, 199, 211, 223, 227, 229};
  constexpr int count = static_cast<int>(sizeof(primes) / sizeof(primes[0]));
  VecX x(dim);
  for (int j = 0; j < dim; ++j) {
    double v = radical_inverse(index, primes[j % count]);
    if (j >= count) v = std::fmod(v + 0.5 * radical_inverse(index + static_cast<std::uint64_t>(j), 2), 1.0);
    if (seed != 0) v = std::fmod(v + radical_inverse(static_cast<std::uint64_t>(seed) * 7919u + static_cast<std::uint64_t>(j) + 1u, 3), 1.0);
    x[j] = v;
  }
  return x;
}

}  // namespace sweep::optim
