#pragma once

// Multiplier containers for the optimality system and the two Hamiltonians.
// Costates are nodal (K+1 values). BV multipliers hold one value per interval
// (right-continuous on [t_k, t_{k+1})) plus a terminal value at index K.

#include <functional>
#include <string>
#include <vector>

#include "sweep/dynamics.hpp"

namespace sweep {

// Symmetric nonnegative pairwise paths ν^{ij} = ν^{ji}, zero diagonal; only i < j is stored.
class PairwiseField {
 public:
  PairwiseField() = default;
  PairwiseField(int N, int nodes, double value = 0.0)
      : N_(N), paths_(static_cast<std::size_t>(N * (N - 1) / 2), std::vector<double>(static_cast<std::size_t>(nodes), value)) {}

  [[nodiscard]] int N() const { return N_; }
  [[nodiscard]] double operator()(int i, int j, int k) const {
    if (i == j) return 0.0;
    return paths_[index(i, j)][static_cast<std::size_t>(k)];
  }
  void set(int i, int j, int k, double value) {
    if (i == j) throw Error(ErrorKind::Validation, "pairwise multipliers have a zero diagonal");
    paths_[index(i, j)][static_cast<std::size_t>(k)] = value;
  }
  void fill(int i, int j, double value) {
    auto& p = paths_[index(i, j)];
    std::fill(p.begin(), p.end(), value);
  }
  [[nodiscard]] const std::vector<double>& path(int i, int j) const { return paths_[index(i, j)]; }

 private:
  [[nodiscard]] std::size_t index(int i, int j) const {
    if (i > j) std::swap(i, j);
    if (i < 0 || j >= N_) throw Error(ErrorKind::Dimension, "pairwise index out of range");
    return static_cast<std::size_t>(i * N_ - i * (i + 1) / 2 + (j - i - 1));
  }

  int N_{0};
  std::vector<std::vector<double>> paths_;
};

struct UpperMultipliers {
  std::vector<VecX> q_H;                  // K+1 nodal 2N-vectors
  std::vector<VecX> q_L;
  PairwiseField nu_H;                      // K+1 entries per pair
  std::vector<std::vector<double>> nu_L;   // [i][k], K+1 entries
  double lambda{0.0};
  VecX alpha;

  static UpperMultipliers zeros(int N, int K) {
    UpperMultipliers m;
    m.q_H.assign(static_cast<std::size_t>(K) + 1, VecX::Zero(2 * N));
    m.q_L = m.q_H;
    m.nu_H = PairwiseField(N, K + 1);
    m.nu_L.assign(static_cast<std::size_t>(N), std::vector<double>(static_cast<std::size_t>(K) + 1, 0.0));
    m.alpha = VecX::Zero(N);
    return m;
  }

  [[nodiscard]] int N() const { return static_cast<int>(nu_L.size()); }
  [[nodiscard]] int intervals() const { return static_cast<int>(q_H.size()) - 1; }
  [[nodiscard]] Vec2 qH(int k, int i) const { return q_H[static_cast<std::size_t>(k)].segment<2>(2 * i); }
  [[nodiscard]] Vec2 qL(int k, int i) const { return q_L[static_cast<std::size_t>(k)].segment<2>(2 * i); }
  [[nodiscard]] double nuL(int i, int k) const { return nu_L[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]; }

  // max over nodes and participants of max(‖q_H^i‖, ‖q_L^i‖).
  [[nodiscard]] double q_norm_inf() const {
    double m = 0.0;
    for (std::size_t k = 0; k < q_H.size(); ++k) {
      for (int i = 0; i < N(); ++i) m = std::max({m, q_H[k].segment<2>(2 * i).norm(), q_L[k].segment<2>(2 * i).norm()});
    }
    return m;
  }
};

// Witness of relation (A^i) for one participant.
struct LowerWitness {
  std::vector<Vec2> p_H;                   // K+1
  std::vector<Vec2> p_L;
  std::vector<std::vector<double>> mu_H;   // [j][k], K+1 entries; row i unused
  std::vector<double> mu_L;                // K+1
  double lambda_bar{0.0};
  std::vector<Vec2> zeta;                  // K, one per interval
  std::string family;
};

using LowerMultipliers = std::vector<LowerWitness>;

// Point values of the pairwise unit vectors (y^i − y^j)/‖y^i − y^j‖ weighted by a multiplier row.
inline Vec2 pairwise_unit_sum(const std::vector<Vec2>& y, int i, const std::function<double(int)>& weight) {
  Vec2 acc = Vec2::Zero();
  for (int j = 0; j < static_cast<int>(y.size()); ++j) {
    if (j == i) continue;
    const double w = weight(j);
    if (w != 0.0) acc += w * unit_offset(y[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(j)]);
  }
  return acc;
}

// H_H at one time point; vectors stack the N participants.
inline double hamiltonian_upper(const Scenario& sc, const VecX& y, const VecX& x, const VecX& v, const std::vector<VecX>& u,
                                const VecX& qH, const VecX& qL, const MatX& nuH, const VecX& nuL, const VecX& alpha) {
  const int N = sc.N();
  std::vector<Vec2> ys;
  for (int i = 0; i < N; ++i) ys.push_back(y.segment<2>(2 * i));
  double H = 0.0;
  for (int i = 0; i < N; ++i) {
    const auto& p = sc.at(i);
    const Vec2 d = x.segment<2>(2 * i) - ys[static_cast<std::size_t>(i)];
    const Vec2 q = qL.segment<2>(2 * i);
    const Vec2 vi = v.segment<2>(2 * i);
    const VecX& ui = u[static_cast<std::size_t>(i)];
    H += (q - nuL[i] * d).dot(p.drift(x.segment<2>(2 * i), ui)) + nuL[i] * d.dot(vi);
    H += sigma_support(d, q, nuL[i], sc.R, p.M) - alpha[i] * ui.squaredNorm();
    const Vec2 pair = pairwise_unit_sum(ys, i, [&](int j) { return nuH(i, j); });
    H += (qH.segment<2>(2 * i) + pair).dot(vi);
  }
  return H;
}

// H_L^i at one time point; y, x, v are participant i's vectors, ys all centers (pairwise terms).
inline double hamiltonian_lower(const Scenario& sc, int i, const std::vector<Vec2>& ys, const Vec2& x, const Vec2& v,
                                const Vec2& pH, const Vec2& pL, const std::vector<double>& muH, double muL, double lambda_bar) {
  const auto& p = sc.at(i);
  const Vec2 y = ys[static_cast<std::size_t>(i)];
  const Vec2 d = x - y;
  const Vec2 Q = pL - muL * d;
  double H = muL * d.dot(v) + sigma_support(d, pL, muL, sc.R, p.M);
  const VecX g = p.drift.dfdu(x).transpose() * Q;
  const VecX ubest = p.U.argmax_concave(g, lambda_bar);
  H += Q.dot(p.drift.f0(x)) + g.dot(ubest) - lambda_bar * ubest.squaredNorm();
  const Vec2 pair = pairwise_unit_sum(ys, i, [&](int j) { return muH[static_cast<std::size_t>(j)]; });
  H += (pH + pair).dot(v);
  return H;
}

}  // namespace sweep
