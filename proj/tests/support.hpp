#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "relucraft/netcore.hpp"

namespace testing_support {

using relucraft::netcore::Affine;
using relucraft::netcore::ParamId;
using relucraft::netcore::ReluNet;

inline std::vector<std::vector<double>> random_points(int n, int dim, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<std::vector<double>> pts(static_cast<std::size_t>(n), std::vector<double>(static_cast<std::size_t>(dim)));
  for (auto& p : pts)
    for (double& v : p) v = u(rng);
  return pts;
}

// Bump relu(t+2) - relu(t+1) - relu(t-1) + relu(t-2) on each of `dim`
// coordinates. Slopes and thresholds are tunable per coordinate; the four
// output signs are one shared pattern across coordinates.
inline ReluNet psi_net(int dim) {
  const double thr[4] = {2.0, 1.0, -1.0, -2.0};
  const double sgn[4] = {1.0, -1.0, -1.0, 1.0};
  Affine l(4 * dim, dim);
  Affine out(dim, 4 * dim);
  ParamId next = 0;
  for (int k = 0; k < dim; ++k)
    for (int u = 0; u < 4; ++u) {
      l.weights.add(4 * k + u, k, 1.0, next++);
      l.set_bias(4 * k + u, thr[u], next++);
    }
  for (int k = 0; k < dim; ++k)
    for (int u = 0; u < 4; ++u) out.weights.add(k, 4 * k + u, sgn[u], 1000 + u);
  return ReluNet(dim, {l}, out);
}

inline double psi_ref(double t) {
  const double a = std::abs(t);
  if (a <= 1.0) return 1.0;
  if (a < 2.0) return 2.0 - a;
  return 0.0;
}

}  // namespace testing_support
