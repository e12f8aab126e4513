#pragma once

// Partition-of-unity / local Taylor approximation of smooth functions on
// [-1,1]^d and its ReLU realization.
//
// Bumps: psi(t) = relu(t+2) - relu(t+1) - relu(t-1) + relu(t-2) and
// phi_{j,N}(u) = prod_k psi(3N (u_k - j_k/N)), j in {0..N}^d. On the unit
// cube these sum to one. On [-1,1]^d the grid is mapped through
// u = (x+1)/2, i.e. centers c_j = 2j/N - 1.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "relucraft/gates.hpp"
#include "relucraft/netcore.hpp"

namespace relucraft::smoothapprox {

using netcore::ReluNet;
using MultiIndex = std::vector<int>;

struct Smoothness {
  int s = 0;       // Taylor degree
  double v = 1.0;  // Holder exponent in (0,1]
};
// r = s + v with v in (0,1]: integer r gives v = 1.
Smoothness split_smoothness(double r);

struct SmoothTarget {
  std::string name;
  int dim = 1;
  double r = 1.0;
  double c0 = 1.0;
  std::function<double(std::span<const double>)> value;
  // Optional: partial derivative of order k at x.
  std::function<double(std::span<const int>, std::span<const double>)> derivative;

  Smoothness smoothness() const { return split_smoothness(r); }
  double operator()(std::span<const double> x) const { return value(x); }
};

// Built-in targets (all infinitely differentiable, analytic derivatives):
// exp_neg_norm2, sin_pi_x1, prod_coords, linear_x1, zero.
SmoothTarget make_target(const std::string& name, int dim, double r);
std::vector<std::string> target_names();

// u -> g(factor * u), derivatives scaled accordingly.
SmoothTarget scaled_target(const SmoothTarget& g, double factor);

// Drops the derivative oracle so that finite differences are used.
SmoothTarget without_derivatives(SmoothTarget f);

// All multi-indices of length d with |alpha| <= s, graded then lexicographic.
std::vector<MultiIndex> multi_indices(int d, int s);

double psi(double t);
// One hidden layer, four units, exact.
ReluNet psi_net();

// prod_k psi(3N (x_k - j_k/N)): the bump on the unit cube.
double phi_reference(int N, std::span<const int> j, std::span<const double> x);
// Same bump on [-1,1]^d: phi_reference at (x+1)/2.
double phi_cube(int N, std::span<const int> j, std::span<const double> x);

// Partial derivative of order k, from the oracle or by central differences
// with step eps^{1/(|k|+2)} max(1, |x|). Throws Divergence on non-finite values.
double partial(const SmoothTarget& f, std::span<const int> k, std::span<const double> x);

// Degree-s Taylor polynomial around `center`, expanded in the monomials x^alpha.
std::map<MultiIndex, double> taylor_coeffs(const SmoothTarget& f, std::span<const double> center);

// f_1 = sum_j phi_j p_{s,c_j,f} with centers c_j = 2j/N - 1 on [-1,1]^d.
class F1Approximant {
 public:
  F1Approximant(const SmoothTarget& f, int N);
  double operator()(std::span<const double> x) const;
  int N() const { return N_; }
  // Coefficients a_{j,alpha}, nodes in lexicographic order of j.
  const std::vector<std::vector<double>>& coeffs() const { return coeffs_; }
  const std::vector<MultiIndex>& alphas() const { return alphas_; }

 private:
  int N_, d_;
  std::vector<MultiIndex> alphas_;
  std::vector<std::vector<double>> coeffs_;
};

double f1_reference(const SmoothTarget& f, int N, std::span<const double> x);

// Estimate of max_{|k|<=s} |d^k f| over [-1,1]^d on a grid of `per_axis` points.
double derivative_bound(const SmoothTarget& f, int per_axis);

struct SmoothNet {
  ReluNet net;
  gates::ProductGate gate;
  int N = 0;                 // grid has N+1 nodes per axis
  double nu = 0.0;           // per-gate accuracy
  double b_tilde = 0.0;      // derivative bound estimate
  double max_abs_coeff = 0.0;
  double sum_abs_coeff = 0.0;
  std::size_t branches = 0;  // (N+1)^d binom(s+d, s)
  int depth_formula = 0;     // 2(d+s) l_tilde + 8(d+s) + 3
  // Free parameters by part; total equals count_free_params(net).
  std::size_t gate_params = 0, bump_params = 0, coeff_params = 0;
};

// Grid N+1 = ceil(eps^{-1/r}), gate accuracy nu = eps^{(r+d)/r}. d <= 3.
// cfg.arity and cfg.epsilon are overridden.
SmoothNet smooth_net(const SmoothTarget& f, double eps, const gates::GateConfig& cfg);
// Same with an explicit grid and gate accuracy.
SmoothNet smooth_net_grid(const SmoothTarget& f, int N, double nu, const gates::GateConfig& cfg);

int smooth_depth(int d, int s, int l_tilde);

}  // namespace relucraft::smoothapprox
