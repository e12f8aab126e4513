#pragma once

// Composite targets f(x) = g(P_1(x_B1), ..., P_k(x_Bk)): each block
// polynomial gets a sparse-polynomial net, the stacked outputs feed a smooth
// net for g (whose first layers clamp into [-1,1]^k).

#include <nlohmann/json.hpp>

#include "relucraft/polyapprox.hpp"
#include "relucraft/smoothapprox.hpp"

namespace relucraft::composite {

using netcore::ReluNet;
using polyapprox::PolySpec;
using smoothapprox::SmoothTarget;

struct CompositeSpec {
  std::vector<int> block_dims;          // consecutive coordinate blocks
  std::vector<PolySpec> inner_polys;    // one per block, over that block
  SmoothTarget outer;                   // over [-1,1]^{blocks}
  int iota = 2;                         // degree bound of the block polynomials

  int input_dim() const;
  int outer_dim() const { return static_cast<int>(block_dims.size()); }
  // 1 when r >= 1, else the Holder exponent.
  double tau_r() const;
  // Throws InvalidInput on inconsistent dimensions or degrees, coefficients
  // above 1/2, or block polynomials whose coefficient sum could leave [-1/2,1/2].
  void validate() const;
};

// Block values P_k(x_Bk).
std::vector<double> inner_values(const CompositeSpec& spec, std::span<const double> x);

// Ground truth. Throws SpecViolation if a block value leaves [-1/2, 1/2].
double eval_composite(const CompositeSpec& spec, std::span<const double> x);

struct CompositeNet {
  ReluNet net;
  ReluNet inner;                        // stacked block nets, outputs (P_1..P_k)
  smoothapprox::SmoothNet outer;
  double nu_inner = 0.0, nu_outer = 0.0;
  int inner_depth = 0;
  int depth_formula = 0;                // smooth depth(k, s) + iota (2 l_tilde + 8) + 1
  // Free parameters of the assembled net split by position: layers below the
  // junction, the junction layer (block readouts fused into the clamp), and
  // everything above it. Sum equals count_free_params(net).
  std::size_t inner_params = 0, junction_params = 0, outer_params = 0;
};

// nu_outer = eps, nu_inner = eps^{1/tau_r}. eps in (0, 1/2).
CompositeNet composite_net(const CompositeSpec& spec, double eps, const gates::GateConfig& cfg);

int composite_depth(int outer_dim, int s, int l_tilde, int iota);

// Radial: f(x) = g(|x|^2 / d), g on [0,1]. One block P = |x|^2 / (2d), outer
// u -> g(2u).
CompositeSpec radial_spec(const SmoothTarget& g, int d);
// Partially radial: f(x) = g(|x_{1..d'}|^2 / d', x_{d'+1}, ..., x_d). Blocks:
// |x_{1..d'}|^2 / (2d') and x_k / 2 for the rest; outer u -> g(2u).
CompositeSpec partial_radial_spec(const SmoothTarget& g, int d, int d_prime);

// Gate settings theta = tau_r / (2 + 2r), l_tilde = ceil(2 (r+1) / tau_r).
gates::GateConfig radial_gate_config(double r);

// Accuracy eps = n_budget^{-r / outer_dim}, so the outer grid has about
// n_budget^{1/outer_dim} nodes per axis.
struct RadialNet {
  CompositeSpec spec;
  CompositeNet built;
  double eps = 0.0;
  int printed_depth = 0;                // 4(d+s+2)(r+1)/tau_r + 8(d+s) + 20
};
RadialNet radial_net(const SmoothTarget& g, int d, int n_budget);
RadialNet partial_radial_net(const SmoothTarget& g, int d, int d_prime, int n_budget);

// {block_dims, iota, inner_polys:[poly], outer:{name, dim, r, scale?}}.
// The outer target is looked up in the built-in catalog.
CompositeSpec composite_from_json(const nlohmann::json& j);

}  // namespace relucraft::composite
