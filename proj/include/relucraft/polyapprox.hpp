#pragma once

// Sparse polynomials on [-1,1]^d and their product-gate realizations.
//
// Each monomial x^alpha is written as a product of beta factors (repeated
// coordinates, padded with constant 1s) and fed into one shared l-ary
// product gate; the coefficients sit in the output map.

#include <vector>

#include <nlohmann/json.hpp>

#include "relucraft/gates.hpp"
#include "relucraft/netcore.hpp"

namespace relucraft::polyapprox {

using netcore::ReluNet;

struct Term {
  std::vector<int> alpha;
  double c = 0.0;
};

struct PolySpec {
  int dim = 1;
  int degree = 1;
  double coeff_bound = 1.0;
  std::vector<Term> terms;

  std::size_t sparsity() const { return terms.size(); }
  // Throws InvalidInput on malformed exponents, duplicate monomials, or
  // |c| > coeff_bound. coeff_bound only needs to be positive.
  void validate() const;
};

PolySpec poly_from_json(const nlohmann::json& j);
nlohmann::json poly_to_json(const PolySpec& p);

double eval_poly(const PolySpec& p, std::span<const double> x);

// Random spec: `mu` distinct exponents with |alpha| <= degree, coefficients
// uniform in [-bound, bound].
PolySpec random_poly(int dim, int degree, double bound, int mu, std::uint64_t seed);

// Prep layer feeding x^alpha, padded with 1s to beta factors, into a
// product gate of arity beta built at cfg.epsilon. beta == 0 gives the
// constant 1 in one layer.
ReluNet monomial_net(const std::vector<int>& alpha, int beta, const gates::GateConfig& cfg);

struct PolyNet {
  ReluNet net;
  gates::ProductGate gate;
  double monomial_eps = 0.0;  // accuracy of each product gate
  int depth_formula = 0;      // beta (2 l_tilde + 8) + 1
  std::size_t params_formula = 0;  // gate params + 2 mu (mu when beta == 0)
};

// |net(x) - P(x)| <= cfg.epsilon on [-1,1]^d. Monomials are built at
// cfg.epsilon / (mu B); cfg.arity is overridden by the degree.
PolyNet sparse_poly_net(const PolySpec& p, const gates::GateConfig& cfg);

}  // namespace relucraft::polyapprox
