#include "relucraft/polyapprox.hpp"

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>

#include "relucraft/hash.hpp"

namespace relucraft::polyapprox {

using netcore::Affine;
using netcore::kFixed;
using netcore::ParamId;
using netcore::Sharing;

void PolySpec::validate() const {
  if (dim < 1) throw InvalidInput("polynomial dimension must be positive");
  if (degree < 0) throw InvalidInput("polynomial degree must be non-negative");
  if (!(coeff_bound > 0.0) || !std::isfinite(coeff_bound)) throw InvalidInput("coefficient bound must be positive");
  if (terms.empty()) throw InvalidInput("polynomial needs at least one term");
  std::set<std::vector<int>> seen;
  for (const Term& t : terms) {
    if (static_cast<int>(t.alpha.size()) != dim) throw InvalidInput("exponent vector has wrong length");
    int total = 0;
    for (int a : t.alpha) {
      if (a < 0) throw InvalidInput("negative exponent");
      total += a;
    }
    if (total > degree) throw InvalidInput("monomial degree exceeds the polynomial degree");
    if (!std::isfinite(t.c) || std::abs(t.c) > coeff_bound) throw InvalidInput("coefficient exceeds the bound");
    if (!seen.insert(t.alpha).second) throw InvalidInput("duplicate monomial");
  }
}

PolySpec poly_from_json(const nlohmann::json& j) {
  try {
    PolySpec p;
    p.dim = j.at("dim").get<int>();
    p.degree = j.at("degree").get<int>();
    p.coeff_bound = j.at("coeff_bound").get<double>();
    for (const auto& t : j.at("terms")) p.terms.push_back({t.at("alpha").get<std::vector<int>>(), t.at("c").get<double>()});
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("polynomial json: ") + e.what());
  }
}

nlohmann::json poly_to_json(const PolySpec& p) {
  nlohmann::json terms = nlohmann::json::array();
  for (const Term& t : p.terms) terms.push_back({{"alpha", t.alpha}, {"c", t.c}});
  return {{"dim", p.dim}, {"degree", p.degree}, {"coeff_bound", p.coeff_bound}, {"terms", terms}};
}

double eval_poly(const PolySpec& p, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(p.dim)) throw InvalidInput("point has wrong dimension");
  double s = 0.0;
  for (const Term& t : p.terms) {
    double m = t.c;
    for (std::size_t k = 0; k < x.size(); ++k)
      for (int r = 0; r < t.alpha[k]; ++r) m *= x[k];
    s += m;
  }
  return s;
}

PolySpec random_poly(int dim, int degree, double bound, int mu, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coord(0, dim - 1);
  std::uniform_int_distribution<int> deg(0, degree);
  std::uniform_real_distribution<double> coef(-bound, bound);
  PolySpec p;
  p.dim = dim;
  p.degree = degree;
  p.coeff_bound = bound;
  std::set<std::vector<int>> seen;
  int attempts = 0;
  while (static_cast<int>(p.terms.size()) < mu) {
    if (++attempts > 100000) throw InvalidInput("cannot draw that many distinct monomials");
    std::vector<int> a(static_cast<std::size_t>(dim), 0);
    const int n = deg(rng);
    for (int r = 0; r < n; ++r) ++a[static_cast<std::size_t>(coord(rng))];
    if (seen.insert(a).second) p.terms.push_back({a, coef(rng)});
  }
  return p;
}

namespace {

// Hidden layer relu(x_k + 1) for every coordinate plus one bias-only unit
// that is constantly 1. Output map lists the factors of each monomial in
// order: x_k = unit_k - 1, 1 = constant unit.
ReluNet factor_prep(int dim, const std::vector<std::vector<int>>& alphas, int beta) {
  Affine l(dim + 1, dim);
  for (int k = 0; k < dim; ++k) {
    l.weights.add(k, k, 1.0);
    l.set_bias(k, 1.0);
  }
  l.set_bias(dim, 1.0);
  Affine out(static_cast<int>(alphas.size()) * beta, dim + 1);
  int row = 0;
  for (const auto& a : alphas) {
    int used = 0;
    for (int k = 0; k < dim; ++k)
      for (int r = 0; r < a[static_cast<std::size_t>(k)]; ++r, ++used, ++row) {
        out.weights.add(row, k, 1.0);
        out.set_bias(row, -1.0);
      }
    for (; used < beta; ++used, ++row) out.weights.add(row, dim, 1.0);
  }
  return ReluNet(dim, {l}, out);
}

ReluNet gated_sum(int dim, const std::vector<std::vector<int>>& alphas, const std::vector<double>& coeffs,
                  int beta, const gates::ProductGate* gate, std::uint64_t tag) {
  const int mu = static_cast<int>(alphas.size());
  ReluNet prep = factor_prep(dim, alphas, std::max(beta, 1));
  ReluNet body;
  if (beta == 0) {
    // Only the constant monomial: read the constant unit directly.
    Affine out(mu, dim + 1);
    for (int i = 0; i < mu; ++i) out.weights.add(i, dim, 1.0);
    body = ReluNet(dim, prep.layers(), out);
  } else {
    std::vector<ReluNet> branches(static_cast<std::size_t>(mu), gate->net);
    body = netcore::compose(netcore::direct_sum(branches, false, Sharing::kShared), prep, Sharing::kShared);
  }
  netcore::SparseMatrix c(1, mu);
  for (int i = 0; i < mu; ++i) {
    const ParamId id = static_cast<ParamId>(Hasher("poly-coeff").add(tag).add(std::uint64_t(i)).value() >> 2);
    c.add(0, i, coeffs[static_cast<std::size_t>(i)], id);
  }
  const std::vector<double> zero{0.0};
  return netcore::postcompose_affine(body, c, zero);
}

}  // namespace

ReluNet monomial_net(const std::vector<int>& alpha, int beta, const gates::GateConfig& cfg) {
  int total = 0;
  for (int a : alpha) {
    if (a < 0) throw InvalidInput("negative exponent");
    total += a;
  }
  if (alpha.empty()) throw InvalidInput("empty exponent vector");
  if (total > beta) throw InvalidInput("monomial degree exceeds the gate arity");
  gates::GateConfig g = cfg;
  g.arity = std::max(beta, 1);
  const auto gate = gates::productL_gate(g);
  const int dim = static_cast<int>(alpha.size());
  ReluNet prep = factor_prep(dim, {alpha}, g.arity);
  if (beta == 0) {
    Affine out(1, dim + 1);
    out.weights.add(0, dim, 1.0);
    return ReluNet(dim, prep.layers(), out);
  }
  return netcore::compose(gate.net, prep, Sharing::kShared);
}

PolyNet sparse_poly_net(const PolySpec& p, const gates::GateConfig& cfg) {
  p.validate();
  cfg.validate();
  const int mu = static_cast<int>(p.sparsity());
  PolyNet out;
  out.monomial_eps = cfg.epsilon / (mu * p.coeff_bound);
  gates::GateConfig g = cfg;
  g.arity = std::max(p.degree, 1);
  g.epsilon = std::min(out.monomial_eps, 0.5);
  out.gate = gates::productL_gate(g);

  std::vector<std::vector<int>> alphas;
  std::vector<double> coeffs;
  for (const Term& t : p.terms) {
    alphas.push_back(t.alpha);
    coeffs.push_back(t.c);
  }
  bool all_zero = true;
  for (double c : coeffs) all_zero = all_zero && c == 0.0;
  if (all_zero) {
    alphas.assign(1, std::vector<int>(static_cast<std::size_t>(p.dim), 0));
    coeffs.assign(1, 0.0);
  }
  Hasher h("poly");
  h.add(std::uint64_t(p.dim)).add(std::uint64_t(p.degree));
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    for (int a : alphas[i]) h.add(std::uint64_t(a));
    h.add_double(coeffs[i]);
  }
  const std::uint64_t tag = h.value();
  out.net = gated_sum(p.dim, alphas, coeffs, p.degree, &out.gate, tag);
  const int lt = cfg.l_tilde;
  out.depth_formula = p.degree * gates::binary_depth(lt) + 1;
  const std::size_t used = alphas.size();
  out.params_formula = p.degree == 0 ? used : netcore::count_free_params(out.gate.net) + 2 * used;
  return out;
}

}  // namespace relucraft::polyapprox
