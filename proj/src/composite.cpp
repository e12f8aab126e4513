#include "relucraft/composite.hpp"

#include <cmath>
#include <numeric>
#include <unordered_set>

namespace relucraft::composite {

using netcore::Affine;
using netcore::ParamId;
using netcore::Sharing;

int CompositeSpec::input_dim() const { return std::accumulate(block_dims.begin(), block_dims.end(), 0); }

double CompositeSpec::tau_r() const { return outer.r >= 1.0 ? 1.0 : outer.smoothness().v; }

void CompositeSpec::validate() const {
  if (block_dims.empty()) throw InvalidInput("composite spec needs at least one block");
  if (inner_polys.size() != block_dims.size()) throw InvalidInput("one block polynomial per block is required");
  if (outer.dim != outer_dim()) throw InvalidInput("outer function dimension must equal the block count");
  if (!outer.value) throw InvalidInput("outer function has no value oracle");
  if (iota < 1) throw InvalidInput("block degree bound must be >= 1");
  for (std::size_t k = 0; k < block_dims.size(); ++k) {
    const PolySpec& p = inner_polys[k];
    if (block_dims[k] < 1 || p.dim != block_dims[k]) throw InvalidInput("block polynomial dimension mismatch");
    p.validate();
    if (p.degree > iota) throw InvalidInput("block polynomial degree exceeds the degree bound");
    if (p.coeff_bound > 0.5) throw InvalidInput("block polynomial coefficients must be bounded by 1/2");
    double sum = 0.0;
    for (const auto& t : p.terms) sum += std::abs(t.c);
    if (sum > 0.5 + 1e-12) throw InvalidInput("block polynomial may leave [-1/2, 1/2]");
  }
}

std::vector<double> inner_values(const CompositeSpec& spec, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(spec.input_dim())) throw InvalidInput("point has wrong dimension");
  std::vector<double> u;
  std::size_t at = 0;
  for (std::size_t k = 0; k < spec.block_dims.size(); ++k) {
    const auto n = static_cast<std::size_t>(spec.block_dims[k]);
    u.push_back(polyapprox::eval_poly(spec.inner_polys[k], x.subspan(at, n)));
    at += n;
  }
  return u;
}

double eval_composite(const CompositeSpec& spec, std::span<const double> x) {
  const auto u = inner_values(spec, x);
  for (double v : u)
    if (!(std::abs(v) <= 0.5 + 1e-12)) throw SpecViolation("block value " + std::to_string(v) + " leaves [-1/2, 1/2]");
  return spec.outer(u);
}

int composite_depth(int outer_dim, int s, int l_tilde, int iota) {
  return smoothapprox::smooth_depth(outer_dim, s, l_tilde) + iota * gates::binary_depth(l_tilde) + 1;
}

namespace {

std::size_t ids_in(const Affine& a, std::unordered_set<ParamId>& seen) {
  const std::size_t before = seen.size();
  for (int i = 0; i < a.out_dim(); ++i) {
    for (const auto& e : a.weights.row(i))
      if (e.param >= 0) seen.insert(e.param);
    if (a.bias_param[static_cast<std::size_t>(i)] >= 0) seen.insert(a.bias_param[static_cast<std::size_t>(i)]);
  }
  return seen.size() - before;
}

}  // namespace

CompositeNet composite_net(const CompositeSpec& spec, double eps, const gates::GateConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (!(eps > 0.0 && eps < 0.5)) throw InvalidInput("composite accuracy must lie in (0, 1/2)");
  CompositeNet out;
  out.nu_outer = eps;
  out.nu_inner = std::pow(eps, 1.0 / spec.tau_r());

  const int d = spec.input_dim();
  std::vector<ReluNet> blocks;
  int at = 0;
  for (std::size_t k = 0; k < spec.block_dims.size(); ++k) {
    PolySpec p = spec.inner_polys[k];
    p.degree = spec.iota;
    gates::GateConfig g = cfg;
    g.epsilon = out.nu_inner;
    const ReluNet block = polyapprox::sparse_poly_net(p, g).net;
    netcore::SparseMatrix pick(p.dim, d);
    for (int i = 0; i < p.dim; ++i) pick.add(i, at + i, 1.0);
    pick.finalize();
    const std::vector<double> zero(static_cast<std::size_t>(p.dim), 0.0);
    blocks.push_back(netcore::precompose_affine(block, pick, zero));
    at += p.dim;
  }
  out.inner = netcore::parallel(blocks, false, Sharing::kIndependent);
  out.inner_depth = out.inner.depth();
  out.outer = smoothapprox::smooth_net(spec.outer, out.nu_outer, cfg);
  out.net = netcore::compose(out.outer.net, out.inner, Sharing::kIndependent);
  out.depth_formula = composite_depth(spec.outer_dim(), spec.outer.smoothness().s, cfg.l_tilde, spec.iota);

  std::unordered_set<ParamId> seen;
  const auto& layers = out.net.layers();
  const auto junction = static_cast<std::size_t>(out.inner_depth);
  for (std::size_t k = 0; k < junction; ++k) out.inner_params += ids_in(layers[k], seen);
  out.junction_params = ids_in(layers[junction], seen);
  for (std::size_t k = junction + 1; k < layers.size(); ++k) out.outer_params += ids_in(layers[k], seen);
  out.outer_params += ids_in(out.net.output_map(), seen);
  return out;
}

namespace {

PolySpec squared_norm(int n) {
  PolySpec p;
  p.dim = n;
  p.degree = 2;
  p.coeff_bound = 0.5 / n;
  for (int k = 0; k < n; ++k) {
    std::vector<int> a(static_cast<std::size_t>(n), 0);
    a[static_cast<std::size_t>(k)] = 2;
    p.terms.push_back({a, 0.5 / n});
  }
  return p;
}

PolySpec half_coordinate() {
  PolySpec p;
  p.dim = 1;
  p.degree = 1;
  p.coeff_bound = 0.5;
  p.terms.push_back({{1}, 0.5});
  return p;
}

}  // namespace

CompositeSpec partial_radial_spec(const SmoothTarget& g, int d, int d_prime) {
  if (d_prime < 1 || d_prime > d) throw InvalidInput("need 1 <= d' <= d");
  if (g.dim != d - d_prime + 1) throw InvalidInput("outer function must take d - d' + 1 arguments");
  CompositeSpec s;
  s.block_dims.push_back(d_prime);
  s.inner_polys.push_back(squared_norm(d_prime));
  for (int k = d_prime; k < d; ++k) {
    s.block_dims.push_back(1);
    s.inner_polys.push_back(half_coordinate());
  }
  s.outer = smoothapprox::scaled_target(g, 2.0);
  s.iota = 2;
  return s;
}

CompositeSpec radial_spec(const SmoothTarget& g, int d) {
  if (g.dim != 1) throw InvalidInput("radial outer function must be univariate");
  return partial_radial_spec(g, d, d);
}

gates::GateConfig radial_gate_config(double r) {
  const double tau = r >= 1.0 ? 1.0 : smoothapprox::split_smoothness(r).v;
  gates::GateConfig cfg;
  cfg.theta = tau / (2.0 + 2.0 * r);
  cfg.l_tilde = static_cast<int>(std::ceil(2.0 * (r + 1.0) / tau - 1e-12));
  return cfg;
}

RadialNet partial_radial_net(const SmoothTarget& g, int d, int d_prime, int n_budget) {
  if (n_budget < 2) throw InvalidInput("parameter budget must be >= 2");
  RadialNet out;
  out.spec = partial_radial_spec(g, d, d_prime);
  const double r = g.r;
  const int k = out.spec.outer_dim();
  out.eps = std::pow(static_cast<double>(n_budget), -r / k);
  if (!(out.eps < 0.5)) throw InvalidInput("parameter budget too small for accuracy below 1/2");
  const auto cfg = radial_gate_config(r);
  out.built = composite_net(out.spec, out.eps, cfg);
  const double tau = out.spec.tau_r();
  const int s = g.smoothness().s;
  out.printed_depth = static_cast<int>(std::lround(4.0 * (d + s + 2) * (r + 1.0) / tau + 8.0 * (d + s) + 20.0));
  return out;
}

RadialNet radial_net(const SmoothTarget& g, int d, int n_budget) {
  if (g.dim != 1) throw InvalidInput("radial outer function must be univariate");
  return partial_radial_net(g, d, d, n_budget);
}

CompositeSpec composite_from_json(const nlohmann::json& j) {
  try {
    CompositeSpec s;
    s.block_dims = j.at("block_dims").get<std::vector<int>>();
    s.iota = j.value("iota", 2);
    for (const auto& p : j.at("inner_polys")) s.inner_polys.push_back(polyapprox::poly_from_json(p));
    const auto& o = j.at("outer");
    s.outer = smoothapprox::make_target(o.at("name").get<std::string>(), o.at("dim").get<int>(), o.at("r").get<double>());
    if (o.contains("scale")) s.outer = smoothapprox::scaled_target(s.outer, o.at("scale").get<double>());
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("composite json: ") + e.what());
  }
}

}  // namespace relucraft::composite
