#include "relucraft/smoothapprox.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "relucraft/hash.hpp"

namespace relucraft::smoothapprox {

using netcore::Affine;
using netcore::ParamId;
using netcore::Sharing;

Smoothness split_smoothness(double r) {
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidInput("smoothness must be positive");
  const double fl = std::floor(r);
  if (fl == r) return {static_cast<int>(r) - 1, 1.0};
  return {static_cast<int>(fl), r - fl};
}

std::vector<MultiIndex> multi_indices(int d, int s) {
  if (d < 1 || s < 0) throw InvalidInput("multi_indices needs d >= 1 and s >= 0");
  std::vector<MultiIndex> out;
  for (int total = 0; total <= s; ++total) {
    MultiIndex a(static_cast<std::size_t>(d), 0);
    // Enumerate compositions of `total` into d parts, lexicographically descending.
    auto rec = [&](auto&& self, int pos, int left) -> void {
      if (pos == d - 1) {
        a[static_cast<std::size_t>(pos)] = left;
        out.push_back(a);
        return;
      }
      for (int v = left; v >= 0; --v) {
        a[static_cast<std::size_t>(pos)] = v;
        self(self, pos + 1, left - v);
      }
    };
    rec(rec, 0, total);
  }
  return out;
}

double psi(double t) {
  auto relu = [](double z) { return z > 0.0 ? z : 0.0; };
  return relu(t + 2.0) - relu(t + 1.0) - relu(t - 1.0) + relu(t - 2.0);
}

ReluNet psi_net() {
  const double thr[4] = {2.0, 1.0, -1.0, -2.0};
  const double sgn[4] = {1.0, -1.0, -1.0, 1.0};
  Affine l(4, 1), out(1, 4);
  for (int u = 0; u < 4; ++u) {
    l.weights.add(u, 0, 1.0, 2 * u);
    l.set_bias(u, thr[u], 2 * u + 1);
    out.weights.add(0, u, sgn[u], 8 + u);
  }
  return ReluNet(1, {l}, out);
}

double phi_reference(int N, std::span<const int> j, std::span<const double> x) {
  if (j.size() != x.size()) throw InvalidInput("grid index and point differ in dimension");
  if (N < 1) throw InvalidInput("grid size must be positive");
  double p = 1.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (j[k] < 0 || j[k] > N) throw InvalidInput("grid index out of range");
    p *= psi(3.0 * N * (x[k] - static_cast<double>(j[k]) / N));
  }
  return p;
}

double phi_cube(int N, std::span<const int> j, std::span<const double> x) {
  std::vector<double> u(x.begin(), x.end());
  for (double& v : u) v = (v + 1.0) / 2.0;
  return phi_reference(N, j, u);
}

double partial(const SmoothTarget& f, std::span<const int> k, std::span<const double> x) {
  if (k.size() != static_cast<std::size_t>(f.dim) || x.size() != k.size())
    throw InvalidInput("derivative order or point has wrong dimension");
  double v;
  if (f.derivative) {
    v = f.derivative(k, x);
  } else {
    int n = 0;
    double scale = 1.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      n += k[i];
      scale = std::max(scale, std::abs(x[i]));
    }
    const double h = std::pow(std::numeric_limits<double>::epsilon(), 1.0 / (n + 2)) * scale;
    // Tensor product of central differences: sum over offsets of prod_i
    // (-1)^m_i binom(k_i, m_i) f(x + (k_i/2 - m_i) h e_i) / h^n.
    std::vector<int> m(k.size(), 0);
    std::vector<double> y(x.begin(), x.end());
    double acc = 0.0;
    while (true) {
      double w = 1.0;
      for (std::size_t i = 0; i < k.size(); ++i) {
        w *= std::tgamma(k[i] + 1.0) / (std::tgamma(m[i] + 1.0) * std::tgamma(k[i] - m[i] + 1.0));
        if (m[i] % 2) w = -w;
        y[i] = x[i] + (0.5 * k[i] - m[i]) * h;
      }
      acc += w * f.value(y);
      std::size_t i = 0;
      while (i < k.size() && ++m[i] > k[i]) m[i++] = 0;
      if (i == k.size()) break;
    }
    v = acc / std::pow(h, n);
  }
  if (!std::isfinite(v)) throw Divergence("non-finite derivative of " + f.name);
  return v;
}

std::map<MultiIndex, double> taylor_coeffs(const SmoothTarget& f, std::span<const double> center) {
  if (center.size() != static_cast<std::size_t>(f.dim)) throw InvalidInput("center has wrong dimension");
  const int s = f.smoothness().s;
  const int d = f.dim;
  std::map<MultiIndex, double> out;
  const auto idx = multi_indices(d, s);
  for (const auto& a : idx) out[a] = 0.0;
  for (const auto& k : idx) {
    double c = partial(f, k, center);
    for (int ki : k) c /= std::tgamma(ki + 1.0);
    if (c == 0.0) continue;
    // (x - c)^k expanded coordinatewise.
    MultiIndex a(static_cast<std::size_t>(d), 0);
    auto rec = [&](auto&& self, int pos, double w) -> void {
      if (pos == d) {
        out[a] += c * w;
        return;
      }
      const int kk = k[static_cast<std::size_t>(pos)];
      for (int e = 0; e <= kk; ++e) {
        a[static_cast<std::size_t>(pos)] = e;
        const double binom = std::tgamma(kk + 1.0) / (std::tgamma(e + 1.0) * std::tgamma(kk - e + 1.0));
        self(self, pos + 1, w * binom * std::pow(-center[static_cast<std::size_t>(pos)], kk - e));
      }
    };
    rec(rec, 0, 1.0);
  }
  return out;
}

namespace {

int node_count(int N, int d) {
  int n = 1;
  for (int k = 0; k < d; ++k) n *= N + 1;
  return n;
}

std::vector<int> node_index(int node, int N, int d) {
  std::vector<int> j(static_cast<std::size_t>(d));
  for (int k = d - 1; k >= 0; --k) {
    j[static_cast<std::size_t>(k)] = node % (N + 1);
    node /= N + 1;
  }
  return j;
}

double monomial(const MultiIndex& a, std::span<const double> x) {
  double m = 1.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    for (int r = 0; r < a[k]; ++r) m *= x[k];
  return m;
}

}  // namespace

F1Approximant::F1Approximant(const SmoothTarget& f, int N) : N_(N), d_(f.dim) {
  if (N < 1) throw InvalidInput("grid size must be positive");
  alphas_ = multi_indices(d_, f.smoothness().s);
  const int nodes = node_count(N, d_);
  coeffs_.reserve(static_cast<std::size_t>(nodes));
  for (int n = 0; n < nodes; ++n) {
    const auto j = node_index(n, N, d_);
    std::vector<double> c(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) c[k] = 2.0 * j[k] / N - 1.0;
    const auto t = taylor_coeffs(f, c);
    std::vector<double> row;
    for (const auto& a : alphas_) row.push_back(t.at(a));
    coeffs_.push_back(std::move(row));
  }
}

double F1Approximant::operator()(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(d_)) throw InvalidInput("point has wrong dimension");
  // Only nodes with |u_k - j_k/N| < 2/(3N) contribute.
  std::vector<int> lo(static_cast<std::size_t>(d_)), hi(static_cast<std::size_t>(d_));
  for (int k = 0; k < d_; ++k) {
    const double u = (x[static_cast<std::size_t>(k)] + 1.0) / 2.0 * N_;
    lo[static_cast<std::size_t>(k)] = std::max(0, static_cast<int>(std::floor(u)) - 1);
    hi[static_cast<std::size_t>(k)] = std::min(N_, static_cast<int>(std::floor(u)) + 2);
  }
  std::vector<double> mono;
  for (const auto& a : alphas_) mono.push_back(monomial(a, x));
  std::vector<int> j(lo);
  double sum = 0.0;
  for (int k = 0; k < d_; ++k)
    if (lo[static_cast<std::size_t>(k)] > hi[static_cast<std::size_t>(k)]) return 0.0;
  while (true) {
    const double phi = phi_cube(N_, j, x);
    if (phi != 0.0) {
      int node = 0;
      for (int k = 0; k < d_; ++k) node = node * (N_ + 1) + j[static_cast<std::size_t>(k)];
      const auto& c = coeffs_[static_cast<std::size_t>(node)];
      double p = 0.0;
      for (std::size_t a = 0; a < c.size(); ++a) p += c[a] * mono[a];
      sum += phi * p;
    }
    int k = d_ - 1;
    while (k >= 0 && ++j[static_cast<std::size_t>(k)] > hi[static_cast<std::size_t>(k)]) {
      j[static_cast<std::size_t>(k)] = lo[static_cast<std::size_t>(k)];
      --k;
    }
    if (k < 0) break;
  }
  return sum;
}

double f1_reference(const SmoothTarget& f, int N, std::span<const double> x) { return F1Approximant(f, N)(x); }

double derivative_bound(const SmoothTarget& f, int per_axis) {
  if (per_axis < 2) throw InvalidInput("derivative_bound needs at least 2 points per axis");
  const auto idx = multi_indices(f.dim, f.smoothness().s);
  const int nodes = node_count(per_axis - 1, f.dim);
  double b = 0.0;
  for (int n = 0; n < nodes; ++n) {
    const auto j = node_index(n, per_axis - 1, f.dim);
    std::vector<double> x(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) x[k] = 2.0 * j[k] / (per_axis - 1) - 1.0;
    for (const auto& k : idx) b = std::max(b, std::abs(partial(f, k, x)));
  }
  return b;
}

int smooth_depth(int d, int s, int l_tilde) { return (d + s) * gates::binary_depth(l_tilde) + 3; }

namespace {

ParamId hashed_id(const char* tag, std::initializer_list<std::uint64_t> parts) {
  Hasher h(tag);
  for (auto p : parts) h.add(p);
  return static_cast<ParamId>(h.value() >> 2);
}

// Hidden layer: 4 bump units per (axis, node), relu(x_k + 1) per axis and a
// constant unit. Output map lists, per branch (node, alpha), the product
// factors psi_1..psi_d, repeated x's, then 1s.
ReluNet bump_net(int d, int N, int s, const std::vector<MultiIndex>& alphas) {
  const double thr[4] = {2.0, 1.0, -1.0, -2.0};
  const double sgn[4] = {1.0, -1.0, -1.0, 1.0};
  const double slope = 1.5 * N;
  const int bump_units = 4 * d * (N + 1);
  Affine l(bump_units + d + 1, d);
  const ParamId slope_id = hashed_id("psi-slope", {std::uint64_t(N)});
  auto unit = [N](int k, int jk, int t) { return 4 * (k * (N + 1) + jk) + t; };
  for (int k = 0; k < d; ++k)
    for (int jk = 0; jk <= N; ++jk)
      for (int t = 0; t < 4; ++t) {
        const int row = unit(k, jk, t);
        const double b = slope - 3.0 * jk + thr[t];
        l.weights.add(row, k, slope, slope_id);
        l.set_bias(row, b, hashed_id("psi-bias", {std::uint64_t(N), std::bit_cast<std::uint64_t>(b)}));
      }
  for (int k = 0; k < d; ++k) {
    l.weights.add(bump_units + k, k, 1.0);
    l.set_bias(bump_units + k, 1.0);
  }
  l.set_bias(bump_units + d, 1.0);

  const int nodes = node_count(N, d);
  const int arity = d + s;
  Affine out(nodes * static_cast<int>(alphas.size()) * arity, bump_units + d + 1);
  int row = 0;
  for (int n = 0; n < nodes; ++n) {
    const auto j = node_index(n, N, d);
    for (const auto& a : alphas) {
      for (int k = 0; k < d; ++k, ++row)
        for (int t = 0; t < 4; ++t) out.weights.add(row, unit(k, j[static_cast<std::size_t>(k)], t), sgn[t]);
      int used = 0;
      for (int k = 0; k < d; ++k)
        for (int r = 0; r < a[static_cast<std::size_t>(k)]; ++r, ++used, ++row) {
          out.weights.add(row, bump_units + k, 1.0);
          out.set_bias(row, -1.0);
        }
      for (; used < s; ++used, ++row) out.weights.add(row, bump_units + d, 1.0);
    }
  }
  out.weights.finalize();
  return ReluNet(d, {l}, out);
}

std::size_t ids_in(const Affine& a, std::unordered_set<ParamId>& seen) {
  std::size_t before = seen.size();
  for (int i = 0; i < a.out_dim(); ++i) {
    for (const auto& e : a.weights.row(i))
      if (e.param >= 0) seen.insert(e.param);
    if (a.bias_param[static_cast<std::size_t>(i)] >= 0) seen.insert(a.bias_param[static_cast<std::size_t>(i)]);
  }
  return seen.size() - before;
}

}  // namespace

SmoothNet smooth_net_grid(const SmoothTarget& f, int N, double nu, const gates::GateConfig& cfg) {
  const int d = f.dim;
  if (d < 1 || d > 3) throw InvalidInput("smooth networks are limited to dimension 1..3");
  if (N < 1) throw InvalidInput("grid size must be positive");
  if (!(nu > 0.0 && nu < 1.0)) throw InvalidInput("gate accuracy must lie in (0,1)");
  const int s = f.smoothness().s;
  SmoothNet out;
  out.N = N;
  out.nu = nu;
  gates::GateConfig g = cfg;
  g.arity = d + s;
  g.epsilon = nu;
  out.gate = gates::productL_gate(g);

  const F1Approximant f1(f, N);
  const auto& alphas = f1.alphas();
  const int nodes = node_count(N, d);
  out.branches = static_cast<std::size_t>(nodes) * alphas.size();
  out.depth_formula = smooth_depth(d, s, cfg.l_tilde);
  out.b_tilde = derivative_bound(f, std::max(N + 1, 11));

  std::vector<ReluNet> branches(out.branches, out.gate.net);
  ReluNet body = netcore::compose(netcore::direct_sum(branches, false, Sharing::kShared), bump_net(d, N, s, alphas),
                                  Sharing::kShared);
  const ReluNet clamp = netcore::compose(netcore::clamp_net_unbiased(d), netcore::clamp_net(d), Sharing::kShared);
  body = netcore::compose(body, clamp, Sharing::kShared);

  netcore::SparseMatrix coef(1, static_cast<int>(out.branches));
  int col = 0;
  for (int n = 0; n < nodes; ++n)
    for (std::size_t a = 0; a < alphas.size(); ++a, ++col) {
      const double c = f1.coeffs()[static_cast<std::size_t>(n)][a];
      out.max_abs_coeff = std::max(out.max_abs_coeff, std::abs(c));
      out.sum_abs_coeff += std::abs(c);
      coef.add(0, col, c, hashed_id("smooth-coeff", {std::uint64_t(N), std::uint64_t(n), std::uint64_t(a)}));
    }
  const std::vector<double> zero{0.0};
  out.net = netcore::postcompose_affine(body, coef, zero);

  std::unordered_set<ParamId> seen;
  const auto& layers = out.net.layers();
  out.bump_params = ids_in(layers[2], seen);
  for (std::size_t k = 3; k < layers.size(); ++k) out.gate_params += ids_in(layers[k], seen);
  out.coeff_params = ids_in(out.net.output_map(), seen);
  return out;
}

SmoothNet smooth_net(const SmoothTarget& f, double eps, const gates::GateConfig& cfg) {
  if (!(eps > 0.0 && eps < 1.0)) throw InvalidInput("accuracy must lie in (0,1)");
  const double r = f.r;
  const int nodes_per_axis = static_cast<int>(std::ceil(std::pow(eps, -1.0 / r) - 1e-12));
  const int N = std::max(1, nodes_per_axis - 1);
  const double nu = std::pow(eps, (r + f.dim) / r);
  return smooth_net_grid(f, N, nu, cfg);
}

}  // namespace relucraft::smoothapprox
