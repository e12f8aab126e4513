#include "relucraft/gates.hpp"

#include <cmath>
#include <string>

#include "relucraft/hash.hpp"

namespace relucraft::gates {

using netcore::Affine;
using netcore::kFixed;
using netcore::ParamId;
using netcore::Sharing;
using netcore::SparseMatrix;

void GateConfig::validate() const {
  if (!(theta > 0.0) || !std::isfinite(theta)) throw InvalidInput("gate theta must be positive");
  if (l_tilde < 1 || !(2.0 * theta * l_tilde > 1.0))
    throw InvalidInput("gate depth parameter must exceed 1/(2 theta), got " + std::to_string(l_tilde));
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidInput("gate epsilon must lie in (0,1)");
  if (arity < 1) throw InvalidInput("gate arity must be >= 1");
}

int binary_depth(int l_tilde) { return 2 * l_tilde + 8; }

int square_levels(double eps) {
  if (!(eps > 0.0)) throw InvalidInput("square accuracy must be positive");
  int s = 0;
  while (std::ldexp(1.0, -2 * (s + 1)) > eps) ++s;
  return s;
}

std::vector<int> level_chunks(int levels, int stages) {
  if (levels < 0 || stages < 1) throw InvalidInput("level_chunks needs levels >= 0 and stages >= 1");
  const int n = std::min(levels, stages);
  std::vector<int> out;
  for (int q = 0; q < n; ++q) out.push_back(levels / n + (q < levels % n ? 1 : 0));
  return out;
}

GateReport report(const ReluNet& net) {
  return {net.depth(), net.max_width(), netcore::count_free_params(net), net.param_bound(), net.nnz()};
}

namespace {

double hat(double x) { return x < 0.5 ? 2.0 * x : 2.0 - 2.0 * x; }

// Coefficients c_i with g_j(z) = sum_i c_i relu(z - i/2^k) on [0,1], j <= k.
std::vector<double> tooth_coeffs(int j, int k) {
  const int n = 1 << k;
  std::vector<double> v(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    double x = std::ldexp(static_cast<double>(i), -k);
    for (int r = 0; r < j; ++r) x = hat(x);
    v[static_cast<std::size_t>(i)] = x;
  }
  std::vector<double> c(static_cast<std::size_t>(n));
  double prev = 0.0;
  for (int i = 0; i < n; ++i) {
    const double slope = std::ldexp(v[static_cast<std::size_t>(i) + 1] - v[static_cast<std::size_t>(i)], k);
    c[static_cast<std::size_t>(i)] = slope - prev;
    prev = slope;
  }
  return c;
}

class ParamSpace {
 public:
  ParamSpace(int levels, int stages) { base_.add(std::uint64_t(levels)).add(std::uint64_t(stages)); }
  ParamId operator()(int layer, int kind, int i, int j = 0) const {
    Hasher h = base_;
    h.add(std::uint64_t(layer)).add(std::uint64_t(kind)).add(std::uint64_t(i)).add(std::uint64_t(j));
    return static_cast<ParamId>(h.value() >> 2);
  }

 private:
  Hasher base_{"square-gate"};
};

enum Kind { kToothWeight, kToothBias, kCarry, kOutput, kOutputBias };

// Running-sum update from a layer holding levels K+1..K+k: coefficient per
// tooth unit. The leading t term lives on unit 0 of the first layer.
std::vector<double> sum_coeffs(int k, int done, bool first) {
  std::vector<double> acc(static_cast<std::size_t>(1 << k), 0.0);
  if (first) acc[0] = 1.0;
  for (int j = 1; j <= k; ++j) {
    const auto c = tooth_coeffs(j, k);
    const double w = std::ldexp(1.0, -2 * (done + j));
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] -= w * c[i];
  }
  return acc;
}

}  // namespace

ReluNet square_levels_net(int levels, int stages) {
  if (levels < 0 || stages < 1) throw InvalidInput("square gate needs levels >= 0 and stages >= 1");
  if (levels > 26) throw InvalidInput("square gate accuracy below 4^-27 is not supported");
  const ParamSpace id(levels, stages);
  if (levels == 0) {
    Affine l(1, 1), out(1, 1);
    l.weights.add(0, 0, 1.0, id(0, kToothWeight, 0));
    l.set_bias(0, 0.0, id(0, kToothBias, 0));
    out.weights.add(0, 0, 1.0, id(1, kOutput, 0));
    out.set_bias(0, 0.0, id(1, kOutputBias, 0));
    return ReluNet(1, {l}, out);
  }
  const auto chunks = level_chunks(levels, stages);
  std::vector<Affine> layers;
  int done = 0;
  int prev_teeth = 0;
  bool prev_carry = false;
  for (std::size_t q = 0; q < chunks.size(); ++q) {
    const int k = chunks[q];
    const int teeth = 1 << k;
    const bool carry = q > 0;
    const int layer = static_cast<int>(q);
    Affine a(teeth + (carry ? 1 : 0), q == 0 ? 1 : prev_teeth + (prev_carry ? 1 : 0));
    if (q == 0) {
      for (int i = 0; i < teeth; ++i) {
        a.weights.add(i, 0, 1.0, id(layer, kToothWeight, 0));
        a.set_bias(i, -std::ldexp(double(i), -k), id(layer, kToothBias, i));
      }
    } else {
      const int kp = chunks[q - 1];
      const auto z = tooth_coeffs(kp, kp);
      const auto acc = sum_coeffs(kp, done - kp, q == 1);
      for (int i = 0; i < teeth; ++i) {
        for (int c = 0; c < prev_teeth; ++c)
          if (z[std::size_t(c)] != 0.0) a.weights.add(i, c, z[std::size_t(c)], id(layer, kToothWeight, c));
        a.set_bias(i, -std::ldexp(double(i), -k), id(layer, kToothBias, i));
      }
      for (int c = 0; c < prev_teeth; ++c)
        if (acc[std::size_t(c)] != 0.0) a.weights.add(teeth, c, acc[std::size_t(c)], id(layer, kCarry, c));
      if (prev_carry) a.weights.add(teeth, prev_teeth, 1.0, id(layer, kCarry, prev_teeth));
    }
    a.weights.finalize();
    layers.push_back(std::move(a));
    done += k;
    prev_teeth = teeth;
    prev_carry = carry;
  }
  const int kl = chunks.back();
  const auto acc = sum_coeffs(kl, done - kl, chunks.size() == 1);
  const int last = static_cast<int>(chunks.size());
  Affine out(1, prev_teeth + (prev_carry ? 1 : 0));
  for (int c = 0; c < prev_teeth; ++c)
    if (acc[std::size_t(c)] != 0.0) out.weights.add(0, c, acc[std::size_t(c)], id(last, kOutput, c));
  if (prev_carry) out.weights.add(0, prev_teeth, 1.0, id(last, kOutput, prev_teeth));
  out.set_bias(0, 0.0, id(last, kOutputBias, 0));
  out.weights.finalize();
  return ReluNet(1, std::move(layers), std::move(out));
}

ReluNet square_gate(const GateConfig& cfg) {
  cfg.validate();
  return square_levels_net(square_levels(cfg.epsilon), cfg.l_tilde);
}

ReluNet product2_gate(const GateConfig& cfg) {
  cfg.validate();
  GateConfig sq_cfg = cfg;
  sq_cfg.epsilon = cfg.epsilon / 24.0;
  const ReluNet sq = square_gate(sq_cfg);

  // relu(+-(u+u')), relu(+-u), relu(+-u') -> |u+u'|/4, |u|/2, |u'|/2.
  Affine abs(6, 2), halves(3, 6);
  const double sign[2] = {1.0, -1.0};
  for (int s = 0; s < 2; ++s) {
    abs.weights.add(s, 0, sign[s]);
    abs.weights.add(s, 1, sign[s]);
    abs.weights.add(2 + s, 0, sign[s]);
    abs.weights.add(4 + s, 1, sign[s]);
    halves.weights.add(0, s, 0.25);
    halves.weights.add(1, 2 + s, 0.5);
    halves.weights.add(2, 4 + s, 0.5);
  }
  halves.weights.finalize();
  const ReluNet abs_net(2, {abs}, halves);

  const std::vector<ReluNet> three{sq, sq, sq};
  ReluNet net = netcore::compose(netcore::direct_sum(three, false, Sharing::kShared), abs_net, Sharing::kShared);
  SparseMatrix comb(1, 3);
  comb.add(0, 0, 8.0);
  comb.add(0, 1, -2.0);
  comb.add(0, 2, -2.0);
  const std::vector<double> zero{0.0};
  net = netcore::postcompose_affine(net, comb, zero);

  const int extra = binary_depth(cfg.l_tilde) - net.depth();
  if (extra > 0) net = netcore::compose(netcore::identity_channels(1, extra, 5.0), net, Sharing::kShared);
  return net;
}

ProductGate productL_gate(const GateConfig& cfg) {
  cfg.validate();
  const int ell = cfg.arity;
  const int d2 = binary_depth(cfg.l_tilde);
  GateConfig stage_cfg = cfg;
  stage_cfg.epsilon = cfg.epsilon / ell;
  stage_cfg.arity = 2;
  ProductGate g;
  g.cfg = cfg;
  g.binary = product2_gate(stage_cfg);
  if (ell == 1) {
    g.net = netcore::identity_channels(1, d2, 2.0);
    return g;
  }
  auto stage = [&](int remaining) {
    if (remaining == 0) return g.binary;
    const std::vector<ReluNet> parts{g.binary, netcore::identity_channels(remaining, d2, 2.0)};
    return netcore::direct_sum(parts, false, Sharing::kShared);
  };
  ReluNet net = stage(ell - 2);
  for (int j = 2; j < ell; ++j) net = netcore::compose(stage(ell - 1 - j), net, Sharing::kShared);
  g.net = netcore::compose(netcore::exact_identity(1, d2), net, Sharing::kShared);
  return g;
}

std::vector<double> ProductGate::stage_outputs(std::span<const double> u) const {
  if (u.size() != static_cast<std::size_t>(cfg.arity)) throw InvalidInput("product gate input has wrong length");
  std::vector<double> out;
  if (cfg.arity == 1) return out;
  netcore::Evaluator ev(binary);
  double v = u[0];
  for (std::size_t k = 1; k < u.size(); ++k) {
    const double pair[2] = {v, u[k]};
    v = ev.scalar(pair);
    if (!(std::abs(v) <= 2.0)) throw SpecViolation("running product left [-2,2]: " + std::to_string(v));
    out.push_back(v);
  }
  return out;
}

}  // namespace relucraft::gates
