#pragma once

// Product gates built from sawtooth square approximations.
//
// Square:  t^2 = t - sum_{s>=1} g_s(t) / 4^s on [0,1], g_s the s-fold hat.
// Truncating after S levels leaves error at most 4^{-S-1}. The S levels are
// split over `stages` hidden layers; a layer holding k levels has 2^k tooth
// units plus one carry unit for the running sum, so for a fixed stage count
// the width grows like eps^{-1/(2 stages)}.
//
// Binary product on [-2,2]^2 via polarization, l-ary product by chaining
// binary gates with identity channels for the inputs not yet consumed.

#include <cstdint>
#include <vector>

#include "relucraft/netcore.hpp"

namespace relucraft::gates {

using netcore::ReluNet;

struct GateConfig {
  double theta = 0.5;
  int l_tilde = 2;
  double epsilon = 0.01;
  int arity = 2;

  // Throws InvalidInput unless l_tilde > 1/(2 theta), 0 < epsilon < 1, arity >= 1.
  void validate() const;
};

// Layer count of the binary gate: 2 l_tilde + 8.
int binary_depth(int l_tilde);

// Smallest S >= 0 with 4^{-S-1} <= eps.
int square_levels(double eps);

// Split of `levels` tooth levels over at most `stages` layers, as even as
// possible, larger chunks first. Empty when levels == 0.
std::vector<int> level_chunks(int levels, int stages);

struct GateReport {
  int depth = 0;
  int max_width = 0;
  std::size_t free_params = 0;
  double param_bound = 0.0;
  std::size_t nnz = 0;
};
GateReport report(const ReluNet& net);

// Square approximation on [0,1] with exactly `levels` sawtooth levels spread
// over min(stages, levels) layers (one layer when levels == 0).
ReluNet square_levels_net(int levels, int stages);

// |S(t) - t^2| <= cfg.epsilon on [0,1]; depth <= l_tilde.
ReluNet square_gate(const GateConfig& cfg);

// |P(u,u') - u u'| <= cfg.epsilon on [-2,2]^2; depth exactly 2 l_tilde + 8.
// Inner squares are built at cfg.epsilon / 24 and share parameters.
ReluNet product2_gate(const GateConfig& cfg);

// l-ary product unit. `binary` is the shared stage gate built at accuracy
// epsilon / arity; `net` chains arity - 1 copies of it and is padded to
// depth exactly arity * (2 l_tilde + 8) with exact identity channels, so the
// output map is the fixed u - u' readout with no offset.
struct ProductGate {
  GateConfig cfg;
  ReluNet binary;
  ReluNet net;

  // Running products v_1 = P(u_1,u_2), v_j = P(v_{j-1}, u_{j+1}) computed
  // with the stage gate. Throws SpecViolation if one leaves [-2,2].
  std::vector<double> stage_outputs(std::span<const double> u) const;
};

// Inputs in [-1,1]^arity; |net(u) - prod u_k| <= cfg.epsilon.
// Arity 1 is the identity through arity * (2 l_tilde + 8) layers.
ProductGate productL_gate(const GateConfig& cfg);

}  // namespace relucraft::gates
