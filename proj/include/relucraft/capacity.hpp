#pragma once

// Covering-number (entropy) upper bounds for deep ReLU hypothesis classes and
// the depth/parameter pairs that share one bound. Logarithms are base 2.

#include <ostream>
#include <string>
#include <vector>

namespace relucraft::capacity {

struct CapacityQuery {
  double n = 1.0;        // free parameters
  double L = 1.0;        // depth
  double R = 1.0;        // parameter magnitude bound
  double d_max = 1.0;    // widest layer, input included
  double epsilon = 0.5;  // covering radius in (0,1)
  double c_dim = 1.0;    // dimension constant

  // Throws InvalidInput unless all fields are positive and epsilon < 1.
  void validate() const;
};

struct LogBound {
  double log2 = 0.0;
  // The dominant log factor is <= 0, so the bound says nothing useful.
  bool degenerate = false;
};

// 3 (L+1)^2 n log2(C R D_max) + n log2(1/eps).
LogBound deep_log_covering_bound(const CapacityQuery& q);

// c n log2(R / eps).
LogBound shallow_log_covering_bound(double n, double R, double epsilon, double c_shallow = 1.0);

struct CurvePoint {
  int L = 0;
  long long n = 0;
  double log2_bound = 0.0;
};

struct IsoCurve {
  std::vector<CurvePoint> points;
  std::vector<std::string> warnings;  // depths with no feasible n
};

// For each L, the largest integer n >= 1 whose deep bound stays <= target.
// q_template.n and q_template.L are ignored.
IsoCurve iso_capacity_curve(double target_log2, const CapacityQuery& q_template, const std::vector<int>& depths);

// Header L,n,log2_bound.
void write_curve_csv(std::ostream& os, const IsoCurve& curve);

}  // namespace relucraft::capacity
