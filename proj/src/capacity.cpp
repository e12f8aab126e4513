#include "relucraft/capacity.hpp"

#include <cmath>
#include <iomanip>

#include "relucraft/error.hpp"

namespace relucraft::capacity {

void CapacityQuery::validate() const {
  for (double v : {n, L, R, d_max, epsilon, c_dim})
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("capacity query fields must be positive and finite");
  if (!(epsilon < 1.0)) throw InvalidInput("covering radius must be below 1");
}

namespace {

double per_parameter(const CapacityQuery& q, double L) {
  return 3.0 * (L + 1.0) * (L + 1.0) * std::log2(q.c_dim * q.R * q.d_max) + std::log2(1.0 / q.epsilon);
}

}  // namespace

LogBound deep_log_covering_bound(const CapacityQuery& q) {
  q.validate();
  return {q.n * per_parameter(q, q.L), !(q.c_dim * q.R * q.d_max > 1.0)};
}

LogBound shallow_log_covering_bound(double n, double R, double epsilon, double c_shallow) {
  for (double v : {n, R, epsilon, c_shallow})
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("shallow bound inputs must be positive and finite");
  return {c_shallow * n * std::log2(R / epsilon), !(R > epsilon)};
}

IsoCurve iso_capacity_curve(double target_log2, const CapacityQuery& q_template, const std::vector<int>& depths) {
  q_template.validate();
  if (!std::isfinite(target_log2)) throw InvalidInput("target bound must be finite");
  IsoCurve out;
  for (int L : depths) {
    if (L < 1) throw InvalidInput("depths must be >= 1");
    const double per = per_parameter(q_template, L);
    if (!(per > 0.0)) {
      out.warnings.push_back("L=" + std::to_string(L) + ": degenerate bound, no finite n");
      continue;
    }
    // Tolerate last-bit rounding when the target came from a bound itself.
    auto n = static_cast<long long>(std::floor(target_log2 / per * (1.0 + 1e-12)));
    while (n >= 1 && n * per > target_log2 * (1.0 + 1e-12)) --n;
    if (n < 1) {
      out.warnings.push_back("L=" + std::to_string(L) + ": no n >= 1 within the target");
      continue;
    }
    out.points.push_back({L, n, static_cast<double>(n) * per});
  }
  return out;
}

void write_curve_csv(std::ostream& os, const IsoCurve& curve) {
  os << "L,n,log2_bound\n";
  for (const auto& p : curve.points) os << p.L << ',' << p.n << ',' << std::setprecision(17) << p.log2_bound << '\n';
}

}  // namespace relucraft::capacity
